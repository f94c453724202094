//! Unconditional-summability certificates.
//!
//! For every functional `phi` in the unit ball of `l_{p*}` the block sums
//! satisfy `sum_{j in block k} |phi(x_j)| <= alpha^(1-k)`, so the tails
//! `sum_{k >= n} alpha^(1-k) = alpha^(2-n) / (alpha - 1)` go to zero and
//! `||sum_{j in M} x_j|| < delta` whenever `min M` lies past the block
//! `n_delta`. The dual supremum is never computed exactly: sampling gives a
//! lower estimate that is reported next to the analytic upper bound.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{conjugate_exponent, locate_block_range, scaling_log, BlockIndex, Config, ScalarField};
use crate::error::{Error, Result};
use crate::kernels::{bilinear_form_fast, dual_row_sum, schur_bound, Kernel, KernelMatrix};
use crate::numeric::{exp_alpha, lp_norm, lp_power_sum, root};
use crate::rng::{derive_seed, trial_rng};
use crate::sequence::MaterializationPolicy;

/// Random vector on the unit sphere of `l_q^n` (`q = inf` allowed).
///
/// Finite `q`: independent standard normal entries (complex normal in the
/// complex case), rescaled to unit `l_q` norm. Infinite `q`: entries uniform
/// on the unit disc (complex) or `+-uniform[0,1]` (real), rescaled so the
/// largest modulus is 1.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, q: f64, real: bool) -> Vec<Complex64> {
    assert!(n >= 1, "dimension must be positive");
    let mut v: Vec<Complex64> = if q.is_infinite() {
        (0..n)
            .map(|_| {
                if real {
                    let mag: f64 = rng.random();
                    Complex64::new(if rng.random::<bool>() { mag } else { -mag }, 0.0)
                } else {
                    let radius = rng.random::<f64>().sqrt();
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    Complex64::from_polar(radius, theta)
                }
            })
            .collect()
    } else {
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
                Complex64::new(re, im)
            })
            .collect()
    };
    let norm = lp_norm(&v, q);
    if norm == 0.0 {
        // measure-zero event; fall back to a coordinate vector
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        v[0] = Complex64::new(1.0, 0.0);
        return v;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

/// A functional on the support of block `k`, with `||phi||_{p*} <= 1`.
#[derive(Debug, Clone)]
pub struct DualSample {
    pub k: u32,
    pub phi: Vec<Complex64>,
    /// Seed the sample was drawn from, when it was drawn at random.
    pub seed: Option<u64>,
}

impl DualSample {
    /// Functional with the given coordinates; rescaled onto the unit ball if
    /// its `l_{p*}` norm exceeds one.
    pub fn new(k: u32, mut phi: Vec<Complex64>, pstar: f64) -> Self {
        let norm = lp_norm(&phi, pstar);
        if norm > 1.0 {
            phi.iter_mut().for_each(|z| *z /= norm);
        }
        DualSample { k, phi, seed: None }
    }

    pub fn dual_norm(&self, pstar: f64) -> f64 {
        lp_norm(&self.phi, pstar)
    }
}

/// Unit-norm random functional on `n` coordinates, deterministic in `seed`.
pub fn random_dual_unit(n: usize, pstar: f64, field: ScalarField, seed: u64) -> Vec<Complex64> {
    let mut rng = trial_rng(seed, 0);
    sample_unit_vector(&mut rng, n, pstar, field == ScalarField::RealWalsh)
}

fn block_kernel(block: &BlockIndex, cfg: &Config, policy: &MaterializationPolicy) -> Result<KernelMatrix> {
    let n = policy.streamable_size(block)?;
    Ok(match cfg.field {
        ScalarField::ComplexDft => KernelMatrix::dft(n),
        ScalarField::RealWalsh => KernelMatrix::walsh(n.trailing_zeros()),
    })
}

fn check_support(sample: &DualSample, block: &BlockIndex, n: usize) -> Result<()> {
    if sample.k != block.k || sample.phi.len() != n {
        return Err(Error::Input(format!(
            "functional on block {} with {} coordinates does not match block {} ({n} coordinates)",
            sample.k,
            sample.phi.len(),
            block.k
        )));
    }
    Ok(())
}

/// `sum_{j in block k} |phi(x_j)|`, in the reindexed form
/// `j_k^{-(1/2+1/p+1/k)} sum_r |sum_s phi_s a_rs|`, via the fast transform.
pub fn block_dual_sum(sample: &DualSample, cfg: &Config, policy: &MaterializationPolicy) -> Result<f64> {
    let block = BlockIndex::new(sample.k, cfg.alpha);
    let kernel = block_kernel(&block, cfg, policy)?;
    check_support(sample, &block, kernel.size())?;
    let row_sum: f64 = kernel.apply(&sample.phi).iter().map(|z| z.norm()).sum();
    Ok(exp_alpha(scaling_log(sample.k, cfg), cfg.ln_alpha()) * row_sum)
}

/// Same as [`block_dual_sum`], streamed row by row (`O(j_k^2)`).
pub fn block_dual_sum_rowwise(sample: &DualSample, cfg: &Config, policy: &MaterializationPolicy) -> Result<f64> {
    let block = BlockIndex::new(sample.k, cfg.alpha);
    let kernel = block_kernel(&block, cfg, policy)?;
    check_support(sample, &block, kernel.size())?;
    Ok(exp_alpha(scaling_log(sample.k, cfg), cfg.ln_alpha()) * dual_row_sum(&kernel, &sample.phi))
}

/// `alpha^(1-k)`.
pub fn block_dual_bound(k: u32, cfg: &Config) -> f64 {
    exp_alpha(1.0 - f64::from(k), cfg.ln_alpha())
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSupEstimate {
    pub k: u32,
    pub trials: u64,
    /// Largest sampled block dual sum (a lower estimate of the supremum).
    pub observed: f64,
    /// Analytic upper bound `alpha^(1-k)`.
    pub bound: f64,
    /// Trial that attained `observed`.
    pub best_trial: Option<u64>,
}

impl BlockSupEstimate {
    pub fn within_bound(&self, tol: f64) -> bool {
        self.observed <= self.bound * (1.0 + tol)
    }
}

/// Samples `trials` unit functionals on block `k` and records the largest
/// dual sum. Trial `t` draws from `derive_seed(derive_seed(seed, k), t)`.
pub fn estimate_block_sup(
    k: u32,
    trials: u64,
    seed: u64,
    cfg: &Config,
    policy: &MaterializationPolicy,
) -> Result<BlockSupEstimate> {
    let block = BlockIndex::new(k, cfg.alpha);
    let kernel = block_kernel(&block, cfg, policy)?;
    let n = kernel.size();
    let scale = exp_alpha(scaling_log(k, cfg), cfg.ln_alpha());
    let block_seed = derive_seed(seed, u64::from(k));
    let real = cfg.field == ScalarField::RealWalsh;
    let sums: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(block_seed, t);
            let phi = sample_unit_vector(&mut rng, n, cfg.pstar, real);
            scale * kernel.apply(&phi).iter().map(|z| z.norm()).sum::<f64>()
        })
        .collect();
    let best = sums
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (t, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((t, v)),
        });
    Ok(BlockSupEstimate {
        k,
        trials,
        observed: best.map_or(0.0, |(_, v)| v),
        bound: block_dual_bound(k, cfg),
        best_trial: best.map(|(t, _)| t as u64),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailCertificate {
    pub n: u32,
    /// `sum_{k >= n} alpha^(1-k) = alpha^(2-n) / (alpha - 1)`.
    pub bound: f64,
    /// `log_alpha` of `bound`.
    pub log_bound: f64,
}

pub fn tail_bound(n: u32, cfg: &Config) -> TailCertificate {
    assert!(n >= 1, "blocks are numbered from 1");
    let alpha = f64::from(cfg.alpha);
    let log_bound = 2.0 - f64::from(n) - (alpha - 1.0).ln() / cfg.ln_alpha();
    let bound = alpha.powi(2 - n as i32) / (alpha - 1.0);
    TailCertificate { n, bound, log_bound }
}

/// Smallest block `n` with `tail_bound(n) < delta`.
pub fn delta_threshold(delta: f64, cfg: &Config) -> Result<u32> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let log_delta = delta.ln() / cfg.ln_alpha();
    // tail(n) < delta  <=>  2 - n - log_a(alpha - 1) < log_a(delta); start
    // just below the analytic crossing and confirm with the direct values
    let guess = (2.0 - log_delta - (f64::from(cfg.alpha) - 1.0).ln() / cfg.ln_alpha()).floor();
    let mut n = (guess as i64 - 1).max(1) as u32;
    while n > 1 && tail_bound(n - 1, cfg).bound < delta {
        n -= 1;
    }
    while tail_bound(n, cfg).bound >= delta {
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetNorm {
    pub norm: f64,
    /// Smallest block touched by the index set.
    pub k_min: Option<u32>,
    /// `||sum_{j in M, j in block k} x_j||_p^p` per touched block.
    pub block_powers: Vec<(u32, f64)>,
    /// `tail_bound(k_min)`.
    pub bound: Option<f64>,
}

/// `||sum_{j in M} x_j||_p` for a finite index set, accumulated block by
/// block. Blocks have disjoint supports, so the `p`-th powers add. Within a
/// block the sum is `scale * A^T w` with `w_r = 1` for the selected rows.
/// Duplicate indices count once.
pub fn finite_subset_norm(indices: &[BigUint], cfg: &Config, policy: &MaterializationPolicy) -> Result<SubsetNorm> {
    let mut rows: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for j in indices {
        if let Some(k) = locate_block_range(j, cfg) {
            let block = BlockIndex::new(k, cfg.alpha);
            policy.streamable_size(&block)?;
            let r = usize::try_from(j - block.start()).unwrap();
            rows.entry(k).or_default().push(r);
        }
    }
    let mut block_powers = Vec::with_capacity(rows.len());
    for (&k, selected) in &rows {
        let block = BlockIndex::new(k, cfg.alpha);
        let kernel = block_kernel(&block, cfg, policy)?;
        let mut w = vec![Complex64::new(0.0, 0.0); kernel.size()];
        for &r in selected {
            w[r] = Complex64::new(1.0, 0.0);
        }
        let scale = exp_alpha(scaling_log(k, cfg), cfg.ln_alpha());
        let column_sums = kernel.apply_transpose(&w);
        block_powers.push((k, scale.powf(cfg.p) * lp_power_sum(&column_sums, cfg.p)));
    }
    let total: f64 = block_powers.iter().map(|(_, s)| s).sum();
    let k_min = rows.keys().next().copied();
    Ok(SubsetNorm {
        norm: root(total, cfg.p),
        k_min,
        block_powers,
        bound: k_min.map(|k| tail_bound(k, cfg).bound),
    })
}


#[derive(Debug, Clone, Serialize)]
pub struct SchurSample {
    pub n: usize,
    pub p: f64,
    pub trials: u64,
    /// Largest `|sum a_rs y1_r y2_s|` seen.
    pub observed: f64,
    /// `n^(1/2 + 1/p)`.
    pub bound: f64,
    pub worst_trial: Option<u64>,
}

impl SchurSample {
    pub fn within_bound(&self, tol: f64) -> bool {
        self.observed <= self.bound * (1.0 + tol)
    }
}

/// Samples `|bilinear_form(K, y1, y2)|` over unit pairs with `y1` on the
/// `l_{p*}` sphere and `y2` on the `l_inf` sphere. Trial `t` draws from
/// `trial_rng(seed, t)`.
pub fn sample_schur<K: Kernel + ?Sized>(kernel: &K, p: f64, trials: u64, seed: u64, real: bool) -> SchurSample {
    let n = kernel.size();
    let pstar = conjugate_exponent(p);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let y1 = sample_unit_vector(&mut rng, n, pstar, real);
            let y2 = sample_unit_vector(&mut rng, n, f64::INFINITY, real);
            bilinear_form_fast(kernel, &y1, &y2).norm()
        })
        .collect();
    let mut worst: Option<(u64, f64)> = None;
    for (t, &v) in values.iter().enumerate() {
        if worst.is_none_or(|(_, w)| v > w) {
            worst = Some((t as u64, v));
        }
    }
    SchurSample {
        n,
        p,
        trials,
        observed: worst.map_or(0.0, |(_, v)| v),
        bound: schur_bound(n, p),
        worst_trial: worst.map(|(t, _)| t),
    }
}
