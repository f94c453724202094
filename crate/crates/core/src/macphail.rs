//! The Macphail functional
//! `G(S) = max_{sigma} ||sum_{i in sigma} x_i|| / sum_i ||x_i||`
//! and the decreasing upper-bound curve obtained from the constructed blocks.
//!
//! `sigma` ranges over every subset, the empty one included. Exhaustive
//! evaluation walks the subsets in Gray-code order so each step adds or
//! removes one vector from a running sum. Randomized search (uniform subsets
//! followed by single-flip hill climbing) only ever yields a lower bound.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{norm_log, scaling_log, BlockIndex, Config, ScalarField};
use crate::error::{Error, Result};
use crate::kernels::{dft_entry, Kernel, KernelMatrix};
use crate::numeric::{exp_alpha, lp_norm, lp_power_sum, root};
use crate::rng::trial_rng;
use crate::sequence::MaterializationPolicy;
use crate::transform::TransformPlan;

/// Largest sequence evaluated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 24;

/// A finite family of vectors in a common `l_p`, viewed through a dense
/// accumulator of `dim()` coordinates.
pub trait VectorFamily: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    fn p(&self) -> f64;

    /// `acc += sign * x_i`.
    fn add_to(&self, i: usize, sign: f64, acc: &mut [Complex64]);

    fn norm(&self, i: usize) -> f64;

    /// `sum_{i : members[i]} x_i`.
    fn subset_sum(&self, members: &[bool]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (i, _) in members.iter().enumerate().filter(|(_, &m)| m) {
            self.add_to(i, 1.0, &mut acc);
        }
        acc
    }

    fn total_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.norm(i)).sum()
    }
}

/// User-supplied finite sequence of finitely supported vectors.
/// Coordinates are 1-based.
#[derive(Debug, Clone)]
pub struct FiniteSequence {
    p: f64,
    coords: Vec<u64>,
    vectors: Vec<Vec<(usize, Complex64)>>,
    norms: Vec<f64>,
}

impl FiniteSequence {
    pub fn new(p: f64, vectors: Vec<Vec<(u64, Complex64)>>) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Input(format!("p must be at least 1, got {p}")));
        }
        if vectors.is_empty() {
            return Err(Error::Degenerate("empty sequence".into()));
        }
        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        for v in &vectors {
            for &(m, _) in v {
                if m == 0 {
                    return Err(Error::Input("coordinates are 1-based".into()));
                }
                index.insert(m, 0);
            }
        }
        for (pos, slot) in index.values_mut().enumerate() {
            *slot = pos;
        }
        let mut compact = Vec::with_capacity(vectors.len());
        let mut norms = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            let mut entries: Vec<(usize, Complex64)> = v.iter().map(|&(m, z)| (index[&m], z)).collect();
            entries.sort_by_key(|&(c, _)| c);
            if entries.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Input(format!("vector {} repeats a coordinate", i + 1)));
            }
            let values: Vec<Complex64> = entries.iter().map(|&(_, z)| z).collect();
            norms.push(lp_norm(&values, p));
            compact.push(entries);
        }
        Ok(FiniteSequence {
            p,
            coords: index.into_keys().collect(),
            vectors: compact,
            norms,
        })
    }

    /// Real vectors given densely on coordinates `1..=len`.
    pub fn from_dense_real(p: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let vectors = rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(m, &x)| (m as u64 + 1, Complex64::new(x, 0.0)))
                    .collect()
            })
            .collect();
        Self::new(p, vectors)
    }

    /// Every vector multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            for (_, z) in v.iter_mut() {
                *z *= c;
            }
        }
        for n in &mut out.norms {
            *n *= c.norm();
        }
        out
    }

    /// Vectors reordered so that position `i` holds the old `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        out.vectors = order.iter().map(|&i| self.vectors[i].clone()).collect();
        out.norms = order.iter().map(|&i| self.norms[i]).collect();
        out
    }

    /// Original (1-based) coordinate of accumulator slot `c`.
    pub fn coordinate(&self, c: usize) -> u64 {
        self.coords[c]
    }
}

impl VectorFamily for FiniteSequence {
    fn len(&self) -> usize {
        self.vectors.len()
    }

    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn p(&self) -> f64 {
        self.p
    }

    fn add_to(&self, i: usize, sign: f64, acc: &mut [Complex64]) {
        for &(c, z) in &self.vectors[i] {
            acc[c] += sign * z;
        }
    }

    fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }
}

/// All `j_k` terms of block `k`, in local coordinates `s = 1..=j_k`.
/// Term norms use the closed form `alpha^norm_log(k)`.
#[derive(Debug, Clone)]
pub struct BlockFamily {
    pub k: u32,
    cfg: Config,
    n: usize,
    scale: f64,
    norm: f64,
    kernel: KernelMatrix,
    /// `exp(2 pi i t / n)` for the DFT kernel.
    roots: Vec<Complex64>,
}

impl BlockFamily {
    pub fn new(k: u32, cfg: &Config, policy: &MaterializationPolicy) -> Result<Self> {
        let block = BlockIndex::new(k, cfg.alpha);
        let n = policy.streamable_size(&block)?;
        let (kernel, roots) = match cfg.field {
            ScalarField::ComplexDft => {
                let roots = (0..n as u64)
                    .map(|t| if t == 0 { dft_entry(n as u64, n as u64, 1) } else { dft_entry(n as u64, t, 1) })
                    .collect();
                (KernelMatrix::dft(n), roots)
            }
            ScalarField::RealWalsh => (KernelMatrix::walsh(n.trailing_zeros()), Vec::new()),
        };
        Ok(BlockFamily {
            k,
            cfg: *cfg,
            n,
            scale: exp_alpha(scaling_log(k, cfg), cfg.ln_alpha()),
            norm: exp_alpha(norm_log(k), cfg.ln_alpha()),
            kernel,
            roots,
        })
    }
}

impl VectorFamily for BlockFamily {
    fn len(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn p(&self) -> f64 {
        self.cfg.p
    }

    fn add_to(&self, i: usize, sign: f64, acc: &mut [Complex64]) {
        let weight = sign * self.scale;
        let r = i + 1;
        match self.cfg.field {
            ScalarField::ComplexDft => {
                let n = self.n;
                let mut t = r % n;
                for a in acc.iter_mut() {
                    // entry (r, s) = roots[(r s) mod n]
                    *a += weight * self.roots[t];
                    t += r;
                    if t >= n {
                        t %= n;
                    }
                }
            }
            ScalarField::RealWalsh => {
                let TransformPlan::Walsh { characters, .. } = self.kernel.plan() else {
                    unreachable!()
                };
                let row = (r - 1) as u32;
                for (a, &c) in acc.iter_mut().zip(characters.iter()) {
                    if (row & c).count_ones().is_multiple_of(2) {
                        a.re += weight;
                    } else {
                        a.re -= weight;
                    }
                }
            }
        }
    }

    fn norm(&self, _i: usize) -> f64 {
        self.norm
    }

    fn subset_sum(&self, members: &[bool]) -> Vec<Complex64> {
        let w: Vec<Complex64> = members
            .iter()
            .map(|&m| Complex64::new(if m { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let mut u = self.kernel.apply_transpose(&w);
        u.iter_mut().for_each(|z| *z *= self.scale);
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GMethod {
    Exhaustive,
    Randomized,
}

#[derive(Debug, Clone, Serialize)]
pub struct GReport {
    pub value: f64,
    /// Attaining subset, 1-based positions in the sequence.
    pub subset: Vec<usize>,
    pub method: GMethod,
    pub trials: Option<u64>,
}

fn subset_norm<F: VectorFamily + ?Sized>(family: &F, members: &[bool]) -> f64 {
    lp_norm(&family.subset_sum(members), family.p())
}

fn members_to_positions(members: &[bool]) -> Vec<usize> {
    members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i + 1).collect()
}

fn denominator<F: VectorFamily + ?Sized>(family: &F) -> Result<f64> {
    let total = family.total_norm();
    if total > 0.0 {
        Ok(total)
    } else {
        Err(Error::Degenerate("every vector is zero".into()))
    }
}

/// Gray-code chunks are fixed independently of the thread count.
const GRAY_CHUNKS: u64 = 64;

/// Exact `G(S)` by enumerating all `2^n` subsets.
pub fn g_exact<F: VectorFamily + ?Sized>(family: &F) -> Result<GReport> {
    let n = family.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Budget(format!(
            "exhaustive evaluation is limited to {EXHAUSTIVE_LIMIT} vectors, got {n}"
        )));
    }
    let total = denominator(family)?;
    let p = family.p();
    let count = 1u64 << n;
    let chunks = GRAY_CHUNKS.min(count);
    let per_chunk = count / chunks;
    let bests: Vec<(f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * per_chunk;
            let end = start + per_chunk;
            let mut code = start ^ (start >> 1);
            let members: Vec<bool> = (0..n).map(|i| code >> i & 1 == 1).collect();
            let mut acc = family.subset_sum(&members);
            let mut best = (lp_power_sum(&acc, p), code);
            for g in start + 1..end {
                let bit = g.trailing_zeros() as usize;
                let adding = code >> bit & 1 == 0;
                family.add_to(bit, if adding { 1.0 } else { -1.0 }, &mut acc);
                code ^= 1 << bit;
                let value = lp_power_sum(&acc, p);
                if value > best.0 {
                    best = (value, code);
                }
            }
            best
        })
        .collect();
    // first chunk wins ties, so the reduction is order-independent
    let (_, code) = bests
        .iter()
        .fold((f64::NEG_INFINITY, 0), |acc, &b| if b.0 > acc.0 { b } else { acc });
    let members: Vec<bool> = (0..n).map(|i| code >> i & 1 == 1).collect();
    Ok(GReport {
        value: subset_norm(family, &members) / total,
        subset: members_to_positions(&members),
        method: GMethod::Exhaustive,
        trials: None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GRandomOptions {
    pub trials: u64,
    pub seed: u64,
    /// Hill-climbing passes over all positions per trial.
    pub max_sweeps: u32,
    /// Cap on flip evaluations per trial; `None` means only `max_sweeps`
    /// limits the climb.
    pub flip_budget: Option<u64>,
}

impl GRandomOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        GRandomOptions {
            trials,
            seed,
            max_sweeps: 32,
            flip_budget: None,
        }
    }
}

/// Randomized lower bound on `G(S)`: each trial draws a uniform subset and
/// climbs by single flips while the subset norm strictly improves. Trial
/// `t` uses its own derived stream, so the report is reproducible.
pub fn g_random<F: VectorFamily + ?Sized>(family: &F, opts: &GRandomOptions) -> Result<GReport> {
    let n = family.len();
    let total = denominator(family)?;
    if opts.trials == 0 {
        return Ok(GReport {
            value: 0.0,
            subset: Vec::new(),
            method: GMethod::Randomized,
            trials: Some(0),
        });
    }
    let p = family.p();
    let results: Vec<(f64, Vec<bool>)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(opts.seed, t);
            let mut members: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let mut acc = family.subset_sum(&members);
            let mut current = lp_power_sum(&acc, p);
            let mut flips = 0u64;
            'climb: for _ in 0..opts.max_sweeps {
                let mut improved = false;
                let offset = rng.random_range(0..n);
                for step in 0..n {
                    if opts.flip_budget.is_some_and(|b| flips >= b) {
                        break 'climb;
                    }
                    flips += 1;
                    let i = (offset + step) % n;
                    let sign = if members[i] { -1.0 } else { 1.0 };
                    family.add_to(i, sign, &mut acc);
                    let candidate = lp_power_sum(&acc, p);
                    if candidate > current * (1.0 + 1e-13) {
                        current = candidate;
                        members[i] = !members[i];
                        improved = true;
                    } else {
                        family.add_to(i, -sign, &mut acc);
                    }
                }
                if !improved {
                    break;
                }
            }
            (subset_norm(family, &members), members)
        })
        .collect();
    let mut best = &results[0];
    for r in &results[1..] {
        if r.0 > best.0 {
            best = r;
        }
    }
    Ok(GReport {
        value: best.0 / total,
        subset: members_to_positions(&best.1),
        method: GMethod::Randomized,
        trials: Some(opts.trials),
    })
}

/// `log_alpha` of the block bound `alpha^(1-k) / j_k^(1/2 - 1/k)`, which is
/// the integer `(1-k) - (k-1)(k-2)/2`.
pub fn block_g_bound_log(k: u32) -> i64 {
    assert!(k >= 1, "blocks are numbered from 1");
    let k = i64::from(k);
    (1 - k) - (k - 1) * (k - 2) / 2
}

/// Upper bound on `G(block k)`: numerator at most `alpha^(1-k)` (dual block
/// bound), denominator `j_k * j_k^{-(1/2+1/k)}`.
pub fn block_g_bound(k: u32, cfg: &Config) -> f64 {
    // integer exponent, so powi is exact whenever the result is representable
    match i32::try_from(block_g_bound_log(k)) {
        Ok(e) => f64::from(cfg.alpha).powi(e),
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMethod {
    Exact,
    Randomized,
    Analytic,
}

impl CurveMethod {
    pub fn name(self) -> &'static str {
        match self {
            CurveMethod::Exact => "exact",
            CurveMethod::Randomized => "randomized",
            CurveMethod::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub k: u32,
    pub bound_log: i64,
    pub bound: f64,
    pub method: CurveMethod,
    pub estimate: Option<f64>,
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub trials: u64,
    pub seed: u64,
    /// Coordinate updates allowed per randomized trial during hill climbing.
    pub work_per_trial: u64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            trials: 64,
            seed: 0,
            work_per_trial: 1 << 26,
        }
    }
}

/// Analytic bound for every block up to `k_max`, plus exact `G` for
/// `k <= 2` and a randomized lower estimate for `3 <= k <= 5` where the
/// block can be streamed.
pub fn mu_upper_curve(k_max: u32, cfg: &Config, opts: &CurveOptions) -> Result<Vec<CurveRow>> {
    let policy = MaterializationPolicy::default();
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let bound_log = block_g_bound_log(k);
        let bound = block_g_bound(k, cfg);
        let streamable = policy.streamable_size(&BlockIndex::new(k, cfg.alpha)).is_ok();
        let (method, estimate, trials) = if k <= 2 && streamable {
            let fam = BlockFamily::new(k, cfg, &policy)?;
            if fam.len() <= EXHAUSTIVE_LIMIT {
                (CurveMethod::Exact, Some(g_exact(&fam)?.value), None)
            } else {
                randomized_row(&fam, k, opts)?
            }
        } else if k <= 5 && streamable {
            randomized_row(&BlockFamily::new(k, cfg, &policy)?, k, opts)?
        } else {
            (CurveMethod::Analytic, None, None)
        };
        rows.push(CurveRow {
            k,
            bound_log,
            bound,
            method,
            estimate,
            trials,
        });
    }
    Ok(rows)
}

fn randomized_row(fam: &BlockFamily, k: u32, opts: &CurveOptions) -> Result<(CurveMethod, Option<f64>, Option<u64>)> {
    let dim = fam.dim() as u64;
    // larger blocks get fewer trials; every trial still gets one full
    // transform plus as many flips as the work allowance pays for
    let trials = if dim <= 64 {
        opts.trials
    } else if dim <= 4096 {
        opts.trials.min(4)
    } else {
        opts.trials.min(1)
    };
    let ro = GRandomOptions {
        trials,
        seed: crate::rng::derive_seed(opts.seed, u64::from(k)),
        max_sweeps: 32,
        flip_budget: Some((opts.work_per_trial / (2 * dim)).max(1)),
    };
    let report = g_random(fam, &ro)?;
    Ok((CurveMethod::Randomized, Some(report.value), Some(trials)))
}

/// Convenience wrapper: `G` of a family, exhaustive when small enough.
pub fn g_auto<F: VectorFamily + ?Sized>(family: &F, trials: u64, seed: u64) -> Result<GReport> {
    if family.len() <= EXHAUSTIVE_LIMIT {
        g_exact(family)
    } else {
        g_random(family, &GRandomOptions::new(trials, seed))
    }
}

/// `||x||_p` of a dense accumulator, re-exported for callers that build
/// their own subset sums.
pub fn accumulator_norm(acc: &[Complex64], p: f64) -> f64 {
    root(lp_power_sum(acc, p), p)
}
