//! Terms of the two constructions.
//!
//! For `j` in block `k` the term is
//! `x_j = alpha^scaling_log(k) * sum_{s=1}^{j_k} a_{r s} e_{j_k + s - 1}`
//! with `r = j - j_k + 1` and `a` the block's `j_k x j_k` kernel; every other
//! `j` carries the zero term. Blocks with `j_k <= dense_limit` may be stored,
//! blocks up to `stream_limit` are streamed, and anything larger is handled
//! through closed forms only.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::blocks::{locate_block_range, norm_log, scaling_log, BlockIndex, Config, ScalarField};
use crate::error::{Error, Result};
use crate::kernels::{dft_entry, walsh_entry, DENSE_LIMIT};
use crate::numeric::{abs_pow, exp_alpha, log_add, root};

/// Largest block size whose coefficients are ever enumerated.
pub const STREAM_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterializationMode {
    Dense,
    Streamed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaterializationPolicy {
    pub dense_limit: u64,
    pub stream_limit: u64,
    pub mode: MaterializationMode,
}

impl Default for MaterializationPolicy {
    fn default() -> Self {
        MaterializationPolicy {
            dense_limit: DENSE_LIMIT as u64,
            stream_limit: STREAM_LIMIT,
            mode: MaterializationMode::Streamed,
        }
    }
}

impl MaterializationPolicy {
    pub fn dense() -> Self {
        MaterializationPolicy {
            mode: MaterializationMode::Dense,
            ..Self::default()
        }
    }

    /// Size of `block` as a machine integer if its coefficients may be
    /// enumerated under this policy.
    pub fn streamable_size(&self, block: &BlockIndex) -> Result<usize> {
        match block.size() {
            Some(n) if n <= self.stream_limit => Ok(n as usize),
            _ => Err(Error::Budget(format!(
                "block {} has alpha^{} coordinates per term; only closed forms are available above {}",
                block.k,
                block.log_size(),
                self.stream_limit
            ))),
        }
    }
}

/// One element `x_j` of the sequence.
#[derive(Debug, Clone)]
pub struct Term {
    pub j: BigUint,
    pub field: ScalarField,
    pub alpha: u32,
    placement: Option<Placement>,
}

#[derive(Debug, Clone)]
struct Placement {
    block: BlockIndex,
    row: BigUint,
    scaling_log: f64,
    dense: Option<Vec<Complex64>>,
}

/// Builds `x_j`. Fails only when dense materialization is requested for a
/// block above the policy's dense limit.
pub fn build_term(j: &BigUint, cfg: &Config, policy: &MaterializationPolicy) -> Result<Term> {
    assert!(!j.is_zero(), "series indices start at 1");
    let placement = match locate_block_range(j, cfg) {
        None => None,
        Some(k) => {
            let block = BlockIndex::new(k, cfg.alpha);
            let row = j - block.start() + 1u32;
            let mut placement = Placement {
                block,
                row,
                scaling_log: scaling_log(k, cfg),
                dense: None,
            };
            if policy.mode == MaterializationMode::Dense {
                let n = match placement.block.size() {
                    Some(n) if n <= policy.dense_limit => n,
                    _ => {
                        return Err(Error::Budget(format!(
                            "dense materialization of block {k} exceeds the limit of {} coordinates",
                            policy.dense_limit
                        )))
                    }
                };
                let scale = exp_alpha(placement.scaling_log, cfg.ln_alpha());
                let r = placement.row.to_u64().unwrap();
                let coeffs = (1..=n)
                    .map(|s| scale * kernel_value(cfg.field, n, r, s))
                    .collect();
                placement.dense = Some(coeffs);
            }
            Some(placement)
        }
    };
    Ok(Term {
        j: j.clone(),
        field: cfg.field,
        alpha: cfg.alpha,
        placement,
    })
}

pub fn build_term_u64(j: u64, cfg: &Config, policy: &MaterializationPolicy) -> Result<Term> {
    build_term(&BigUint::from(j), cfg, policy)
}

fn kernel_value(field: ScalarField, n: u64, r: u64, s: u64) -> Complex64 {
    match field {
        ScalarField::ComplexDft => dft_entry(n, r, s),
        ScalarField::RealWalsh => {
            Complex64::new(f64::from(walsh_entry(n.trailing_zeros(), r, s)), 0.0)
        }
    }
}

impl Term {
    pub fn is_zero(&self) -> bool {
        self.placement.is_none()
    }

    pub fn block(&self) -> Option<&BlockIndex> {
        self.placement.as_ref().map(|p| &p.block)
    }

    pub fn k(&self) -> Option<u32> {
        self.block().map(|b| b.k)
    }

    /// Kernel row `r = j - j_k + 1`.
    pub fn row(&self) -> Option<&BigUint> {
        self.placement.as_ref().map(|p| &p.row)
    }

    pub fn scaling_log(&self) -> Option<f64> {
        self.placement.as_ref().map(|p| p.scaling_log)
    }

    /// `log_alpha ||x_j||_p`; `-inf` for the zero term.
    pub fn norm_log(&self) -> f64 {
        self.k().map_or(f64::NEG_INFINITY, norm_log)
    }

    /// First and last coordinate of the support, `j_k` and `2 j_k - 1`.
    pub fn support(&self) -> Option<(BigUint, BigUint)> {
        self.block().map(|b| (b.start().clone(), b.end()))
    }

    pub fn is_dense(&self) -> bool {
        self.placement.as_ref().is_some_and(|p| p.dense.is_some())
    }

    /// Coefficient on `e_{j_k + s - 1}`, `s = 1..=j_k`.
    pub fn coefficient(&self, s: u64) -> Complex64 {
        let Some(p) = &self.placement else {
            return Complex64::new(0.0, 0.0);
        };
        if let Some(dense) = &p.dense {
            return dense[(s - 1) as usize];
        }
        let n = p.block.size().expect("block too large to address coefficients");
        let r = p.row.to_u64().unwrap();
        exp_alpha(p.scaling_log, f64::from(self.alpha).ln()) * kernel_value(self.field, n, r, s)
    }

    /// Coordinate `m` of `x_j`, zero off the support.
    pub fn coordinate(&self, m: &BigUint) -> Complex64 {
        let Some(p) = &self.placement else {
            return Complex64::new(0.0, 0.0);
        };
        if !p.block.contains(m) {
            return Complex64::new(0.0, 0.0);
        }
        let s = (m - p.block.start() + 1u32).to_u64().expect("coordinate out of addressable range");
        self.coefficient(s)
    }

    /// Coefficient `s` evaluated literally from its exponential form:
    /// `alpha^scaling * exp([j alpha^{k(1-k)} + alpha^{k(1-k)} - 1] 2 pi s i)`.
    /// Independent of the kernel path; complex construction only.
    pub fn display_form_coefficient(&self, s: u64) -> Complex64 {
        let Some(p) = &self.placement else {
            return Complex64::new(0.0, 0.0);
        };
        assert_eq!(self.field, ScalarField::ComplexDft, "display form is defined for the complex construction");
        let inv = 1.0 / p.block.jk.to_f64().unwrap();
        let j = self.j.to_f64().unwrap();
        let bracket = j * inv + inv - 1.0;
        let angle = bracket * 2.0 * std::f64::consts::PI * s as f64;
        let scale = exp_alpha(p.scaling_log, f64::from(self.alpha).ln());
        Complex64::from_polar(scale, angle)
    }

    /// Streams `(s, coefficient)` over the support. Fails above the policy's
    /// stream limit.
    pub fn stream<'a>(
        &'a self,
        policy: &MaterializationPolicy,
    ) -> Result<impl Iterator<Item = (u64, Complex64)> + 'a> {
        let n = match &self.placement {
            None => 0,
            Some(p) => policy.streamable_size(&p.block)? as u64,
        };
        Ok((1..=n).map(move |s| (s, self.coefficient(s))))
    }
}

/// `||x_j||_p` by accumulating `|coefficient|^p` over the support.
pub fn term_norm_direct(term: &Term, cfg: &Config, policy: &MaterializationPolicy) -> Result<f64> {
    let sum: f64 = term.stream(policy)?.map(|(_, z)| abs_pow(z, cfg.p)).sum();
    Ok(root(sum, cfg.p))
}

/// Closed-form `||x_j||_p = alpha^norm_log(k)`.
pub fn term_norm_closed(term: &Term, cfg: &Config) -> f64 {
    exp_alpha(term.norm_log(), cfg.ln_alpha())
}

/// A functional supported on one block: `phi_s` acts on coordinate
/// `j_k + s - 1`.
#[derive(Debug, Clone)]
pub struct BlockFunctional {
    pub k: u32,
    pub values: Vec<Complex64>,
}

/// `phi(x_j) = sum_m phi_m x_m`. Zero when the supports are disjoint.
pub fn apply_functional(phi: &BlockFunctional, term: &Term) -> Complex64 {
    if term.k() != Some(phi.k) {
        return Complex64::new(0.0, 0.0);
    }
    phi.values
        .iter()
        .enumerate()
        .map(|(s0, &f)| f * term.coefficient(s0 as u64 + 1))
        .sum()
}

/// Exponent `r` of the power sum `sum ||x_j||^r`, held as an exact rational.
/// Converting from `f64` goes through the shortest round-trip decimal, so
/// `1.9` means `19/10`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerExponent(BigRational);

impl PowerExponent {
    pub fn from_f64(r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 2.0) {
            return Err(Error::InvalidConfig(format!("power exponent must lie in (0, 2], got {r}")));
        }
        Self::parse_decimal(&format!("{r}"))
    }

    pub fn parse_decimal(text: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse exponent {text:?}"));
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        let digits: String = format!("{int}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| bad())?;
        let denom = BigInt::from(10u32).pow(frac.len() as u32);
        let value = BigRational::new(numer, denom);
        if !value.is_positive() || value > BigRational::from_integer(2.into()) {
            return Err(Error::InvalidConfig(format!("power exponent must lie in (0, 2], got {text}")));
        }
        Ok(PowerExponent(value))
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().unwrap()
    }

    pub fn is_two(&self) -> bool {
        self.0 == BigRational::from_integer(2.into())
    }

    /// `k(k-1)(1 - r/2 - r/k)`, exact.
    pub fn term_exponent(&self, k: u32) -> BigRational {
        let kq = BigRational::from_integer(k.into());
        let one = BigRational::one();
        let two = BigRational::from_integer(2.into());
        let kk = &kq * (&kq - &one);
        kk * (&one - &self.0 / &two - &self.0 / &kq)
    }

    /// First block with a strictly positive exponent, `floor(2r/(2-r)) + 1`;
    /// `None` when `r = 2`.
    pub fn first_growing_block(&self) -> Option<u64> {
        if self.is_two() {
            return None;
        }
        let two = BigRational::from_integer(2.into());
        let ratio = (&two * &self.0) / (&two - &self.0);
        Some(ratio.floor().to_integer().to_u64().expect("k0 out of range") + 1)
    }
}

/// `log_alpha` of block `k`'s contribution to `sum ||x_j||^r`:
/// `k(k-1)(1 - r/2 - r/k)`.
pub fn power_term_log(r: &PowerExponent, k: u32) -> f64 {
    r.term_exponent(k).to_f64().unwrap()
}

/// Blocks examined before a witness search gives up.
pub const MAX_WITNESS_BLOCKS: u32 = 10_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceWitness {
    /// First block whose contribution exceeds 1.
    pub k0: Option<u64>,
    /// Smallest `K` whose certified partial sum exceeds the threshold.
    pub block: u32,
    /// `log_alpha sum_{k <= K} alpha^power_term_log(k)`.
    pub log_partial_sum: f64,
    /// Lower bound on the same quantity after allowing for rounding.
    pub certified_log_lower: f64,
    pub log_threshold: f64,
}

/// Certified lower bound for a computed log-sum: subtract a relative
/// rounding allowance, never going below the largest single term.
fn certify_log_sum(lse: f64, max_term: f64) -> f64 {
    let slack = 1e-12 * lse.abs().max(1.0);
    (lse - slack).max(max_term)
}

/// Smallest `K` with `sum_{k <= K} ||block k||^r > threshold`, entirely in
/// log space. Requires `r < 2`.
pub fn divergence_witness(r: &PowerExponent, threshold: f64, cfg: &Config) -> Result<DivergenceWitness> {
    if r.is_two() {
        return Err(Error::InvalidConfig("the power sum converges for r = 2".into()));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {threshold}")));
    }
    let ln_alpha = cfg.ln_alpha();
    let log_threshold = threshold.ln() / ln_alpha;
    let mut lse = f64::NEG_INFINITY;
    let mut max_term = f64::NEG_INFINITY;
    for k in 1..=MAX_WITNESS_BLOCKS {
        let t = power_term_log(r, k);
        lse = log_add(lse, t, ln_alpha);
        max_term = max_term.max(t);
        let certified = certify_log_sum(lse, max_term);
        if certified > log_threshold {
            return Ok(DivergenceWitness {
                k0: r.first_growing_block(),
                block: k,
                log_partial_sum: lse,
                certified_log_lower: certified,
                log_threshold,
            });
        }
    }
    Err(Error::Budget(format!(
        "no witness within {MAX_WITNESS_BLOCKS} blocks; r is too close to 2"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRow {
    pub k: u32,
    pub term_log: f64,
    pub cumulative_log: f64,
}

/// Per-block exponents and running log-sums for `k = 1..=k_max`.
pub fn divergence_table(r: &PowerExponent, k_max: u32, cfg: &Config) -> Vec<DivergenceRow> {
    let ln_alpha = cfg.ln_alpha();
    let mut lse = f64::NEG_INFINITY;
    (1..=k_max)
        .map(|k| {
            let term_log = power_term_log(r, k);
            lse = log_add(lse, term_log, ln_alpha);
            DivergenceRow {
                k,
                term_log,
                cumulative_log: lse,
            }
        })
        .collect()
}
