//! Block arithmetic.
//!
//! Series index `j` belongs to block `k` when `j_k <= j <= 2 j_k - 1`, where
//! `j_k = alpha^(k(k-1))`. Every other index carries the zero term.
//! Membership is always decided with exact integer comparisons; exponents
//! are carried in `log_alpha` units because `j_k` leaves the `f64` range
//! around `k = 33` for `alpha = 2` and the scaled coefficients underflow much
//! earlier.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field of the construction. The complex field uses DFT kernels,
/// the real field uses Walsh kernels (and forces `alpha = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarField {
    #[serde(alias = "complex")]
    ComplexDft,
    #[serde(alias = "real")]
    RealWalsh,
}

impl ScalarField {
    pub fn name(self) -> &'static str {
        match self {
            ScalarField::ComplexDft => "complex-dft",
            ScalarField::RealWalsh => "real-walsh",
        }
    }
}

/// Global construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub field: ScalarField,
    pub p: f64,
    /// Conjugate exponent, `f64::INFINITY` when `p == 1`.
    pub pstar: f64,
    pub alpha: u32,
    /// Relative tolerance used by all certification checks.
    pub tolerance: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

impl Config {
    pub fn new(field: ScalarField, p: f64, alpha: u32) -> Result<Self> {
        Self::with_tolerance(field, p, alpha, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(field: ScalarField, p: f64, alpha: u32, tolerance: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("p must lie in [1, 2], got {p}")));
        }
        if alpha < 2 {
            return Err(Error::InvalidConfig(format!("alpha must be an integer >= 2, got {alpha}")));
        }
        if field == ScalarField::RealWalsh && alpha != 2 {
            return Err(Error::InvalidConfig(format!(
                "the real Walsh construction requires alpha = 2, got {alpha}"
            )));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(Config {
            field,
            p,
            pstar: conjugate_exponent(p),
            alpha,
            tolerance,
        })
    }

    pub fn ln_alpha(&self) -> f64 {
        f64::from(self.alpha).ln()
    }
}

/// `p* = p / (p - 1)`, infinite at `p = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// One block of the construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    pub k: u32,
    pub alpha: u32,
    /// `alpha^(k(k-1))`, exact.
    pub jk: BigUint,
}

impl BlockIndex {
    pub fn new(k: u32, alpha: u32) -> Self {
        assert!(k >= 1, "blocks are numbered from 1");
        assert!(alpha >= 2, "alpha must be >= 2");
        BlockIndex {
            k,
            alpha,
            jk: BigUint::from(alpha).pow(jk_exponent(k)),
        }
    }

    /// First series index of the block (`j_k`).
    pub fn start(&self) -> &BigUint {
        &self.jk
    }

    /// Last series index of the block (`2 j_k - 1`).
    pub fn end(&self) -> BigUint {
        (&self.jk << 1u32) - BigUint::one()
    }

    pub fn contains(&self, j: &BigUint) -> bool {
        *j >= self.jk && *j <= self.end()
    }

    /// Kernel size as a machine integer, if it fits.
    pub fn size(&self) -> Option<u64> {
        self.jk.to_u64()
    }

    /// `log_alpha j_k = k(k-1)`.
    pub fn log_size(&self) -> u64 {
        u64::from(jk_exponent(self.k))
    }
}

/// `k(k-1)`.
pub fn jk_exponent(k: u32) -> u32 {
    k.checked_mul(k - 1).expect("block exponent overflows u32")
}

/// `alpha^(k(k-1))` when it fits in a `u128`.
fn jk_u128(k: u32, alpha: u32) -> Option<u128> {
    u128::from(alpha).checked_pow(jk_exponent(k))
}

/// Block containing `j`, by the range characterization `j_k <= j <= 2 j_k - 1`.
pub fn locate_block_range_u64(j: u64, alpha: u32) -> Option<u32> {
    assert!(j >= 1, "series indices start at 1");
    let j = u128::from(j);
    for k in 1.. {
        let jk = jk_u128(k, alpha)?;
        if jk > j {
            return None;
        }
        if j < 2 * jk {
            return Some(k);
        }
    }
    unreachable!()
}

/// Block containing `j`, by the range characterization. Exact for any `j`.
pub fn locate_block_range(j: &BigUint, cfg: &Config) -> Option<u32> {
    if let Some(small) = j.to_u64() {
        return locate_block_range_u64(small, cfg.alpha);
    }
    let alpha = BigUint::from(cfg.alpha);
    for k in 1.. {
        let jk = alpha.pow(jk_exponent(k));
        if jk > *j {
            return None;
        }
        if *j < (&jk << 1u32) {
            return Some(k);
        }
    }
    unreachable!()
}

/// `log_alpha` of a big integer. Uses the top 64 bits so it stays finite for
/// integers outside the `f64` range.
pub fn log_alpha_big(j: &BigUint, alpha: u32) -> f64 {
    let bits = j.bits();
    let ln = if bits <= 64 {
        (j.to_u64().unwrap() as f64).ln()
    } else {
        let shift = bits - 64;
        ((j >> shift).to_u64().unwrap() as f64).ln() + shift as f64 * std::f64::consts::LN_2
    };
    ln / f64::from(alpha).ln()
}

/// Endpoints `[1/2 + sqrt(1/4 + log_a((j+1)/2)), 1/2 + sqrt(1/4 + log_a j)]`
/// of the interval whose integer points define the block of `j`, in floating
/// point. The lower radicand can be negative only for `j = 0`, which is not a
/// valid index.
pub fn block_interval(j: &BigUint, alpha: u32) -> (f64, f64) {
    let log_j = log_alpha_big(j, alpha);
    let log_j1 = log_alpha_big(&(j + 1u32), alpha);
    let log_half = std::f64::consts::LN_2 / f64::from(alpha).ln();
    let lower = 0.5 + (0.25 + log_j1 - log_half).max(0.0).sqrt();
    let upper = 0.5 + (0.25 + log_j).sqrt();
    (lower, upper)
}

/// Exact membership of integer `k` in the interval of `j`, in squared and
/// exponentiated form: `alpha^(k(k-1)) <= j` and `j + 1 <= 2 alpha^(k(k-1))`.
pub fn interval_contains(j: &BigUint, k: u32, alpha: u32) -> bool {
    if k == 0 {
        return false;
    }
    let jk = BigUint::from(alpha).pow(jk_exponent(k));
    jk <= *j && (j + 1u32) <= (jk << 1u32)
}

/// Block containing `j`, via the interval characterization. Floating point
/// only proposes candidates near the interval; the decision is exact.
pub fn locate_block_interval(j: &BigUint, cfg: &Config) -> Option<u32> {
    assert!(*j >= BigUint::one(), "series indices start at 1");
    let (lower, upper) = block_interval(j, cfg.alpha);
    let first = (lower.ceil() as i64 - 1).max(1);
    let last = upper.floor() as i64 + 1;
    let mut found = None;
    for k in first..=last {
        if interval_contains(j, k as u32, cfg.alpha) {
            debug_assert!(found.is_none(), "interval holds at most one integer");
            found = Some(k as u32);
        }
    }
    found
}

/// `log_alpha` of the term scaling in block `k`:
/// `(1-k)(k(2+p) + 2p) / (2p)`.
pub fn scaling_log(k: u32, cfg: &Config) -> f64 {
    let k = f64::from(k);
    let p = cfg.p;
    (1.0 - k) * (k * (2.0 + p) + 2.0 * p) / (2.0 * p)
}

/// Same exponent written as `-k(k-1)(1/2 + 1/p + 1/k)`; kept as an
/// independent route for cross-checks.
pub fn scaling_log_factored(k: u32, cfg: &Config) -> f64 {
    let kf = f64::from(k);
    -f64::from(jk_exponent(k)) * (0.5 + 1.0 / cfg.p + 1.0 / kf)
}

/// Twice the `log_alpha` norm of every term in block `k`: `-(k-1)(k+2)`.
/// Always an integer, so the half-integer norm exponent is exact.
pub fn norm_log_twice(k: u32) -> i64 {
    let k = i64::from(k);
    -(k - 1) * (k + 2)
}

/// `log_alpha ||x_j||_p = -k(k-1)(1/2 + 1/k)` for `j` in block `k`,
/// independent of `p`.
pub fn norm_log(k: u32) -> f64 {
    norm_log_twice(k) as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64) -> Config {
        Config::new(ScalarField::ComplexDft, p, 2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(Config::new(ScalarField::ComplexDft, 0.5, 2).is_err());
        assert!(Config::new(ScalarField::ComplexDft, 2.5, 2).is_err());
        assert!(Config::new(ScalarField::ComplexDft, 1.0, 1).is_err());
        assert!(Config::new(ScalarField::RealWalsh, 1.0, 3).is_err());
        assert!(Config::new(ScalarField::ComplexDft, 1.0, 3).is_ok());
        assert!(Config::with_tolerance(ScalarField::ComplexDft, 1.0, 2, 0.0).is_err());
        let c = Config::new(ScalarField::RealWalsh, 1.0, 2).unwrap();
        assert!(c.pstar.is_infinite());
        let c = cfg(1.5);
        assert!((c.pstar - 3.0).abs() < 1e-15);
        assert_eq!(cfg(2.0).pstar, 2.0);
    }

    #[test]
    fn interval_examples() {
        let c = cfg(1.0);
        assert_eq!(locate_block_interval(&BigUint::from(1u32), &c), Some(1));
        assert_eq!(locate_block_interval(&BigUint::from(5u32), &c), Some(2));
        assert_eq!(locate_block_interval(&BigUint::from(3u32), &c), None);
    }

    #[test]
    fn range_examples() {
        assert_eq!(locate_block_range_u64(4, 2), Some(2));
        assert_eq!(locate_block_range_u64(7, 2), Some(2));
        assert_eq!(locate_block_range_u64(8, 2), None);
        assert_eq!(locate_block_range_u64(64, 2), Some(3));
        assert_eq!(locate_block_range_u64(127, 2), Some(3));
        assert_eq!(locate_block_range_u64(128, 2), None);
    }

    #[test]
    fn big_indices_stay_addressable() {
        let c = cfg(1.0);
        let b = BlockIndex::new(12, 2);
        assert_eq!(b.log_size(), 132);
        assert_eq!(locate_block_range(b.start(), &c), Some(12));
        assert_eq!(locate_block_range(&b.end(), &c), Some(12));
        assert_eq!(locate_block_range(&(b.end() + 1u32), &c), None);
        assert_eq!(locate_block_range(&(b.start() - 1u32), &c), None);
        assert_eq!(locate_block_interval(&b.end(), &c), Some(12));
        assert_eq!(locate_block_interval(&(b.end() + 1u32), &c), None);
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scaling_log(1, &cfg(1.0)), 0.0);
        assert_eq!(scaling_log(1, &cfg(1.7)), 0.0);
        assert_eq!(scaling_log(2, &cfg(1.0)), -4.0);
        assert_eq!(scaling_log_factored(2, &cfg(1.0)), -4.0);
        assert_eq!(scaling_log(3, &cfg(2.0)), -8.0);
        assert!((scaling_log_factored(3, &cfg(2.0)) + 8.0).abs() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_log(1), 0.0);
        assert_eq!(norm_log(2), -2.0);
        assert_eq!(norm_log(3), -5.0);
        assert_eq!(2f64.powf(norm_log(2)), 0.25);
        assert_eq!(2f64.powf(norm_log(3)), 1.0 / 32.0);
    }

    #[test]
    fn norm_log_is_scaling_plus_mass() {
        for &p in &[1.0, 1.25, 1.5, 1.75, 2.0] {
            let c = cfg(p);
            for k in 1..=60 {
                let lhs = norm_log(k);
                let rhs = scaling_log(k, &c) + f64::from(jk_exponent(k)) / p;
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "k={k} p={p}");
            }
        }
    }

    #[test]
    fn scaling_routes_agree() {
        for i in 0..=20 {
            let c = cfg(1.0 + f64::from(i) / 20.0);
            for k in 1..=50 {
                let a = scaling_log(k, &c);
                let b = scaling_log_factored(k, &c);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn block_ranges_are_disjoint_and_ordered() {
        for alpha in [2, 3, 5] {
            for k in 1..20 {
                let a = BlockIndex::new(k, alpha);
                let b = BlockIndex::new(k + 1, alpha);
                assert!(a.end() < *b.start());
            }
        }
    }

    #[test]
    fn log_alpha_big_matches_f64() {
        let j = BigUint::from(1u64 << 40);
        assert!((log_alpha_big(&j, 2) - 40.0).abs() < 1e-12);
        let j = BigUint::from(2u32).pow(300);
        assert!((log_alpha_big(&j, 2) - 300.0).abs() < 1e-10);
        let j = BigUint::from(3u32).pow(200);
        assert!((log_alpha_big(&j, 3) - 200.0).abs() < 1e-10);
    }
}
