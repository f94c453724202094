//! The two unimodular kernel families.
//!
//! * DFT: `a_rs = exp(2 pi i r s / n)`, `r, s = 1..n`.
//! * Walsh: `a_ij = g_j` on the open dyadic interval `((i-1)/2^m, i/2^m)`,
//!   where `g_1 = f_0`, `g_2 = f_1`, `g_3 = f_2^(1)`, `g_4 = f_2^(2)`, ...
//!
//! Entries are generated on demand; nothing above `DENSE_LIMIT` is ever
//! stored. The row-wise sums here are the reference definitions, the
//! [`transform`](crate::transform) plans are the fast path.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transform::{level_and_position, TransformPlan};

/// Largest kernel size that may be materialized densely or checked
/// exhaustively.
pub const DENSE_LIMIT: usize = 1 << 12;

/// Largest size for which the direct `O(n^3)` DFT Gram computation is used.
const DIRECT_GRAM_LIMIT: usize = 256;

/// `exp(2 pi i r s / n)` with the phase reduced to `r s mod n`.
pub fn dft_entry(n: u64, r: u64, s: u64) -> Complex64 {
    assert!(n >= 1 && (1..=n).contains(&r) && (1..=n).contains(&s), "dft index out of range");
    let t = ((u128::from(r) * u128::from(s)) % u128::from(n)) as u64;
    unit_root(n, t)
}

/// `exp(2 pi i t / n)` for `0 <= t < n`; quarter turns are exact.
fn unit_root(n: u64, t: u64) -> Complex64 {
    let quarter = 4 * u128::from(t);
    if quarter % u128::from(n) == 0 {
        return match (quarter / u128::from(n)) as u8 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    let angle = 2.0 * PI * (t as f64) / (n as f64);
    let (sin, cos) = angle.sin_cos();
    Complex64::new(cos, sin)
}

/// Value of `g_j` on interval `i` of the `2^m` grid. Pure integer recursion:
/// `x -> 2x` maps interval `i` of the left half to interval `i` of the
/// `2^(m-1)` grid, and `x -> 2x - 1` maps interval `i` of the right half to
/// interval `i - 2^(m-1)`.
pub fn walsh_entry(m: u32, i: u64, j: u64) -> i8 {
    assert!(m < 64, "walsh grid too large");
    let n = 1u64 << m;
    assert!((1..=n).contains(&i) && (1..=n).contains(&j), "walsh index out of range");
    if j == 1 {
        return 1;
    }
    let (mut level, mut q) = level_and_position(j);
    let (mut grid, mut i) = (m, i);
    let mut sign = 1i8;
    loop {
        match level {
            1 => return if i <= 1 << (grid - 1) { sign } else { -sign },
            2 => {
                // f_2^(1): + - - + ; f_2^(2): + - + -  on the four quarters
                let quarter = (i - 1) >> (grid - 2);
                let value = match (q, quarter) {
                    (1, 0) | (1, 3) | (2, 0) | (2, 2) => 1,
                    _ => -1,
                };
                return sign * value;
            }
            _ => {
                let k = q.div_ceil(2);
                let half = 1u64 << (grid - 1);
                if i > half {
                    let negative = if q % 2 == 1 { k % 2 == 0 } else { k % 2 == 1 };
                    if negative {
                        sign = -sign;
                    }
                    i -= half;
                }
                grid -= 1;
                level -= 1;
                q = k;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Dft,
    Walsh,
}

/// Anything that exposes unimodular kernel entries. Implemented by
/// [`KernelMatrix`] and by the fault-injection wrapper [`FlippedEntry`].
pub trait Kernel: Sync {
    fn size(&self) -> usize;

    /// Entry `(r, s)`, 1-based.
    fn entry(&self, r: usize, s: usize) -> Complex64;

    /// Entry as an exact sign, for real `+-1` kernels.
    fn sign(&self, _r: usize, _s: usize) -> Option<i8> {
        None
    }

    /// `A phi`, row by row.
    fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        apply_rowwise(self, phi)
    }

    /// `A^T w`, row by row.
    fn apply_transpose(&self, w: &[Complex64]) -> Vec<Complex64> {
        apply_transpose_rowwise(self, w)
    }
}

/// `v_r = sum_s a_rs phi_s`, one row at a time.
pub fn apply_rowwise<K: Kernel + ?Sized>(kernel: &K, phi: &[Complex64]) -> Vec<Complex64> {
    let n = kernel.size();
    assert_eq!(phi.len(), n, "vector length must match kernel size");
    (1..=n)
        .map(|r| (1..=n).map(|s| kernel.entry(r, s) * phi[s - 1]).sum())
        .collect()
}

/// `u_s = sum_r a_rs w_r`, one row at a time.
pub fn apply_transpose_rowwise<K: Kernel + ?Sized>(kernel: &K, w: &[Complex64]) -> Vec<Complex64> {
    let n = kernel.size();
    assert_eq!(w.len(), n, "vector length must match kernel size");
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (r, &wr) in w.iter().enumerate() {
        if wr == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (s, o) in out.iter_mut().enumerate() {
            *o += kernel.entry(r + 1, s + 1) * wr;
        }
    }
    out
}

/// A lazily evaluated `n x n` kernel.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    kind: KernelKind,
    n: usize,
    plan: OnceLock<TransformPlan>,
}

impl KernelMatrix {
    pub fn dft(n: usize) -> Self {
        assert!(n >= 1, "kernel size must be positive");
        KernelMatrix {
            kind: KernelKind::Dft,
            n,
            plan: OnceLock::new(),
        }
    }

    /// Walsh kernel of size `2^m`.
    pub fn walsh(m: u32) -> Self {
        assert!(m <= 31, "walsh grid too large");
        KernelMatrix {
            kind: KernelKind::Walsh,
            n: 1 << m,
            plan: OnceLock::new(),
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// `log2 n` for Walsh kernels.
    pub fn walsh_level(&self) -> Option<u32> {
        (self.kind == KernelKind::Walsh).then(|| self.n.trailing_zeros())
    }

    pub fn plan(&self) -> &TransformPlan {
        self.plan.get_or_init(|| match self.kind {
            KernelKind::Dft => TransformPlan::dft(self.n),
            KernelKind::Walsh => TransformPlan::walsh(self.n.trailing_zeros()),
        })
    }

    /// Row-major dense copy; refused above [`DENSE_LIMIT`].
    pub fn materialize(&self) -> Result<Vec<Complex64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::Budget(format!(
                "refusing to materialize a {0}x{0} kernel (limit {DENSE_LIMIT})",
                self.n
            )));
        }
        let n = self.n;
        Ok((1..=n)
            .flat_map(|r| (1..=n).map(move |s| (r, s)))
            .map(|(r, s)| self.entry(r, s))
            .collect())
    }
}

impl Kernel for KernelMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn entry(&self, r: usize, s: usize) -> Complex64 {
        match self.kind {
            KernelKind::Dft => dft_entry(self.n as u64, r as u64, s as u64),
            KernelKind::Walsh => Complex64::new(f64::from(self.sign(r, s).unwrap()), 0.0),
        }
    }

    fn sign(&self, r: usize, s: usize) -> Option<i8> {
        match self.kind {
            KernelKind::Dft => None,
            KernelKind::Walsh => Some(walsh_entry(self.n.trailing_zeros(), r as u64, s as u64)),
        }
    }

    fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        self.plan().apply(phi)
    }

    fn apply_transpose(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.plan().apply_transpose(w)
    }
}

/// Test hook: a kernel with one entry negated. Used to check that the
/// orthogonality detector actually fires.
#[derive(Debug, Clone)]
pub struct FlippedEntry<K> {
    pub inner: K,
    pub row: usize,
    pub col: usize,
}

impl<K: Kernel> Kernel for FlippedEntry<K> {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn entry(&self, r: usize, s: usize) -> Complex64 {
        let e = self.inner.entry(r, s);
        if (r, s) == (self.row, self.col) {
            -e
        } else {
            e
        }
    }

    fn sign(&self, r: usize, s: usize) -> Option<i8> {
        let e = self.inner.sign(r, s)?;
        Some(if (r, s) == (self.row, self.col) { -e } else { e })
    }

    fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut v = self.inner.apply(phi);
        v[self.row - 1] -= 2.0 * self.inner.entry(self.row, self.col) * phi[self.col - 1];
        v
    }

    fn apply_transpose(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut u = self.inner.apply_transpose(w);
        u[self.col - 1] -= 2.0 * self.inner.entry(self.row, self.col) * w[self.row - 1];
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrthogonalityMethod {
    /// Every pair, every sum evaluated term by term.
    Direct,
    /// Every pair, exact integer popcount over packed sign columns.
    PackedSigns,
    /// Every pair; each Gram column obtained from one fast transform.
    Transform,
    /// Randomly sampled pairs, direct sums.
    Sampled,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    pub n: usize,
    pub method: OrthogonalityMethod,
    pub pairs_checked: u64,
    pub max_deviation: f64,
    /// Pair `(r, t)` attaining the maximum deviation.
    pub worst_pair: (usize, usize),
    pub passed: bool,
}

/// Pairs drawn when the kernel is too large for an exhaustive check.
const SAMPLED_PAIRS: u64 = 2048;

/// Checks `sum_s a_rs conj(a_ts) = n delta_rt` (rows) for complex kernels
/// and `sum_i a_ij a_ik = n delta_jk` (columns, exact integers) for sign
/// kernels. Passes when the maximum deviation is at most `tol * n`.
pub fn verify_orthogonality<K: Kernel + ?Sized>(kernel: &K, tol: f64, seed: u64) -> OrthogonalityReport {
    let n = kernel.size();
    let is_sign_kernel = kernel.sign(1, 1).is_some();
    let (method, pairs, max_deviation, worst_pair) = if is_sign_kernel && n <= DENSE_LIMIT {
        let (dev, worst) = packed_sign_gram(kernel);
        (OrthogonalityMethod::PackedSigns, pair_count(n), dev, worst)
    } else if n <= DIRECT_GRAM_LIMIT {
        let (dev, worst) = direct_gram(kernel, is_sign_kernel);
        (OrthogonalityMethod::Direct, pair_count(n), dev, worst)
    } else if n <= DENSE_LIMIT && !is_sign_kernel {
        let (dev, worst) = transform_gram(kernel);
        (OrthogonalityMethod::Transform, pair_count(n), dev, worst)
    } else {
        let (dev, worst) = sampled_gram(kernel, is_sign_kernel, seed);
        (OrthogonalityMethod::Sampled, SAMPLED_PAIRS, dev, worst)
    };
    OrthogonalityReport {
        n,
        method,
        pairs_checked: pairs,
        max_deviation,
        worst_pair,
        passed: max_deviation <= tol * n as f64,
    }
}

fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n + 1) / 2
}

fn gram_entry<K: Kernel + ?Sized>(kernel: &K, r: usize, t: usize, by_columns: bool) -> Complex64 {
    let n = kernel.size();
    if by_columns {
        (1..=n).map(|i| kernel.entry(i, r) * kernel.entry(i, t)).sum()
    } else {
        (1..=n).map(|s| kernel.entry(r, s) * kernel.entry(t, s).conj()).sum()
    }
}

fn deviation(n: usize, r: usize, t: usize, value: Complex64) -> f64 {
    let target = if r == t { n as f64 } else { 0.0 };
    (value - Complex64::new(target, 0.0)).norm()
}

fn direct_gram<K: Kernel + ?Sized>(kernel: &K, by_columns: bool) -> (f64, (usize, usize)) {
    let n = kernel.size();
    let mut worst = (0.0, (1, 1));
    for r in 1..=n {
        for t in r..=n {
            let d = deviation(n, r, t, gram_entry(kernel, r, t, by_columns));
            if d > worst.0 {
                worst = (d, (r, t));
            }
        }
    }
    worst
}

fn packed_sign_gram<K: Kernel + ?Sized>(kernel: &K) -> (f64, (usize, usize)) {
    let n = kernel.size();
    let words = n.div_ceil(64);
    // bit set <=> entry is -1; column j packed over rows i
    let columns: Vec<Vec<u64>> = (1..=n)
        .map(|j| {
            let mut col = vec![0u64; words];
            for i in 1..=n {
                if kernel.sign(i, j).expect("sign kernel") < 0 {
                    col[(i - 1) / 64] |= 1 << ((i - 1) % 64);
                }
            }
            col
        })
        .collect();
    let mut worst = (0i64, (1, 1));
    for a in 0..n {
        for b in a..n {
            let disagreements: u32 = columns[a]
                .iter()
                .zip(&columns[b])
                .map(|(x, y)| (x ^ y).count_ones())
                .sum();
            let inner = n as i64 - 2 * i64::from(disagreements);
            let target = if a == b { n as i64 } else { 0 };
            let d = (inner - target).abs();
            if d > worst.0 {
                worst = (d, (a + 1, b + 1));
            }
        }
    }
    (worst.0 as f64, worst.1)
}

fn transform_gram<K: Kernel + ?Sized>(kernel: &K) -> (f64, (usize, usize)) {
    let n = kernel.size();
    let mut worst = (0.0, (1, 1));
    for t in 1..=n {
        // column t of the Gram matrix: A conj(row t)
        let conj_row: Vec<Complex64> = (1..=n).map(|s| kernel.entry(t, s).conj()).collect();
        let col = kernel.apply(&conj_row);
        for (r0, &g) in col.iter().enumerate().take(t) {
            let d = deviation(n, r0 + 1, t, g);
            if d > worst.0 {
                worst = (d, (r0 + 1, t));
            }
        }
    }
    worst
}

fn sampled_gram<K: Kernel + ?Sized>(kernel: &K, by_columns: bool, seed: u64) -> (f64, (usize, usize)) {
    let n = kernel.size();
    let mut rng = crate::rng::trial_rng(seed, 0);
    let mut worst = (0.0, (1, 1));
    for i in 0..SAMPLED_PAIRS {
        let r = rng.random_range(1..=n);
        // every eighth pair is a diagonal one
        let t = if i % 8 == 0 { r } else { rng.random_range(1..=n) };
        let d = deviation(n, r, t, gram_entry(kernel, r, t, by_columns));
        if d > worst.0 {
            worst = (d, (r, t));
        }
    }
    worst
}

/// `sum_r |sum_s phi_s a_rs|`, streamed row by row.
pub fn dual_row_sum<K: Kernel + ?Sized>(kernel: &K, phi: &[Complex64]) -> f64 {
    let n = kernel.size();
    assert_eq!(phi.len(), n, "functional length must match kernel size");
    (1..=n)
        .map(|r| {
            (1..=n)
                .map(|s| phi[s - 1] * kernel.entry(r, s))
                .sum::<Complex64>()
                .norm()
        })
        .sum()
}

/// Same quantity as [`dual_row_sum`], through the kernel's fast product.
pub fn dual_row_sum_fast<K: Kernel + ?Sized>(kernel: &K, phi: &[Complex64]) -> f64 {
    kernel.apply(phi).iter().map(|z| z.norm()).sum()
}

/// `sum_{r,s} a_rs y1_r y2_s`, by definition.
pub fn bilinear_form<K: Kernel + ?Sized>(kernel: &K, y1: &[Complex64], y2: &[Complex64]) -> Complex64 {
    let n = kernel.size();
    assert!(y1.len() == n && y2.len() == n, "vector lengths must match kernel size");
    let mut total = Complex64::new(0.0, 0.0);
    for r in 1..=n {
        let row: Complex64 = (1..=n).map(|s| kernel.entry(r, s) * y2[s - 1]).sum();
        total += y1[r - 1] * row;
    }
    total
}

/// `y2 . (A^T y1)`, the fast route to [`bilinear_form`].
pub fn bilinear_form_fast<K: Kernel + ?Sized>(kernel: &K, y1: &[Complex64], y2: &[Complex64]) -> Complex64 {
    assert_eq!(y2.len(), kernel.size(), "vector length must match kernel size");
    kernel
        .apply_transpose(y1)
        .iter()
        .zip(y2)
        .map(|(a, b)| a * b)
        .sum()
}

/// `n^(1/2 + 1/p)`.
pub fn schur_bound(n: usize, p: f64) -> f64 {
    (n as f64).powf(0.5 + 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::sample_unit_vector;
    use crate::rng::trial_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn walsh_matrix(m: u32) -> Vec<Vec<i8>> {
        let n = 1u64 << m;
        (1..=n).map(|i| (1..=n).map(|j| walsh_entry(m, i, j)).collect()).collect()
    }

    #[test]
    fn dft_entry_examples() {
        assert_eq!(dft_entry(1, 1, 1), c(1.0, 0.0));
        assert_eq!(dft_entry(4, 1, 1), c(0.0, 1.0));
        assert_eq!(dft_entry(2, 1, 1), c(-1.0, 0.0));
        let z = dft_entry(8, 1, 1);
        assert!((z - c(0.5f64.sqrt(), 0.5f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn dft_entries_are_unimodular() {
        let n = 1u64 << 20;
        for (r, s) in [(1, 1), (n, n), (12345, 999_999), (n - 1, 3)] {
            assert!((dft_entry(n, r, s).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn walsh_small_matrices() {
        assert_eq!(walsh_matrix(0), vec![vec![1]]);
        assert_eq!(walsh_matrix(1), vec![vec![1, 1], vec![1, -1]]);
        assert_eq!(
            walsh_matrix(2),
            vec![vec![1, 1, 1, 1], vec![1, 1, -1, -1], vec![1, -1, -1, 1], vec![1, -1, 1, -1]]
        );
    }

    #[test]
    fn walsh_refinement_is_consistent() {
        // g_j depends only on which coarse interval contains the fine one
        for m in 2..=7 {
            for j in 1..=1u64 << m {
                for i in 1..=1u64 << m {
                    let e = walsh_entry(m, i, j);
                    assert_eq!(walsh_entry(m + 1, 2 * i - 1, j), e);
                    assert_eq!(walsh_entry(m + 1, 2 * i, j), e);
                }
            }
        }
    }

    #[test]
    fn orthogonality_examples() {
        let k = KernelMatrix::dft(4);
        assert!((gram_entry(&k, 1, 1, false) - c(4.0, 0.0)).norm() < 1e-15);
        assert!(gram_entry(&k, 1, 2, false).norm() < 1e-12);
        let w = walsh_matrix(2);
        let inner: i32 = (0..4).map(|i| i32::from(w[i][1]) * i32::from(w[i][2])).sum();
        assert_eq!(inner, 0);
    }

    #[test]
    fn orthogonality_reports() {
        for n in [1, 2, 4, 8, 64, 256] {
            let rep = verify_orthogonality(&KernelMatrix::dft(n), 1e-9, 1);
            assert!(rep.passed, "{rep:?}");
            assert_eq!(rep.method, OrthogonalityMethod::Direct);
        }
        for m in 0..=8 {
            let rep = verify_orthogonality(&KernelMatrix::walsh(m), 1e-9, 1);
            assert_eq!(rep.max_deviation, 0.0);
            assert_eq!(rep.method, OrthogonalityMethod::PackedSigns);
        }
    }

    #[test]
    fn flipped_sign_is_detected() {
        let faulty = FlippedEntry {
            inner: KernelMatrix::walsh(3),
            row: 2,
            col: 5,
        };
        let rep = verify_orthogonality(&faulty, 1e-9, 1);
        assert!(!rep.passed);
        assert_eq!(rep.max_deviation, 2.0);
        let faulty = FlippedEntry {
            inner: KernelMatrix::dft(8),
            row: 3,
            col: 3,
        };
        assert!(!verify_orthogonality(&faulty, 1e-9, 1).passed);
    }

    #[test]
    fn flipped_entry_fast_products_match_rowwise() {
        let faulty = FlippedEntry {
            inner: KernelMatrix::walsh(4),
            row: 7,
            col: 11,
        };
        let mut rng = trial_rng(5, 0);
        let phi = sample_unit_vector(&mut rng, 16, 2.0, false);
        let fast = faulty.apply(&phi);
        let slow = apply_rowwise(&faulty, &phi);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dual_row_sum_examples() {
        assert_eq!(dual_row_sum(&KernelMatrix::dft(1), &[c(1.0, 0.0)]), 1.0);
        let mut e1 = vec![c(0.0, 0.0); 4];
        e1[0] = c(1.0, 0.0);
        let s = dual_row_sum(&KernelMatrix::dft(4), &e1);
        assert!((s - 4.0).abs() < 1e-12);
        assert!(s <= schur_bound(4, 1.0));
        assert_eq!(dual_row_sum(&KernelMatrix::walsh(2), &e1), 4.0);
    }

    #[test]
    fn bilinear_examples() {
        let one = [c(1.0, 0.0)];
        assert_eq!(bilinear_form(&KernelMatrix::dft(1), &one, &one), c(1.0, 0.0));
        let e1 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let ones = [c(1.0, 0.0); 4];
        assert!(bilinear_form(&KernelMatrix::dft(4), &e1, &ones).norm() < 1e-15);
    }

    #[test]
    fn schur_bound_holds_on_samples_n64() {
        for &p in &[1.0, 1.5, 2.0] {
            let pstar = crate::blocks::conjugate_exponent(p);
            for kernel in [KernelMatrix::dft(64), KernelMatrix::walsh(6)] {
                let real = kernel.kind() == KernelKind::Walsh;
                for t in 0..200 {
                    let mut rng = trial_rng(11, t);
                    let y1 = sample_unit_vector(&mut rng, 64, pstar, real);
                    let y2 = sample_unit_vector(&mut rng, 64, f64::INFINITY, real);
                    let slow = bilinear_form(&kernel, &y1, &y2);
                    let fast = bilinear_form_fast(&kernel, &y1, &y2);
                    assert!((slow - fast).norm() <= 1e-9 * slow.norm().max(1.0));
                    assert!(slow.norm() <= schur_bound(64, p) * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn fast_and_rowwise_products_agree() {
        for kernel in [
            KernelMatrix::dft(1),
            KernelMatrix::dft(6),
            KernelMatrix::dft(64),
            KernelMatrix::walsh(0),
            KernelMatrix::walsh(1),
            KernelMatrix::walsh(7),
        ] {
            let n = kernel.size();
            let mut rng = trial_rng(3, n as u64);
            let phi = sample_unit_vector(&mut rng, n, 2.0, false);
            let fast = kernel.apply(&phi);
            let slow = apply_rowwise(&kernel, &phi);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-11, "{kernel:?}");
            }
            let fast_t = kernel.apply_transpose(&phi);
            let slow_t = apply_transpose_rowwise(&kernel, &phi);
            for (a, b) in fast_t.iter().zip(&slow_t) {
                assert!((a - b).norm() < 1e-11);
            }
            let d1 = dual_row_sum(&kernel, &phi);
            let d2 = dual_row_sum_fast(&kernel, &phi);
            assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
        }
    }

    #[test]
    fn dual_row_sum_is_sup_over_sign_patterns() {
        for m in 0..=3u32 {
            let kernel = KernelMatrix::walsh(m);
            let n = kernel.size();
            let mut rng = trial_rng(17, u64::from(m));
            for _ in 0..20 {
                let phi = sample_unit_vector(&mut rng, n, 3.0, true);
                let direct = dual_row_sum(&kernel, &phi);
                let brute = sign_pattern_sup(&kernel, &phi);
                assert!((direct - brute).abs() <= 1e-12 * direct.max(1.0));
            }
        }
        for n in [1usize, 2, 4, 8] {
            let kernel = KernelMatrix::dft(n);
            let mut rng = trial_rng(19, n as u64);
            for _ in 0..20 {
                let phi = sample_unit_vector(&mut rng, n, 3.0, false);
                assert!(sign_pattern_sup(&kernel, &phi) <= dual_row_sum(&kernel, &phi) * (1.0 + 1e-12));
            }
        }
    }

    fn sign_pattern_sup(kernel: &KernelMatrix, phi: &[Complex64]) -> f64 {
        let n = kernel.size();
        (0..1u32 << n)
            .map(|mask| {
                let psi: Vec<Complex64> = (0..n)
                    .map(|r| if mask >> r & 1 == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) })
                    .collect();
                bilinear_form(kernel, &psi, phi).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn materialize_respects_limit() {
        assert_eq!(KernelMatrix::dft(4).materialize().unwrap().len(), 16);
        assert!(KernelMatrix::dft(DENSE_LIMIT + 1).materialize().is_err());
    }
}
