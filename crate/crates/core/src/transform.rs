//! Fast evaluation of `A phi` and `A^T w` for both kernel families.
//!
//! The DFT kernel is symmetric, so a single unnormalized inverse FFT covers
//! both products. Every Walsh function of the level-major enumeration is a
//! character `i -> (-1)^popcount((i-1) & c_j)` of the dyadic grid, so the
//! Walsh kernel is a column permutation of the natural-order Hadamard matrix
//! and both products reduce to one in-place fast Walsh-Hadamard transform.
//! The row-wise definitions in [`crate::kernels`] remain the reference.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Character `c_j` of the Walsh function `g_j` on the `2^m` grid, for
/// `j = 1..=2^m`. Derived from the same recursion as
/// [`crate::kernels::walsh_entry`], tracking which top bits flip the sign.
pub fn walsh_character(m: u32, j: u64) -> u64 {
    assert!(m < 64 && j >= 1 && j <= 1u64 << m, "walsh index out of range");
    if j == 1 {
        return 0;
    }
    let (mut level, mut q) = level_and_position(j);
    let mut grid = m;
    let mut c = 0u64;
    loop {
        match level {
            1 => return c | 1 << (grid - 1),
            2 => {
                let top = 1u64 << (grid - 1);
                let next = 1u64 << (grid - 2);
                return c | if q == 1 { top | next } else { next };
            }
            _ => {
                let k = q.div_ceil(2);
                // right-half sign is (-1)^(k+1) for odd q and (-1)^k for even q
                let negative = if q % 2 == 1 { k % 2 == 0 } else { k % 2 == 1 };
                if negative {
                    c |= 1 << (grid - 1);
                }
                grid -= 1;
                level -= 1;
                q = k;
            }
        }
    }
}

/// Level `l` and superscript `q` of `g_j` for `j >= 2`: `g_2 = f_1` and
/// `g_j = f_l^(q)` with `j = 2^(l-1) + q`, `1 <= q <= 2^(l-1)`.
pub(crate) fn level_and_position(j: u64) -> (u32, u64) {
    debug_assert!(j >= 2);
    let level = 64 - (j - 1).leading_zeros();
    (level, j - (1u64 << (level - 1)))
}

/// In-place natural-order Walsh-Hadamard transform:
/// `out_i = sum_c (-1)^popcount(i & c) in_c`.
pub fn fwht(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fwht length must be a power of two");
    let mut h = 1;
    while h < n {
        for chunk in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Precomputed state for fast products with one kernel.
#[derive(Clone)]
pub enum TransformPlan {
    Dft { n: usize, fft: Arc<dyn Fft<f64>> },
    Walsh { m: u32, characters: Arc<Vec<u32>> },
}

impl fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformPlan::Dft { n, .. } => write!(f, "TransformPlan::Dft({n})"),
            TransformPlan::Walsh { m, .. } => write!(f, "TransformPlan::Walsh(2^{m})"),
        }
    }
}

impl TransformPlan {
    pub fn dft(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(n);
        TransformPlan::Dft { n, fft }
    }

    pub fn walsh(m: u32) -> Self {
        assert!(m <= 31, "walsh grid too large");
        let characters = (1..=1u64 << m).map(|j| walsh_character(m, j) as u32).collect();
        TransformPlan::Walsh {
            m,
            characters: Arc::new(characters),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            TransformPlan::Dft { n, .. } => *n,
            TransformPlan::Walsh { m, .. } => 1 << m,
        }
    }

    /// `v_r = sum_s a_rs phi_s`, `r, s = 1..n` (slices are 0-based).
    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(phi.len(), self.size(), "vector length must match kernel size");
        match self {
            TransformPlan::Dft { .. } => self.dft_product(phi),
            TransformPlan::Walsh { characters, .. } => {
                let mut buf = vec![Complex64::new(0.0, 0.0); phi.len()];
                for (&c, &x) in characters.iter().zip(phi) {
                    buf[c as usize] = x;
                }
                fwht(&mut buf);
                buf
            }
        }
    }

    /// `u_s = sum_r a_rs w_r`.
    pub fn apply_transpose(&self, w: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(w.len(), self.size(), "vector length must match kernel size");
        match self {
            TransformPlan::Dft { .. } => self.dft_product(w),
            TransformPlan::Walsh { characters, .. } => {
                let mut buf = w.to_vec();
                fwht(&mut buf);
                characters.iter().map(|&c| buf[c as usize]).collect()
            }
        }
    }

    fn dft_product(&self, x: &[Complex64]) -> Vec<Complex64> {
        let TransformPlan::Dft { n, fft } = self else {
            unreachable!()
        };
        let n = *n;
        // 1-based index s sits at position s mod n
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (s0, &v) in x.iter().enumerate() {
            buf[(s0 + 1) % n] = v;
        }
        fft.process(&mut buf);
        (1..=n).map(|r| buf[r % n]).collect()
    }
}
