//! Explicit unconditionally convergent series in `l_p` (`1 <= p <= 2`) whose
//! terms satisfy `sum ||x_j||^r = inf` for every `r < 2`, together with
//! numerical certificates for every bound the construction relies on.
//!
//! Two constructions share the same block geometry: block `k` occupies the
//! indices `j_k ..= 2 j_k - 1` with `j_k = alpha^(k(k-1))`, and every term
//! in the block is a scaled row of a unimodular `j_k x j_k` kernel
//! (complex DFT or real Walsh).
//!
//! * [`blocks`]: block arithmetic and closed-form exponents.
//! * [`kernels`]: DFT and Walsh kernels, orthogonality and Schur-type checks.
//! * [`sequence`]: the terms themselves, their norms, and divergence witnesses.
//! * [`certify`]: dual-ball sampling, per-block bounds and tail certificates.
//! * [`macphail`]: the Macphail functional `G(S)` and the upper-bound curve.
//! * [`cli`]: command-line surface and report serialization.

pub mod blocks;
pub mod certify;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod macphail;
pub mod numeric;
pub mod rng;
pub mod sequence;
pub mod transform;

pub use blocks::{BlockIndex, Config, ScalarField};
pub use error::{Error, Result};
pub use kernels::KernelMatrix;
pub use num_complex::Complex64;
