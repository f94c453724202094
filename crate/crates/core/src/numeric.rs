//! Small numeric helpers shared across modules: `l_p` norms, base-`alpha`
//! log-sum-exp, and the fixed-width float formatting used by every export.

use num_complex::Complex64;

/// `|z|^p`, with exact fast paths for `p = 1` and `p = 2`.
#[inline]
pub fn abs_pow(z: Complex64, p: f64) -> f64 {
    if p == 1.0 {
        z.norm()
    } else if p == 2.0 {
        z.norm_sqr()
    } else {
        z.norm().powf(p)
    }
}

/// `sum |z_i|^p`.
pub fn lp_power_sum(values: &[Complex64], p: f64) -> f64 {
    values.iter().map(|&z| abs_pow(z, p)).sum()
}

/// `||v||_p` for `1 <= p < inf`, and the max-modulus norm for `p = inf`.
pub fn lp_norm(values: &[Complex64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        root(lp_power_sum(values, p), p)
    }
}

/// `s^(1/p)` with exact fast paths.
#[inline]
pub fn root(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        s
    } else if p == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / p)
    }
}

/// `log_alpha(alpha^a + alpha^b)` without leaving log space.
pub fn log_add(a: f64, b: f64, ln_alpha: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + ((lo - hi) * ln_alpha).exp().ln_1p() / ln_alpha
}

/// `alpha^x`, saturating to `0` / `inf` outside the `f64` range.
pub fn exp_alpha(x: f64, ln_alpha: f64) -> f64 {
    (x * ln_alpha).exp()
}

/// 17 significant digits, `0` for zero and `inf` for overflow. Every float
/// that reaches a report goes through here so reruns are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}
