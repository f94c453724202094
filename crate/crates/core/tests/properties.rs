use macphail_lab::blocks::{
    block_interval, interval_contains, locate_block_interval, locate_block_range, locate_block_range_u64,
    norm_log, scaling_log, scaling_log_factored,
};
use macphail_lab::certify::{finite_subset_norm, tail_bound};
use macphail_lab::kernels::{
    apply_rowwise, apply_transpose_rowwise, bilinear_form, bilinear_form_fast, dft_entry, walsh_entry, Kernel,
    KernelMatrix,
};
use macphail_lab::macphail::{block_g_bound_log, g_exact, g_random, FiniteSequence, GRandomOptions, VectorFamily};
use macphail_lab::numeric::{log_add, lp_norm};
use macphail_lab::sequence::{power_term_log, PowerExponent};
use macphail_lab::{Complex64, Config, ScalarField};
use num_bigint::BigUint;
use proptest::prelude::*;

fn cfg(alpha: u32) -> Config {
    Config::new(ScalarField::ComplexDft, 1.5, alpha).unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn sequence(max_len: usize, dim: usize) -> impl Strategy<Value = (f64, Vec<Vec<f64>>)> {
    (
        prop::sample::select(vec![1.0, 1.5, 2.0]),
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 1..=max_len),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interval_agrees_with_range(j in 1u64..=1_000_000, alpha in prop::sample::select(vec![2u32, 3, 5])) {
        let big = BigUint::from(j);
        let c = cfg(alpha);
        prop_assert_eq!(locate_block_interval(&big, &c), locate_block_range(&big, &c));
        prop_assert_eq!(locate_block_range(&big, &c), locate_block_range_u64(j, alpha));
    }

    #[test]
    fn interval_holds_at_most_one_integer(j in 1u64..=u64::MAX / 2, alpha in 2u32..=7) {
        let big = BigUint::from(j);
        let (lo, hi) = block_interval(&big, alpha);
        // log_a(j) - log_a((j+1)/2) < log_a 2 <= 1, so the width stays below one
        prop_assert!(hi - lo < 1.0);
        let members = (1..=64u32).filter(|&k| interval_contains(&big, k, alpha)).count();
        prop_assert!(members <= 1);
    }

    #[test]
    fn scaling_forms_agree(k in 1u32..=500, p in 1.0f64..=2.0) {
        let c = Config::new(ScalarField::ComplexDft, p, 2).unwrap();
        let a = scaling_log(k, &c);
        let b = scaling_log_factored(k, &c);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        // norm exponent = scaling + log_a(j_k^{1/p}) is independent of p
        let n = a + f64::from(k * (k - 1)) / p;
        prop_assert!((n - norm_log(k)).abs() <= 1e-9 * n.abs().max(1.0));
    }

    #[test]
    fn dft_rows_are_unimodular(n in 1u64..=5000, r in any::<u64>(), s in any::<u64>()) {
        prop_assert!((dft_entry(n, r % n + 1, s % n + 1).norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn walsh_entries_are_signs(m in 0u32..=16, i in any::<u64>(), j in any::<u64>()) {
        let n = 1u64 << m;
        let v = walsh_entry(m, i % n + 1, j % n + 1);
        prop_assert!(v == 1 || v == -1);
    }

    #[test]
    fn fast_products_match_rows(
        (m, dft, x, y) in (0u32..=6, any::<bool>())
            .prop_flat_map(|(m, dft)| (Just(m), Just(dft), complex_vec(1 << m), complex_vec(1 << m)))
    ) {
        let n = 1usize << m;
        let kernel = if dft { KernelMatrix::dft(n) } else { KernelMatrix::walsh(m) };
        let scale = n as f64;
        for (a, b) in kernel.apply(&x).iter().zip(apply_rowwise(&kernel, &x)) {
            prop_assert!((a - b).norm() <= 1e-11 * scale);
        }
        for (a, b) in kernel.apply_transpose(&x).iter().zip(apply_transpose_rowwise(&kernel, &x)) {
            prop_assert!((a - b).norm() <= 1e-11 * scale);
        }
        let d = bilinear_form(&kernel, &x, &y) - bilinear_form_fast(&kernel, &x, &y);
        prop_assert!(d.norm() <= 1e-10 * scale * scale);
    }

    #[test]
    fn log_add_matches_linear(a in -50.0f64..50.0, b in -50.0f64..50.0, alpha in 2u32..=9) {
        let la = f64::from(alpha).ln();
        let direct = ((a * la).exp() + (b * la).exp()).ln() / la;
        prop_assert!((log_add(a, b, la) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        prop_assert_eq!(log_add(f64::NEG_INFINITY, b, la), b);
    }

    #[test]
    fn tail_halves(n in 1u32..=900) {
        let c = Config::new(ScalarField::RealWalsh, 1.0, 2).unwrap();
        prop_assert_eq!(tail_bound(n + 1, &c).bound, tail_bound(n, &c).bound / 2.0);
    }

    #[test]
    fn g_bound_strictly_decreasing(k in 1u32..=100_000) {
        prop_assert!(block_g_bound_log(k + 1) < block_g_bound_log(k));
    }

    #[test]
    fn power_terms_at_two_are_geometric(k in 1u32..=100_000) {
        let two = PowerExponent::parse_decimal("2").unwrap();
        prop_assert_eq!(power_term_log(&two, k), -2.0 * f64::from(k - 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_is_in_unit_interval_and_scale_invariant(
        (p, rows) in sequence(8, 4),
        re in 0.1f64..10.0,
        im in -10.0f64..10.0,
    ) {
        prop_assume!(rows.iter().flatten().any(|&x| x != 0.0));
        let s = FiniteSequence::from_dense_real(p, &rows).unwrap();
        let g = g_exact(&s).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&g.value));
        let scaled = s.scaled(Complex64::new(re, im));
        let gs = g_exact(&scaled).unwrap();
        prop_assert!((g.value - gs.value).abs() <= 1e-12);
        // the attaining subset of S still attains G for c S
        let members: Vec<bool> = (1..=s.len()).map(|i| g.subset.contains(&i)).collect();
        let attained = lp_norm(&scaled.subset_sum(&members), p) / scaled.total_norm();
        prop_assert!((attained - gs.value).abs() <= 1e-12);
    }

    #[test]
    fn g_is_permutation_invariant((p, rows) in sequence(8, 3), seed in any::<u64>()) {
        prop_assume!(rows.iter().flatten().any(|&x| x != 0.0));
        let s = FiniteSequence::from_dense_real(p, &rows).unwrap();
        let mut order: Vec<usize> = (0..s.len()).collect();
        let mut x = seed;
        for i in (1..order.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (x >> 33) as usize % (i + 1));
        }
        let a = g_exact(&s).unwrap().value;
        let b = g_exact(&s.permuted(&order)).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn randomized_never_exceeds_exact((p, rows) in sequence(12, 5), trials in 0u64..50, seed in any::<u64>()) {
        prop_assume!(rows.iter().flatten().any(|&x| x != 0.0));
        let s = FiniteSequence::from_dense_real(p, &rows).unwrap();
        let exact = g_exact(&s).unwrap().value;
        let random = g_random(&s, &GRandomOptions::new(trials, seed)).unwrap().value;
        prop_assert!(random <= exact * (1.0 + 1e-12));
    }

    #[test]
    fn subset_norm_respects_tail(
        picks in prop::collection::vec((1u32..=4, any::<u64>()), 1..40),
        p in prop::sample::select(vec![1.0, 1.5, 2.0]),
        walsh in any::<bool>(),
    ) {
        let field = if walsh { ScalarField::RealWalsh } else { ScalarField::ComplexDft };
        let c = Config::new(field, p, 2).unwrap();
        let policy = macphail_lab::sequence::MaterializationPolicy::default();
        let m: Vec<BigUint> = picks
            .iter()
            .map(|&(k, r)| {
                let jk = 1u64 << (k * (k - 1));
                BigUint::from(jk + r % jk)
            })
            .collect();
        let res = finite_subset_norm(&m, &c, &policy).unwrap();
        let k_min = res.k_min.unwrap();
        prop_assert!(res.norm <= tail_bound(k_min, &c).bound * (1.0 + 1e-9));
        // disjoint supports: p-th powers add across blocks
        let total: f64 = res.block_powers.iter().map(|(_, s)| s).sum();
        prop_assert!((res.norm.powf(p) - total).abs() <= 1e-12 * total.max(1e-300));
    }
}
