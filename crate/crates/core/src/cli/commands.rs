//! The five commands, each a pure function from configuration to report.

use std::path::Path;

use num_bigint::BigUint;
use rand::Rng;

use super::config::RunConfig;
use super::input::read_sequence;
use super::report::{Report, Table};
use crate::blocks::{jk_exponent, norm_log, scaling_log, BlockIndex, Config};
use crate::certify::{delta_threshold, estimate_block_sup, finite_subset_norm, sample_schur, tail_bound};
use crate::error::{Error, Result};
use crate::kernels::{verify_orthogonality, FlippedEntry, KernelMatrix, OrthogonalityReport, DENSE_LIMIT};
use crate::macphail::{g_auto, mu_upper_curve, CurveOptions};
use crate::numeric::{exp_alpha, fmt_f64};
use crate::rng::{derive_seed, trial_rng};
use crate::sequence::{build_term_u64, divergence_table, divergence_witness, MaterializationPolicy};

/// Per-term rows allowed in one `construct` report (all of block 5 at
/// `alpha = 2`).
pub const TERM_ROW_LIMIT: u64 = 1 << 21;
/// Coefficient rows allowed in one `construct` report.
pub const COEFFICIENT_ROW_LIMIT: u64 = 1 << 22;

const DFT_ORTHOGONALITY_SIZES: [usize; 7] = [1, 2, 4, 8, 64, 256, 4096];
const WALSH_ORTHOGONALITY_LEVELS: u32 = 12;
const SCHUR_SIZES: [usize; 3] = [4, 64, 4096];
/// Largest block sampled by `verify`.
const VERIFY_MAX_BLOCK: u32 = 4;
const SUBSETS_PER_BLOCK: u64 = 10;
const MAX_SUBSET_TERMS: usize = 64;

fn header(report: &mut Report, cfg: &RunConfig) {
    report.meta("construction", cfg.construction.name());
    report.meta("p", fmt_f64(cfg.p));
    report.meta("alpha", cfg.alpha);
}

fn flag(ok: bool) -> String {
    if ok { "true" } else { "false" }.to_string()
}

pub fn construct(run: &RunConfig, summary: bool, coefficients: bool) -> Result<Report> {
    let cfg = run.config()?;
    let ln_alpha = cfg.ln_alpha();
    let mut report = Report::new("construct");
    header(&mut report, run);
    report.meta("k_max", run.k_max);

    let mut blocks = Table::new(
        "blocks",
        &["k", "jk_log", "norm", "norm_log", "scaling", "scaling_log"],
    );
    for k in 1..=run.k_max {
        let nl = norm_log(k);
        let sl = scaling_log(k, &cfg);
        blocks.push(vec![
            k.to_string(),
            jk_exponent(k).to_string(),
            fmt_f64(exp_alpha(nl, ln_alpha)),
            fmt_f64(nl),
            fmt_f64(exp_alpha(sl, ln_alpha)),
            fmt_f64(sl),
        ]);
    }
    report.tables.push(blocks);
    if summary {
        return Ok(report);
    }

    let last = last_index(run.k_max, cfg.alpha, TERM_ROW_LIMIT).ok_or_else(|| {
        Error::Budget(format!(
            "blocks up to {} hold more than {TERM_ROW_LIMIT} terms; use --summary",
            run.k_max
        ))
    })?;
    let policy = MaterializationPolicy::default();
    let mut terms = Table::new("terms", &["j", "k", "r", "norm", "norm_log", "scaling_log"]);
    for j in 1..=last {
        let t = build_term_u64(j, &cfg, &policy)?;
        let nl = t.norm_log();
        terms.push(vec![
            j.to_string(),
            t.k().map_or(String::new(), |k| k.to_string()),
            t.row().map_or(String::new(), |r| r.to_string()),
            fmt_f64(exp_alpha(nl, ln_alpha)),
            fmt_f64(nl),
            t.scaling_log().map_or(String::new(), fmt_f64),
        ]);
    }
    report.tables.push(terms);

    if coefficients {
        report.tables.push(coefficient_table(run.k_max, &cfg)?);
    }
    Ok(report)
}

/// `2 j_{k_max} - 1` when it is at most `limit`.
fn last_index(k_max: u32, alpha: u32, limit: u64) -> Option<u64> {
    let jk = u64::from(alpha).checked_pow(jk_exponent(k_max))?;
    let last = jk.checked_mul(2)? - 1;
    (last <= limit).then_some(last)
}

fn coefficient_table(k_max: u32, cfg: &Config) -> Result<Table> {
    let policy = MaterializationPolicy::dense();
    let mut rows = 0u64;
    for k in 1..=k_max {
        let n = BlockIndex::new(k, cfg.alpha)
            .size()
            .filter(|&n| n <= DENSE_LIMIT as u64)
            .ok_or_else(|| Error::Budget(format!("block {k} is too large for a coefficient dump")))?;
        rows += n * n;
    }
    if rows > COEFFICIENT_ROW_LIMIT {
        return Err(Error::Budget(format!(
            "{rows} coefficients exceed the limit of {COEFFICIENT_ROW_LIMIT}"
        )));
    }
    let mut table = Table::new("coefficients", &["j", "s", "re", "im"]);
    for k in 1..=k_max {
        let block = BlockIndex::new(k, cfg.alpha);
        let start: u64 = block.start().try_into().unwrap();
        let n = block.size().unwrap();
        for j in start..start + n {
            let t = build_term_u64(j, cfg, &policy)?;
            for s in 1..=n {
                let z = t.coefficient(s);
                table.push(vec![j.to_string(), s.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
            }
        }
    }
    Ok(table)
}

pub fn verify(run: &RunConfig, inject_fault: bool) -> Result<Report> {
    let cfg = run.config()?;
    let tol = cfg.tolerance;
    let mut report = Report::new("verify");
    header(&mut report, run);
    report.meta("k_max", run.k_max);
    report.meta("trials", run.trials);
    report.meta("seed", run.seed);
    report.meta("tolerance", fmt_f64(tol));
    let mut failures = Table::new("failures", &["check", "detail"]);

    let mut ortho = Table::new(
        "orthogonality",
        &["kernel", "n", "method", "pairs", "max_deviation", "worst_r", "worst_t", "passed"],
    );
    let mut push_ortho = |name: &str, rep: OrthogonalityReport, failures: &mut Table| {
        let row = vec![
            name.to_string(),
            rep.n.to_string(),
            format!("{:?}", rep.method).to_lowercase(),
            rep.pairs_checked.to_string(),
            fmt_f64(rep.max_deviation),
            rep.worst_pair.0.to_string(),
            rep.worst_pair.1.to_string(),
            flag(rep.passed),
        ];
        if !rep.passed {
            failures.push(vec!["orthogonality".into(), row.join(" ")]);
        }
        ortho.push(row);
    };
    for (i, &n) in DFT_ORTHOGONALITY_SIZES.iter().enumerate() {
        let rep = verify_orthogonality(&KernelMatrix::dft(n), tol, derive_seed(run.seed, i as u64));
        push_ortho("dft", rep, &mut failures);
    }
    for m in 0..=WALSH_ORTHOGONALITY_LEVELS {
        let kernel = KernelMatrix::walsh(m);
        // the Walsh check is exact: any nonzero deviation fails
        let rep = if inject_fault && m == 3 {
            verify_orthogonality(&FlippedEntry { inner: kernel, row: 2, col: 3 }, 0.0, 0)
        } else {
            verify_orthogonality(&kernel, 0.0, 0)
        };
        push_ortho("walsh", rep, &mut failures);
    }
    report.tables.push(ortho);

    let mut schur = Table::new("schur", &["kernel", "n", "p", "trials", "observed", "bound", "passed"]);
    for (i, &n) in SCHUR_SIZES.iter().enumerate() {
        let kernels = [
            ("dft", KernelMatrix::dft(n), false),
            ("walsh", KernelMatrix::walsh(n.trailing_zeros()), true),
        ];
        for (name, kernel, real) in kernels {
            let seed = derive_seed(derive_seed(run.seed, 100 + i as u64), real as u64);
            let s = sample_schur(&kernel, cfg.p, run.trials, seed, real);
            let ok = s.within_bound(tol);
            let row = vec![
                name.to_string(),
                n.to_string(),
                fmt_f64(cfg.p),
                run.trials.to_string(),
                fmt_f64(s.observed),
                fmt_f64(s.bound),
                flag(ok),
            ];
            if !ok {
                failures.push(vec!["schur".into(), row.join(" ")]);
            }
            schur.push(row);
        }
    }
    report.tables.push(schur);

    let policy = MaterializationPolicy::default();
    let k_top = run.k_max.min(VERIFY_MAX_BLOCK);
    let mut sup = Table::new("block_sup", &["k", "trials", "observed", "bound", "passed"]);
    for k in 1..=k_top {
        let est = estimate_block_sup(k, run.trials, run.seed, &cfg, &policy)?;
        let ok = est.within_bound(tol);
        let row = vec![
            k.to_string(),
            run.trials.to_string(),
            fmt_f64(est.observed),
            fmt_f64(est.bound),
            flag(ok),
        ];
        if !ok {
            failures.push(vec!["block_sup".into(), row.join(" ")]);
        }
        sup.push(row);
    }
    report.tables.push(sup);

    let n_delta = delta_threshold(run.delta, &cfg)?;
    report.meta("delta", fmt_f64(run.delta));
    report.meta("n_delta", n_delta);
    let mut subsets = Table::new("subsets", &["k_min", "size", "norm", "bound", "passed"]);
    for k_min in 1..=k_top {
        let mut rng = trial_rng(derive_seed(run.seed, 200), u64::from(k_min));
        for _ in 0..SUBSETS_PER_BLOCK {
            let m = random_subset(&mut rng, k_min, k_top, cfg.alpha, MAX_SUBSET_TERMS);
            let result = finite_subset_norm(&m, &cfg, &policy)?;
            let bound = tail_bound(k_min, &cfg).bound;
            let mut ok = result.norm <= bound * (1.0 + tol);
            if k_min > n_delta {
                ok &= result.norm < run.delta;
            }
            let row = vec![
                k_min.to_string(),
                m.len().to_string(),
                fmt_f64(result.norm),
                fmt_f64(bound),
                flag(ok),
            ];
            if !ok {
                failures.push(vec!["subset".into(), row.join(" ")]);
            }
            subsets.push(row);
        }
    }
    report.tables.push(subsets);

    let passed = failures.rows.is_empty();
    report.meta("status", if passed { "pass" } else { "fail" });
    report.tables.push(failures);
    Ok(report)
}

/// Up to `max_terms` distinct indices from blocks `k_lo..=k_hi`, always
/// including one index from block `k_lo`.
pub fn random_subset<R: Rng>(rng: &mut R, k_lo: u32, k_hi: u32, alpha: u32, max_terms: usize) -> Vec<BigUint> {
    let size = rng.random_range(1..=max_terms);
    let mut picked = std::collections::BTreeSet::new();
    for i in 0..size {
        let k = if i == 0 { k_lo } else { rng.random_range(k_lo..=k_hi) };
        let block = BlockIndex::new(k, alpha);
        let start: u64 = block.start().try_into().expect("block start out of range");
        let n = block.size().expect("block too large");
        picked.insert(start + rng.random_range(0..n));
    }
    picked.into_iter().map(BigUint::from).collect()
}

pub fn diverge(run: &RunConfig) -> Result<Report> {
    let cfg = run.config()?;
    let r = run.exponent()?;
    let ln_alpha = cfg.ln_alpha();
    let mut report = Report::new("diverge");
    report.meta("alpha", cfg.alpha);
    report.meta("r", run.r.text());
    report.meta("k_max", run.k_max);

    let rows = divergence_table(&r, run.k_max, &cfg);
    let mut table = Table::new("terms", &["k", "term_log", "term", "cumulative_log", "cumulative"]);
    for row in &rows {
        table.push(vec![
            row.k.to_string(),
            fmt_f64(row.term_log),
            fmt_f64(exp_alpha(row.term_log, ln_alpha)),
            fmt_f64(row.cumulative_log),
            fmt_f64(exp_alpha(row.cumulative_log, ln_alpha)),
        ]);
    }

    if r.is_two() {
        // terms alpha^{-2(k-1)}: the sum is 1 / (1 - alpha^-2)
        let a2 = f64::from(cfg.alpha).powi(2);
        let limit = a2 / (a2 - 1.0);
        report.meta("k0", "none");
        report.meta("limit", fmt_f64(limit));
        let tail: Vec<String> = rows
            .iter()
            .map(|row| fmt_f64(exp_alpha(-2.0 * f64::from(row.k), ln_alpha) * a2 / (a2 - 1.0)))
            .collect();
        table.columns.push("tail_bound".into());
        for (row, t) in table.rows.iter_mut().zip(tail) {
            row.push(t);
        }
    } else {
        let w = divergence_witness(&r, run.threshold, &cfg)?;
        report.meta("k0", w.k0.map_or("none".to_string(), |k| k.to_string()));
        report.meta("threshold", fmt_f64(run.threshold));
        report.meta("log_threshold", fmt_f64(w.log_threshold));
        report.meta("witness_block", w.block);
        report.meta("witness_log_partial_sum", fmt_f64(w.log_partial_sum));
        report.meta("witness_certified_log_lower", fmt_f64(w.certified_log_lower));
    }
    report.tables.push(table);
    Ok(report)
}

pub fn macphail(run: &RunConfig, input: Option<&Path>) -> Result<Report> {
    let mut report = Report::new("macphail");
    report.meta("trials", run.trials);
    report.meta("seed", run.seed);
    if let Some(path) = input {
        let seq = read_sequence(path)?;
        let g = g_auto(&seq, run.trials, run.seed)?;
        report.meta("p", fmt_f64(crate::macphail::VectorFamily::p(&seq)));
        report.meta("vectors", crate::macphail::VectorFamily::len(&seq));
        let mut table = Table::new("g", &["value", "method", "trials", "subset"]);
        table.push(vec![
            fmt_f64(g.value),
            format!("{:?}", g.method).to_lowercase(),
            g.trials.map_or(String::new(), |t| t.to_string()),
            g.subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
        ]);
        report.tables.push(table);
        return Ok(report);
    }
    let cfg = run.config()?;
    header(&mut report, run);
    report.meta("k_max", run.k_max);
    let opts = CurveOptions {
        trials: run.trials,
        seed: run.seed,
        ..CurveOptions::default()
    };
    let rows = mu_upper_curve(run.k_max, &cfg, &opts)?;
    let mut table = Table::new(
        "curve",
        &["k", "analytic_bound", "bound_log", "method", "estimate", "trials"],
    );
    for row in rows {
        table.push(vec![
            row.k.to_string(),
            fmt_f64(row.bound),
            row.bound_log.to_string(),
            row.method.name().to_string(),
            row.estimate.map_or(String::new(), fmt_f64),
            row.trials.map_or(String::new(), |t| t.to_string()),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}
