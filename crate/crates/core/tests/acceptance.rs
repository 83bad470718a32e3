//! Acceptance suite. Runs every criterion at full size and prints one
//! PASS/FAIL line each; the process fails if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use erw::dynamics::{run_walk, uniform, walk_rng, Checkpoints, WalkState};
use erw::ensemble::{
    clt_check, decade_checkpoints, mean_check, run_ensemble, slln_check, superdiffusive_check,
    superdiffusive_track_times, EnsembleConfig, CLT_REL_TOL_CRITICAL, CLT_REL_TOL_DIFFUSIVE, SLLN_TOL,
    SUPERDIFFUSIVE_REL_TOL,
};
use erw::exact_moments::{
    expected_count_vector, limit_constants, moments_at, second_moment_ratio, superdiffusive_constant,
    DEFAULT_SERIES_TOL,
};
use erw::oracle::{exact_law, exact_moments_from_law};
use erw::urn_algebra::{build_generators, build_spectral_basis, diagonalization_residual, predicted_eigenvalues};
use erw::validate::{martingale_suite, oracle_suite};
use erw::{MemoryParams, RegimeKind, StepSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn lattice(name: &str) -> StepSet {
    StepSet::builtin(name).expect("builtin lattice")
}

fn params(p: f64, q: f64, m: usize) -> MemoryParams {
    MemoryParams::new(p, q, m).expect("valid parameters")
}

const GRID: [f64; 3] = [0.2, 0.5, 0.9];

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let reports = oracle_suite().expect("oracle suite runs");
    let secs = start.elapsed().as_secs_f64();
    let pass = reports.iter().all(|r| r.pass) && secs < 60.0;
    let detail = reports
        .iter()
        .map(|r| format!("{} {}", r.check, r.observed))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{detail}; runtime {secs:.2}s"))
}

fn closed_form_counts() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["two_step_line", "hexagonal"] {
        let steps = lattice(name);
        for p in GRID {
            for q in GRID {
                let prm = params(p, q, steps.m());
                for n in 1..=8 {
                    let law = exact_law(n, &steps, &prm).expect("oracle runs");
                    let got = exact_moments_from_law(&law, &steps).mean_counts;
                    let want = expected_count_vector(n, steps.m());
                    for (a, b) in got.iter().zip(&want) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    let oracle_ok = worst < 1e-12;

    let mut mc = Vec::new();
    for (name, p, q) in [("hexagonal", 0.9, 0.1), ("two_step_line", 0.875, 0.125)] {
        let steps = lattice(name);
        let prm = params(p, q, steps.m());
        let mut config = EnsembleConfig::new(100_000, 1000, 2024);
        config.checkpoints = Checkpoints::At(vec![1000]);
        let result = run_ensemble(&config, &steps, &prm).expect("ensemble runs");
        let report = mean_check(&result.stats[0], &expected_count_vector(1000, steps.m()));
        let z = result.stats[0]
            .mean_counts
            .iter()
            .zip(expected_count_vector(1000, steps.m()))
            .zip(&result.stats[0].se_counts)
            .map(|((a, b), s)| ((a - b) / s).abs())
            .fold(0.0, f64::max);
        mc.push((name, report.pass, z));
    }
    let pass = oracle_ok && mc.iter().all(|x| x.1);
    let detail = mc
        .iter()
        .map(|(name, ok, z)| format!("{name} MC max |z| {z:.2} ({})", if *ok { "ok" } else { "off" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("oracle max error {worst:.1e}; {detail}"))
}

fn spectral() -> Outcome {
    let mut worst_eig = 0.0f64;
    let mut worst_diag = 0.0f64;
    let mut worst_asym = 0.0f64;
    for m in 2..=6 {
        for p in [0.0, 0.2, 0.5, 0.9, 1.0] {
            for q in [0.0, 0.2, 0.5, 0.9, 1.0] {
                let prm = params(p, q, m);
                let gens = build_generators(&prm);
                let size = 2 * m;
                let h = nalgebra::DMatrix::from_row_slice(size, size, gens.h.as_slice());
                worst_asym = worst_asym.max((&h - h.transpose()).abs().max());
                let mut got: Vec<f64> = h.complex_eigenvalues().iter().map(|z| z.re).collect();
                let imag = h.complex_eigenvalues().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                let mut want = predicted_eigenvalues(&prm);
                got.sort_by(f64::total_cmp);
                want.sort_by(f64::total_cmp);
                let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(imag, f64::max);
                worst_eig = worst_eig.max(err);
                let basis = build_spectral_basis(&prm).expect("basis builds");
                worst_diag = worst_diag.max(diagonalization_residual(&basis, &gens, &prm));
            }
        }
    }
    outcome(
        worst_eig <= 1e-10 && worst_diag <= 1e-12,
        format!(
            "m in 2..=6, 25 (p,q) each: eigenvalue error {worst_eig:.1e}, diagonalization residual {worst_diag:.1e}, asymmetry {worst_asym:.1e}"
        ),
    )
}

fn diffusive_second_moment() -> Outcome {
    let start = Instant::now();
    let steps = lattice("hexagonal");
    let prm = params(0.6, 0.5, 3);
    let pred = limit_constants(&steps, &prm).expect("diffusive prediction");
    let row = moments_at(1_000_000, &steps, &prm).expect("recursion runs");
    let ratio = second_moment_ratio(&row, &pred);
    outcome(
        (0.99..=1.01).contains(&ratio) && pred.regime == RegimeKind::Diffusive,
        format!("ratio at 1e6 = {ratio:.6} (delta {:.3}); {:.2}s", prm.delta(), start.elapsed().as_secs_f64()),
    )
}

fn critical_second_moment() -> Outcome {
    let steps = lattice("hexagonal");
    let prm = params(0.9, 7.0 / 30.0, 3);
    let pred = limit_constants(&steps, &prm).expect("critical prediction");
    let early = second_moment_ratio(&moments_at(1000, &steps, &prm).expect("recursion"), &pred);
    let late = second_moment_ratio(&moments_at(1_000_000, &steps, &prm).expect("recursion"), &pred);
    outcome(
        pred.regime == RegimeKind::Critical && (0.85..=1.15).contains(&late) && (late - 1.0).abs() < (early - 1.0).abs(),
        format!("ratio at 1e3 = {early:.4}, at 1e6 = {late:.4}"),
    )
}

fn superdiffusive_constant_check() -> Outcome {
    let steps = lattice("two_step_line");
    let prm = params(0.875, 0.125, 2);
    let c = superdiffusive_constant(&steps, &prm, DEFAULT_SERIES_TOL).expect("series converges");
    let n = 1_000_000u64;
    let row = moments_at(n, &steps, &prm).expect("recursion");
    let ratio = row.s / (n as f64).powf(2.0 * prm.delta());
    let rel = (ratio - c.value).abs() / c.value;
    outcome(
        c.value > 0.0 && rel < 0.01,
        format!(
            "series C = {:.7} (bound {:.1e}, {} terms), s_n/n^(2 delta) at 1e6 = {ratio:.7}, relative gap {rel:.2e}",
            c.value, c.error_bound, c.terms
        ),
    )
}

fn gaussian_check(lattice_name: &str, p: f64, q: f64, n: u64, walks: u64, rel: f64, expect: RegimeKind) -> Outcome {
    let start = Instant::now();
    let steps = lattice(lattice_name);
    let prm = params(p, q, steps.m());
    let pred = limit_constants(&steps, &prm).expect("prediction");
    let mut config = EnsembleConfig::new(walks, n, 7);
    config.checkpoints = Checkpoints::At(vec![n]);
    let result = run_ensemble(&config, &steps, &prm).expect("ensemble runs");
    let report = clt_check(&result.stats[0], &pred, expect, rel).expect("check runs");
    outcome(
        report.pass,
        format!(
            "n {n}, N {walks}: observed {} expected {} tolerance {}; {:.1}s",
            fmt_vec(&report.observed),
            fmt_vec(&report.expected),
            fmt_vec(&report.tolerance),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn fmt_vec(v: &serde_json::Value) -> String {
    match v.as_array() {
        Some(xs) => {
            let parts: Vec<String> = xs.iter().map(|x| format!("{:.4}", x.as_f64().unwrap_or(f64::NAN))).collect();
            format!("[{}]", parts.join(", "))
        }
        None => v.to_string(),
    }
}

fn superdiffusive_limit() -> Outcome {
    let start = Instant::now();
    let steps = lattice("two_step_line");
    let prm = params(0.875, 0.125, 2);
    let c = superdiffusive_constant(&steps, &prm, DEFAULT_SERIES_TOL).expect("series converges");
    let n = 10_000u64;
    let mut config = EnsembleConfig::new(100_000, n, 11);
    config.checkpoints = Checkpoints::At(vec![n]);
    config.track = superdiffusive_track_times(n);
    let result = run_ensemble(&config, &steps, &prm).expect("ensemble runs");
    let report = superdiffusive_check(&result, &steps, &prm, c.value, SUPERDIFFUSIVE_REL_TOL).expect("check runs");
    let diag = report.diagnostics.as_ref().expect("diagnostics");
    outcome(
        report.pass,
        format!(
            "{}; shrink factor {:.3} (expected {:.3}); {:.1}s",
            report.observed,
            diag["increment_shrink_factor"].as_f64().unwrap_or(f64::NAN),
            diag["expected_shrink_factor"].as_f64().unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn slln() -> Outcome {
    let steps = lattice("hexagonal");
    let n = 10_000_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, q) in [(0.6, 0.5), (0.9, 7.0 / 30.0), (0.95, 0.2)] {
        let start = Instant::now();
        let prm = params(p, q, 3);
        let snaps = run_walk(&steps, &prm, n, 3, 0, &decade_checkpoints(n)).expect("walk runs");
        let secs = start.elapsed().as_secs_f64();
        let report = slln_check(&snaps, &prm, SLLN_TOL).expect("check runs");
        pass &= report.pass && secs < 60.0;
        parts.push(format!(
            "{} max deviation {:.2e} in {secs:.1}s",
            prm.regime().kind,
            report.observed["max_deviation"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn degenerate_determinism() -> Outcome {
    let mut violations = 0u64;
    for name in ["two_step_line", "hexagonal", "brick_wall"] {
        let steps = lattice(name);
        let m = steps.m();
        let prm = params(1.0, 1.0, m);
        for path in 0..1000 {
            let mut rng = walk_rng(42, path);
            let mut state = WalkState::positions_only(&steps);
            let first = state.advance(&steps, &prm, uniform(&mut rng));
            for k in 2..=100u64 {
                let i = state.advance(&steps, &prm, uniform(&mut rng));
                let want = if k % 2 == 1 { first } else { first + m };
                violations += u64::from(i != want);
            }
        }
    }
    let steps = lattice("two_step_line");
    let prm = params(1.0, 0.0, 2);
    let mut alternation_violations = 0u64;
    for path in 0..1000 {
        let mut rng = walk_rng(43, path);
        let mut state = WalkState::positions_only(&steps);
        let v = state.advance(&steps, &prm, uniform(&mut rng));
        let w = 1 - v;
        for k in 2..=100u64 {
            let i = state.advance(&steps, &prm, uniform(&mut rng));
            let want = if k % 2 == 1 { v } else { 2 + w };
            alternation_violations += u64::from(i != want);
        }
    }
    outcome(
        violations == 0 && alternation_violations == 0,
        format!(
            "gamma = 1: {violations} violations over 3 lattices x 1000 paths; (m=2, p=1, q=0): {alternation_violations} violations over 1000 paths"
        ),
    )
}

fn martingale_drift() -> Outcome {
    let reports = martingale_suite().expect("martingale suite runs");
    let detail = reports
        .iter()
        .map(|r| format!("{} {:.1e}", r.check, r.observed.as_f64().unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(reports.iter().all(|r| r.pass), detail)
}

fn determinism_and_throughput() -> Outcome {
    let steps = lattice("distorted_hexagonal");
    let prm = params(0.8, 0.3, 3);
    let run = |threads: usize| {
        let mut config = EnsembleConfig::new(5000, 2000, 99);
        config.threads = Some(threads);
        config.track = vec![500, 2000];
        run_ensemble(&config, &steps, &prm).expect("ensemble runs")
    };
    let start = Instant::now();
    let one = run(1);
    let secs = start.elapsed().as_secs_f64();
    let identical = [4, 16].into_iter().all(|t| {
        let other = run(t);
        let same_stats = serde_json::to_string(&one.stats).unwrap() == serde_json::to_string(&other.stats).unwrap();
        let same_bits = one.tracked.iter().zip(&other.tracked).all(|(a, b)| a.to_bits() == b.to_bits());
        same_stats && same_bits && one.tracked.len() == other.tracked.len()
    });
    let rate = 5000.0 * 2000.0 / secs;
    outcome(
        identical,
        format!("threads 1/4/16 bitwise identical: {identical}; single-thread throughput {rate:.2e} steps/s (informational)"),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("closed-form expected counts", Box::new(closed_form_counts)),
        ("spectrum and diagonalization", Box::new(spectral)),
        ("diffusive second moment", Box::new(diffusive_second_moment)),
        ("critical second moment", Box::new(critical_second_moment)),
        ("superdiffusive constant", Box::new(superdiffusive_constant_check)),
        (
            "diffusive CLT",
            Box::new(|| gaussian_check("hexagonal", 0.6, 0.5, 10_000, 100_000, CLT_REL_TOL_DIFFUSIVE, RegimeKind::Diffusive)),
        ),
        (
            "critical CLT",
            Box::new(|| {
                gaussian_check("hexagonal", 0.9, 7.0 / 30.0, 100_000, 10_000, CLT_REL_TOL_CRITICAL, RegimeKind::Critical)
            }),
        ),
        ("superdiffusive limit", Box::new(superdiffusive_limit)),
        ("strong law for counts", Box::new(slln)),
        ("degenerate determinism", Box::new(degenerate_determinism)),
        ("martingale drift", Box::new(martingale_drift)),
        ("determinism across workers", Box::new(determinism_and_throughput)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!result.pass);
        println!("[{tag}] {:>2}. {name}: {}", i + 1, result.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
