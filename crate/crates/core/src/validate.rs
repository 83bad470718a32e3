//! Self-check suites run by `erw validate`.

use std::str::FromStr;

use serde_json::json;

use crate::dynamics::{reachable_counts, WalkState};
use crate::ensemble::CheckReport;
use crate::error::{Error, Result};
use crate::exact_moments::{conditional_step_mean, CountCovariance, MomentRecursion};
use crate::lattice::{MemoryParams, StepSet};
use crate::oracle::{
    exact_law, exact_moments_from_law, history_simulator_law, martingale_drift_summary, total_variation,
};
use crate::urn_algebra::{build_generators, build_spectral_basis, diagonalization_residual, predicted_eigenvalues};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Oracle,
    Spectral,
    Martingale,
    CrossEngine,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::Oracle, Scope::Spectral, Scope::Martingale, Scope::CrossEngine];
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Scope::Oracle),
            "spectral" => Ok(Scope::Spectral),
            "martingale" => Ok(Scope::Martingale),
            "cross-engine" | "cross_engine" => Ok(Scope::CrossEngine),
            _ => Err(Error::Config(format!(
                "unknown validation scope {s:?} (oracle | spectral | martingale | cross-engine)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidateOptions {
    pub scopes: Vec<Scope>,
    /// Added to one entry of `H_odd` before the spectral checks. Zero for a
    /// normal run; nonzero values must make the spectral suite fail.
    pub perturb_h: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            scopes: Scope::ALL.to_vec(),
            perturb_h: 0.0,
        }
    }
}

const GRID: [f64; 3] = [0.2, 0.5, 0.9];

fn test_lattices() -> Vec<(&'static str, StepSet)> {
    ["two_step_line", "hexagonal"]
        .into_iter()
        .map(|name| (name, StepSet::builtin(name).expect("builtin")))
        .collect()
}

fn grid_params(m: usize) -> Vec<MemoryParams> {
    let mut out = Vec::new();
    for p in GRID {
        for q in GRID {
            out.push(MemoryParams::new(p, q, m).expect("grid values are in range"));
        }
    }
    out
}

/// History-based law against the count DP for n <= 6, and law moments
/// against the recursions for n <= 8.
pub fn oracle_suite() -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (name, steps) in test_lattices() {
        let mut worst_tv = 0.0f64;
        let mut worst_moment = 0.0f64;
        for params in grid_params(steps.m()) {
            for n in 1..=6 {
                let tv = total_variation(&exact_law(n, &steps, &params)?, &history_simulator_law(n, &steps, &params)?);
                worst_tv = worst_tv.max(tv);
            }
            let mut rec = MomentRecursion::new(&steps, &params);
            for n in 1..=8 {
                let r = *rec.advance_to(n);
                let mom = exact_moments_from_law(&exact_law(n, &steps, &params)?, &steps);
                let diff = (mom.s - r.s).abs().max((mom.t - r.t).abs()).max((mom.u - r.u).abs());
                worst_moment = worst_moment.max(diff);
            }
        }
        out.push(CheckReport {
            check: format!("oracle_equivalence_{name}"),
            pass: worst_tv < 1e-12 && worst_moment < 1e-10,
            observed: json!({ "max_total_variation": worst_tv, "max_moment_difference": worst_moment }),
            expected: json!({ "max_total_variation": 0.0, "max_moment_difference": 0.0 }),
            tolerance: json!({ "max_total_variation": 1e-12, "max_moment_difference": 1e-10 }),
            diagnostics: None,
        });
    }
    Ok(out)
}

/// Diagonalization identities and eigenpair residuals `|H p_k - λ_k p_k|`
/// for the constructive basis, with `perturb` added to the generators.
pub fn spectral_suite(perturb: f64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (name, steps) in test_lattices() {
        let mut worst_diag = 0.0f64;
        let mut worst_pair = 0.0f64;
        for params in grid_params(steps.m()) {
            let gens = build_generators(&params).perturbed(perturb);
            let basis = build_spectral_basis(&params)?;
            worst_diag = worst_diag.max(diagonalization_residual(&basis, &gens, &params));
            let size = 2 * params.m();
            for (k, lambda) in predicted_eigenvalues(&params).into_iter().enumerate() {
                let col: Vec<f64> = (0..size).map(|i| basis.p[(i, k)]).collect();
                let hv = gens.h.mul_vec(&col);
                let r = hv.iter().zip(&col).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
                worst_pair = worst_pair.max(r);
            }
        }
        out.push(CheckReport {
            check: format!("spectral_{name}"),
            pass: worst_diag <= 1e-12 && worst_pair <= 1e-10,
            observed: json!({ "diagonalization_residual": worst_diag, "eigenpair_residual": worst_pair }),
            expected: json!({ "diagonalization_residual": 0.0, "eigenpair_residual": 0.0 }),
            tolerance: json!({ "diagonalization_residual": 1e-12, "eigenpair_residual": 1e-10 }),
            diagnostics: (perturb != 0.0).then(|| json!({ "perturbation": perturb })),
        });
    }
    Ok(out)
}

/// `E[ΔM_{n+1} | Y_n = y] = 0` over every reachable y, n in 2..=6.
pub fn martingale_suite() -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (name, steps) in test_lattices() {
        let mut worst = 0.0f64;
        for params in grid_params(steps.m()) {
            for n in 2..=6 {
                worst = worst.max(martingale_drift_summary(n, &steps, &params)?.0);
            }
        }
        out.push(CheckReport {
            check: format!("martingale_drift_{name}"),
            pass: worst < 1e-12,
            observed: json!(worst),
            expected: json!(0.0),
            tolerance: json!(1e-12),
            diagnostics: None,
        });
    }
    Ok(out)
}

/// Moment recursion against the count-covariance recursion (n <= 2000) and
/// the conditional-mean formula against the urn law (n <= 6).
pub fn cross_engine_suite() -> Result<Vec<CheckReport>> {
    const N: u64 = 2000;
    let mut out = Vec::new();
    for (name, steps) in test_lattices() {
        let mut worst_rel = 0.0f64;
        let mut worst_mean = 0.0f64;
        for params in grid_params(steps.m()) {
            let mut rec = MomentRecursion::new(&steps, &params);
            let mut cc = CountCovariance::new(&params);
            for n in 1..=N {
                let r = *rec.advance_to(n);
                while cc.n() < n {
                    cc.advance();
                }
                let (s, t, u) = cc.functionals(&steps);
                let scale = r.s.abs().max(r.t.abs()).max(1.0);
                let diff = (s - r.s).abs().max((t - r.t).abs()).max((u - r.u).abs());
                worst_rel = worst_rel.max(diff / scale);
            }
            for n in 1..=6 {
                for y in reachable_counts(n, steps.m()) {
                    let formula = conditional_step_mean(&y, n, &steps, &params)?;
                    let law = WalkState::from_counts(&steps, &params, &y)?.step_law(&params).mean_step(&steps);
                    let diff = formula.iter().zip(&law).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst_mean = worst_mean.max(diff);
                }
            }
        }
        out.push(CheckReport {
            check: format!("cross_engine_{name}"),
            pass: worst_rel < 1e-9 && worst_mean < 1e-12,
            observed: json!({ "moment_relative_difference": worst_rel, "conditional_mean_difference": worst_mean }),
            expected: json!({ "moment_relative_difference": 0.0, "conditional_mean_difference": 0.0 }),
            tolerance: json!({ "moment_relative_difference": 1e-9, "conditional_mean_difference": 1e-12 }),
            diagnostics: Some(json!({ "n_max": N })),
        });
    }
    Ok(out)
}

pub fn run_validation(options: &ValidateOptions) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for scope in &options.scopes {
        out.extend(match scope {
            Scope::Oracle => oracle_suite()?,
            Scope::Spectral => spectral_suite(options.perturb_h)?,
            Scope::Martingale => martingale_suite()?,
            Scope::CrossEngine => cross_engine_suite()?,
        });
    }
    Ok(out)
}
