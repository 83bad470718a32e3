use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use erw::dynamics::{run_walk, write_trajectory_csv, Checkpoints};
use erw::ensemble::{
    clt_check, decade_checkpoints, run_ensemble, second_moment_check, slln_check, superdiffusive_check,
    superdiffusive_track_times, write_ensemble_csv, EnsembleConfig, CLT_REL_TOL_CRITICAL, CLT_REL_TOL_DIFFUSIVE,
    SLLN_TOL, SUPERDIFFUSIVE_REL_TOL,
};
use erw::exact_moments::{
    limit_constants, limit_constants_with_tolerance, moments_at, second_moment_ratio, superdiffusive_constant,
    write_moments_csv, DEFAULT_SERIES_TOL,
};
use erw::urn_algebra::spectral_report;
use erw::validate::{run_validation, Scope, ValidateOptions};
use erw::{Error, MemoryParams, RegimeKind, StepSet};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "erw", version, about = "Elephant random walks on bipartite periodic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derived memory parameters and regime.
    Regime(ParamArgs),
    /// Spectrum of the mean generating matrix.
    Spectral(ParamArgs),
    /// Exact moment sequences as CSV.
    Moments(MomentsArgs),
    /// Simulate one walk (trajectory CSV) or an ensemble (statistics CSV).
    Simulate(SimulateArgs),
    /// Run one of the limit-theorem checks on a fresh ensemble.
    Check(CheckArgs),
    /// Run the self-check suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct LatticeArgs {
    /// Built-in lattice: hexagonal, brick_wall, distorted_hexagonal, two_step_line.
    #[arg(long, conflicts_with = "lattice_file")]
    lattice: Option<String>,
    /// JSON lattice file {"dimension": d, "odd_steps": [[...], ...]}.
    #[arg(long)]
    lattice_file: Option<PathBuf>,
}

impl LatticeArgs {
    fn load(&self) -> Result<StepSet, Error> {
        match (&self.lattice, &self.lattice_file) {
            (_, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read lattice file {}: {e}", path.display())))?;
                StepSet::from_json(&text)
            }
            (Some(name), None) => StepSet::builtin(name),
            (None, None) => StepSet::builtin("hexagonal"),
        }
    }
}

#[derive(Args)]
struct ParamArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    /// Number of odd steps; defaults to that of the lattice.
    #[arg(long)]
    m: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> Result<MemoryParams, Error> {
        let m = match self.m {
            Some(m) => m,
            None => self.lattice.load()?.m(),
        };
        MemoryParams::new(self.p, self.q, m)
    }
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    /// Walk length n_max.
    #[arg(long)]
    steps: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// pow2 | linear:k | all
    #[arg(long)]
    checkpoints: Option<String>,
}

impl WalkArgs {
    fn load(&self) -> Result<(StepSet, MemoryParams), Error> {
        let steps = self.lattice.load()?;
        let params = MemoryParams::new(self.p, self.q, steps.m())?;
        Ok((steps, params))
    }

    fn checkpoints(&self, default: Checkpoints) -> Result<Checkpoints, Error> {
        self.checkpoints.as_deref().map_or(Ok(default), str::parse)
    }
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    walk: WalkArgs,
    /// Refuse degenerate parameters and always report the asymptotic ratio.
    #[arg(long)]
    asymptotics: bool,
    /// Absolute tolerance for the superdiffusive constant.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 1)]
    walks: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Clt,
    Superdiffusive,
    Slln,
}

#[derive(Args)]
struct CheckArgs {
    kind: CheckKind,
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 10_000)]
    walks: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance overriding the per-check default.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Comma-separated suites: oracle, spectral, martingale, cross-engine.
    #[arg(long, value_delimiter = ',')]
    scope: Vec<String>,
    /// Perturbation added to the generating matrix before the spectral suite.
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_h: f64,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    CheckFailed,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NotConverged { .. } | Error::DiagonalizationCheckFailed(_) => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

fn print_json(v: &Value) {
    emit_summary(v, false);
}

/// Runs `write` against the output file, or standard output. Returns whether
/// standard output was used, in which case summaries go to standard error.
fn with_output(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<bool, Error> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write(&mut w)?;
            w.flush()?;
            Ok(false)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
            Ok(true)
        }
    }
}

/// Writes pretty JSON; a closed pipe on the reading side is not an error.
fn emit_summary(v: &Value, to_stderr: bool) {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    let _ = if to_stderr {
        writeln!(io::stderr(), "{text}")
    } else {
        writeln!(io::stdout(), "{text}")
    };
}

fn cmd_regime(args: &ParamArgs) -> Result<Outcome, Error> {
    let params = args.params()?;
    let regime = params.regime();
    print_json(&json!({
        "p": params.p(),
        "q": params.q(),
        "m": params.m(),
        "alpha": params.alpha(),
        "beta": params.beta(),
        "gamma": params.gamma(),
        "delta": params.delta(),
        "regime": regime.kind,
        "degenerate_flags": regime.flag_names(),
        "admissible": params.admissible(),
    }));
    Ok(Outcome::Ok)
}

fn cmd_spectral(args: &ParamArgs) -> Result<Outcome, Error> {
    let params = args.params()?;
    print_json(&serde_json::to_value(spectral_report(&params))?);
    Ok(Outcome::Ok)
}

fn cmd_moments(args: &MomentsArgs) -> Result<Outcome, Error> {
    let (steps, params) = args.walk.load()?;
    if args.asymptotics {
        params.require_nondegenerate()?;
    }
    let n_max = args.walk.steps;
    let checkpoints = args.walk.checkpoints(Checkpoints::All)?;
    let mut last = None;
    let to_stderr = with_output(&args.walk.out, |w| {
        last = Some(write_moments_csv(w, &steps, &params, n_max, &checkpoints)?);
        Ok(())
    })?;
    let last = last.expect("writer ran");
    let mut summary = json!({
        "n": last.n,
        "s_n": last.s,
        "t_n": last.t,
        "u_n": last.u,
        "sigma2_n": last.sigma2,
        "regime": params.regime().kind,
    });
    if !params.regime().is_degenerate() {
        let pred = limit_constants_with_tolerance(&steps, &params, args.tolerance.unwrap_or(DEFAULT_SERIES_TOL))?;
        summary["leading_constant"] = json!(pred.leading_constant);
        summary["normalization"] = serde_json::to_value(pred.normalization)?;
        summary["ratio_to_prediction"] = json!(second_moment_ratio(&last, &pred));
    }
    emit_summary(&summary, to_stderr);
    Ok(Outcome::Ok)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome, Error> {
    let (steps, params) = args.walk.load()?;
    let n_max = args.walk.steps;
    let checkpoints = args.walk.checkpoints(Checkpoints::Pow2)?;
    let exact = moments_at(n_max.max(1), &steps, &params)?;
    if args.walks == 1 {
        let snaps = run_walk(&steps, &params, n_max, args.seed, 0, &checkpoints)?;
        let to_stderr = with_output(&args.walk.out, |w| write_trajectory_csv(w, &steps, &snaps))?;
        let last = snaps.last().expect("at least one checkpoint");
        let consistent = last.check_invariants(&steps, 1e-6 * n_max as f64);
        emit_summary(
            &json!({
                "walks": 1,
                "n": last.n(),
                "seed": args.seed,
                "position": last.position(),
                "counts": last.counts(),
                "invariants_hold": consistent,
            }),
            to_stderr,
        );
        return Ok(if consistent { Outcome::Ok } else { Outcome::CheckFailed });
    }
    let mut config = EnsembleConfig::new(args.walks, n_max, args.seed);
    config.checkpoints = checkpoints;
    let result = run_ensemble(&config, &steps, &params)?;
    let to_stderr = with_output(&args.walk.out, |w| write_ensemble_csv(w, &steps, &result.stats))?;
    let last = result.stats.last().expect("at least one checkpoint");
    let consistent = result
        .stats
        .iter()
        .all(|s| (s.mean_counts.iter().sum::<f64>() - s.n as f64).abs() <= 1e-9 * s.n as f64);
    let agreement = second_moment_check(last, exact.s);
    emit_summary(
        &json!({
            "walks": args.walks,
            "n": last.n,
            "seed": args.seed,
            "e2": last.e2,
            "se_e2": last.se_e2,
            "exact_s_n": exact.s,
            "e2_within_4se_of_exact": agreement.pass,
            "mean_s": last.mean_s,
            "invariants_hold": consistent,
        }),
        to_stderr,
    );
    Ok(if consistent { Outcome::Ok } else { Outcome::CheckFailed })
}

fn cmd_check(args: &CheckArgs) -> Result<Outcome, Error> {
    let (steps, params) = args.walk.load()?;
    let n = args.walk.steps;
    let regime = params.regime().kind;
    let report = match args.kind {
        CheckKind::Clt => {
            let pred = limit_constants(&steps, &params)?;
            let mut config = EnsembleConfig::new(args.walks, n, args.seed);
            config.checkpoints = Checkpoints::At(vec![n]);
            let result = run_ensemble(&config, &steps, &params)?;
            let rel = args.tolerance.unwrap_or(match regime {
                RegimeKind::Critical => CLT_REL_TOL_CRITICAL,
                _ => CLT_REL_TOL_DIFFUSIVE,
            });
            clt_check(&result.stats[0], &pred, regime, rel)?
        }
        CheckKind::Superdiffusive => {
            if regime != RegimeKind::Superdiffusive {
                return Err(Error::WrongRegime {
                    expected: RegimeKind::Superdiffusive,
                    actual: regime,
                });
            }
            params.require_nondegenerate()?;
            let c = superdiffusive_constant(&steps, &params, DEFAULT_SERIES_TOL)?;
            let mut config = EnsembleConfig::new(args.walks, n, args.seed);
            config.checkpoints = Checkpoints::At(vec![n]);
            config.track = superdiffusive_track_times(n);
            let result = run_ensemble(&config, &steps, &params)?;
            superdiffusive_check(
                &result,
                &steps,
                &params,
                c.value,
                args.tolerance.unwrap_or(SUPERDIFFUSIVE_REL_TOL),
            )?
        }
        CheckKind::Slln => {
            let snaps = run_walk(&steps, &params, n, args.seed, 0, &decade_checkpoints(n))?;
            slln_check(&snaps, &params, args.tolerance.unwrap_or(SLLN_TOL))?
        }
    };
    print_json(&serde_json::to_value(&report)?);
    Ok(if report.pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn cmd_validate(args: &ValidateArgs) -> Result<Outcome, Error> {
    let scopes = if args.scope.is_empty() {
        Scope::ALL.to_vec()
    } else {
        args.scope.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let reports = run_validation(&ValidateOptions {
        scopes,
        perturb_h: args.perturb_h,
    })?;
    let pass = reports.iter().all(|r| r.pass);
    print_json(&json!({ "pass": pass, "checks": reports }));
    Ok(if pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Regime(a) => cmd_regime(a),
        Command::Spectral(a) => cmd_spectral(a),
        Command::Moments(a) => cmd_moments(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => cmd_check(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
