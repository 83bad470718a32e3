//! Monte Carlo ensembles of independent walks and the statistical checks
//! built on them.
//!
//! Walk `i` draws from stream `i` of a ChaCha8 generator seeded with the
//! ensemble seed. Walks are grouped into fixed blocks of [`BLOCK_SIZE`]; each
//! block is accumulated sequentially, blocks run in parallel, and the block
//! sums are combined by a pairwise tree whose shape depends only on the
//! number of walks. Results are therefore bitwise identical for any number
//! of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{uniform, walk_rng, Checkpoints, WalkState};
use crate::error::{Error, Result};
use crate::exact_moments::{expected_position, AsymptoticPrediction};
use crate::lattice::{MemoryParams, RegimeKind, StepSet};

pub const BLOCK_SIZE: u64 = 64;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ERW_THREADS";

/// Standard errors per statistical band.
pub const SE_BAND: f64 = 4.0;

pub const CLT_REL_TOL_DIFFUSIVE: f64 = 0.05;
pub const CLT_REL_TOL_CRITICAL: f64 = 0.15;
pub const SUPERDIFFUSIVE_REL_TOL: f64 = 0.05;
pub const SLLN_TOL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub walks: u64,
    pub n_max: u64,
    pub checkpoints: Checkpoints,
    pub seed: u64,
    /// Worker threads; `None` reads `ERW_THREADS`, then falls back to the
    /// number of cores.
    pub threads: Option<usize>,
    /// Times at which every walk's position is kept individually.
    pub track: Vec<u64>,
}

impl EnsembleConfig {
    pub fn new(walks: u64, n_max: u64, seed: u64) -> Self {
        Self {
            walks,
            n_max,
            checkpoints: Checkpoints::Pow2,
            seed,
            threads: None,
            track: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.walks < 1 {
            return Err(Error::Config("an ensemble needs at least one walk".into()));
        }
        if self.n_max < 2 {
            return Err(Error::TooShort(self.n_max));
        }
        if let Some(&t) = self.track.iter().find(|&&t| t < 1 || t > self.n_max) {
            return Err(Error::Config(format!("tracked time {t} is outside 1..={}", self.n_max)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    fn thread_count(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        }
    }
}

/// Running sums for one checkpoint. `x = S_n - E[S_n]` with the exact mean.
#[derive(Clone, Debug)]
struct Acc {
    count: u64,
    x: Vec<f64>,
    xx: Vec<f64>,
    xx_sq: Vec<f64>,
    r2: f64,
    r4: f64,
    x3: Vec<f64>,
    x4: Vec<f64>,
    y: Vec<f64>,
    y2: Vec<f64>,
}

impl Acc {
    fn new(d: usize, m: usize) -> Self {
        Self {
            count: 0,
            x: vec![0.0; d],
            xx: vec![0.0; d * d],
            xx_sq: vec![0.0; d * d],
            r2: 0.0,
            r4: 0.0,
            x3: vec![0.0; d],
            x4: vec![0.0; d],
            y: vec![0.0; 2 * m],
            y2: vec![0.0; 2 * m],
        }
    }

    fn add(&mut self, state: &WalkState, center: &[f64]) {
        let d = center.len();
        self.count += 1;
        let mut r2 = 0.0;
        for a in 0..d {
            let xa = state.position()[a] - center[a];
            self.x[a] += xa;
            self.x3[a] += xa * xa * xa;
            self.x4[a] += xa * xa * xa * xa;
            r2 += xa * xa;
            for b in 0..d {
                let xb = state.position()[b] - center[b];
                let prod = xa * xb;
                self.xx[a * d + b] += prod;
                self.xx_sq[a * d + b] += prod * prod;
            }
        }
        self.r2 += r2;
        self.r4 += r2 * r2;
        for (i, &c) in state.counts().iter().enumerate() {
            let c = c as f64;
            self.y[i] += c;
            self.y2[i] += c * c;
        }
    }

    fn merge(mut self, other: &Acc) -> Acc {
        fn add(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.count += other.count;
        add(&mut self.x, &other.x);
        add(&mut self.xx, &other.xx);
        add(&mut self.xx_sq, &other.xx_sq);
        self.r2 += other.r2;
        self.r4 += other.r4;
        add(&mut self.x3, &other.x3);
        add(&mut self.x4, &other.x4);
        add(&mut self.y, &other.y);
        add(&mut self.y2, &other.y2);
        self
    }
}

/// Pairwise reduction with a shape fixed by the input length.
fn tree_reduce(mut level: Vec<Vec<Acc>>) -> Vec<Acc> {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect()),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop().unwrap_or_default()
}

/// Ensemble estimates at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub n: u64,
    pub walks: u64,
    /// Exact `E[S_n]`, used as the centre of every second moment below.
    pub exact_mean_s: Vec<f64>,
    pub mean_s: Vec<f64>,
    pub se_mean_s: Vec<f64>,
    /// `(1/N) Σ (S_n - E[S_n])(S_n - E[S_n])ᵀ`, row-major d x d.
    pub cov_s: Vec<f64>,
    pub se_cov_s: Vec<f64>,
    /// `(1/N) Σ |S_n - E[S_n]|²`.
    pub e2: f64,
    pub se_e2: f64,
    pub mean_counts: Vec<f64>,
    pub se_counts: Vec<f64>,
    /// Per-coordinate skewness and excess kurtosis of `S_n - E[S_n]`.
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
}

impl CheckpointStats {
    fn from_acc(n: u64, acc: &Acc, center: Vec<f64>) -> Self {
        let nw = acc.count as f64;
        let d = center.len();
        let mean_x: Vec<f64> = acc.x.iter().map(|s| s / nw).collect();
        let cov: Vec<f64> = acc.xx.iter().map(|s| s / nw).collect();
        let se_cov = acc
            .xx_sq
            .iter()
            .zip(&cov)
            .map(|(q, c)| ((q / nw - c * c).max(0.0) / nw).sqrt())
            .collect();
        let se_mean = (0..d)
            .map(|a| ((cov[a * d + a] - mean_x[a] * mean_x[a]).max(0.0) / nw).sqrt())
            .collect();
        let e2 = acc.r2 / nw;
        let se_e2 = ((acc.r4 / nw - e2 * e2).max(0.0) / nw).sqrt();
        let mean_counts: Vec<f64> = acc.y.iter().map(|s| s / nw).collect();
        let se_counts = acc
            .y2
            .iter()
            .zip(&mean_counts)
            .map(|(q, mu)| ((q / nw - mu * mu).max(0.0) / nw).sqrt())
            .collect();
        let skewness = (0..d)
            .map(|a| {
                let m2 = cov[a * d + a];
                (acc.x3[a] / nw) / m2.powf(1.5)
            })
            .collect();
        let excess_kurtosis = (0..d)
            .map(|a| {
                let m2 = cov[a * d + a];
                (acc.x4[a] / nw) / (m2 * m2) - 3.0
            })
            .collect();
        Self {
            n,
            walks: acc.count,
            mean_s: center.iter().zip(&mean_x).map(|(c, x)| c + x).collect(),
            exact_mean_s: center,
            se_mean_s: se_mean,
            cov_s: cov,
            se_cov_s: se_cov,
            e2,
            se_e2,
            mean_counts,
            se_counts,
            skewness,
            excess_kurtosis,
        }
    }

    pub fn dimension(&self) -> usize {
        self.mean_s.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub stats: Vec<CheckpointStats>,
    pub tracked_times: Vec<u64>,
    /// Positions at the tracked times, walk-major: walk i, time j,
    /// coordinate k at `(i * times + j) * d + k`.
    pub tracked: Vec<f64>,
}

impl EnsembleResult {
    pub fn at(&self, n: u64) -> Option<&CheckpointStats> {
        self.stats.iter().find(|s| s.n == n)
    }

    /// Position of walk `walk` at tracked time index `j`.
    pub fn tracked_position(&self, walk: usize, j: usize, d: usize) -> &[f64] {
        let base = (walk * self.tracked_times.len() + j) * d;
        &self.tracked[base..base + d]
    }
}

pub fn run_ensemble(config: &EnsembleConfig, steps: &StepSet, params: &MemoryParams) -> Result<EnsembleResult> {
    config.validate()?;
    let d = steps.dimension();
    let m = steps.m();
    let checkpoints = config.checkpoints.points(config.n_max);
    let mut tracked_times = config.track.clone();
    tracked_times.sort_unstable();
    tracked_times.dedup();
    let mut stops: Vec<u64> = checkpoints.iter().chain(&tracked_times).copied().collect();
    stops.sort_unstable();
    stops.dedup();
    let centers: Vec<Vec<f64>> = checkpoints.iter().map(|&n| expected_position(n, steps)).collect();

    let blocks = config.walks.div_ceil(BLOCK_SIZE);
    let run_block = |b: u64| -> (Vec<Acc>, Vec<f64>) {
        let first = b * BLOCK_SIZE;
        let last = (first + BLOCK_SIZE).min(config.walks);
        let mut accs = vec![Acc::new(d, m); checkpoints.len()];
        let mut tracked = Vec::with_capacity((last - first) as usize * tracked_times.len() * d);
        for walk in first..last {
            let mut rng = walk_rng(config.seed, walk);
            let mut state = WalkState::positions_only(steps);
            let (mut ci, mut ti) = (0, 0);
            for &stop in &stops {
                while state.n() < stop {
                    state.advance(steps, params, uniform(&mut rng));
                }
                if ci < checkpoints.len() && checkpoints[ci] == stop {
                    accs[ci].add(&state, &centers[ci]);
                    ci += 1;
                }
                if ti < tracked_times.len() && tracked_times[ti] == stop {
                    tracked.extend_from_slice(state.position());
                    ti += 1;
                }
            }
        }
        (accs, tracked)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.thread_count()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_block: Vec<(Vec<Acc>, Vec<f64>)> = pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());

    let mut tracked = Vec::with_capacity(config.walks as usize * tracked_times.len() * d);
    let mut levels = Vec::with_capacity(per_block.len());
    for (accs, t) in per_block {
        tracked.extend(t);
        levels.push(accs);
    }
    let totals = tree_reduce(levels);
    let stats = checkpoints
        .iter()
        .zip(&totals)
        .zip(centers)
        .map(|((&n, acc), c)| CheckpointStats::from_acc(n, acc, c))
        .collect();
    Ok(EnsembleResult {
        stats,
        tracked_times,
        tracked,
    })
}

pub fn ensemble_header(d: usize, m: usize) -> String {
    let mut cols = vec!["n".to_string()];
    cols.extend((1..=d).map(|k| format!("mean_S_{k}")));
    for a in 1..=d {
        cols.extend((1..=d).map(|b| format!("cov_S_{a}{b}")));
    }
    cols.push("e2".into());
    cols.push("se_e2".into());
    cols.extend((1..=2 * m).map(|k| format!("meanY_{k}")));
    cols.join(",")
}

pub fn write_ensemble_csv<W: Write>(mut w: W, steps: &StepSet, stats: &[CheckpointStats]) -> Result<()> {
    writeln!(w, "{}", ensemble_header(steps.dimension(), steps.m()))?;
    for s in stats {
        let mut row = vec![s.n.to_string()];
        row.extend(s.mean_s.iter().map(|x| x.to_string()));
        row.extend(s.cov_s.iter().map(|x| x.to_string()));
        row.push(s.e2.to_string());
        row.push(s.se_e2.to_string());
        row.extend(s.mean_counts.iter().map(|x| x.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Pass/fail report shared by all checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub observed: Value,
    pub expected: Value,
    pub tolerance: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Value>,
}

/// Compares the covariance of `(S_n - E[S_n]) / sqrt(scale(n))` with the
/// Gaussian limit covariance, entrywise within `max(rel_tol |Σ_ij|, 4 SE)`.
/// Skewness and excess kurtosis are reported but not judged.
pub fn clt_check(
    stats: &CheckpointStats,
    prediction: &AsymptoticPrediction,
    regime: RegimeKind,
    rel_tol: f64,
) -> Result<CheckReport> {
    if prediction.regime != regime || regime == RegimeKind::Superdiffusive {
        return Err(Error::WrongRegime {
            expected: regime,
            actual: prediction.regime,
        });
    }
    let limit = prediction.limit_cov.as_ref().ok_or(Error::WrongRegime {
        expected: regime,
        actual: prediction.regime,
    })?;
    let scale = prediction.normalization.scale(stats.n as f64);
    let observed: Vec<f64> = stats.cov_s.iter().map(|c| c / scale).collect();
    let se: Vec<f64> = stats.se_cov_s.iter().map(|c| c / scale).collect();
    let tol: Vec<f64> = limit
        .iter()
        .zip(&se)
        .map(|(l, s)| (rel_tol * l.abs()).max(SE_BAND * s))
        .collect();
    let pass = observed
        .iter()
        .zip(limit)
        .zip(&tol)
        .all(|((o, l), t)| (o - l).abs() <= *t);
    let e2_ratio = stats.e2 / (prediction.leading_constant * scale);
    Ok(CheckReport {
        check: format!("clt_{regime}"),
        pass,
        observed: json!(observed),
        expected: json!(limit),
        tolerance: json!(tol),
        diagnostics: Some(json!({
            "n": stats.n,
            "walks": stats.walks,
            "standard_errors": se,
            "e2_over_prediction": e2_ratio,
            "skewness": stats.skewness,
            "excess_kurtosis": stats.excess_kurtosis,
        })),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Tracked times needed by [`superdiffusive_check`] for a final time n.
pub fn superdiffusive_track_times(n: u64) -> Vec<u64> {
    vec![n / 4, n / 2, n]
}

/// Checks the superdiffusive limit at the final checkpoint:
/// (i) `E[S_n / n^δ]` is within 4 SE of zero; (ii) `E|S_n - E S_n|² / n^{2δ}`
/// is within `rel_tol` of `constant`; (iii) the per-walk distance between
/// normalised positions shrinks from the pair (n/4, n/2) to (n/2, n), judged
/// on the median over walks. The shrink factor is reported as a diagnostic.
pub fn superdiffusive_check(
    result: &EnsembleResult,
    steps: &StepSet,
    params: &MemoryParams,
    constant: f64,
    rel_tol: f64,
) -> Result<CheckReport> {
    let actual = params.regime().kind;
    if actual != RegimeKind::Superdiffusive {
        return Err(Error::WrongRegime {
            expected: RegimeKind::Superdiffusive,
            actual,
        });
    }
    params.require_nondegenerate()?;
    let delta = params.delta();
    let d = steps.dimension();
    let times = &result.tracked_times;
    let n = *times
        .last()
        .ok_or_else(|| Error::Config("superdiffusive check needs tracked times".into()))?;
    if times.len() < 3 || times[times.len() - 3..] != superdiffusive_track_times(n)[..] {
        return Err(Error::Config(format!("tracked times must end with {:?}", superdiffusive_track_times(n))));
    }
    let stats = result
        .at(n)
        .ok_or_else(|| Error::Config(format!("no checkpoint statistics at n = {n}")))?;
    let norm = (n as f64).powf(delta);

    let mean: Vec<f64> = stats.mean_s.iter().map(|x| x / norm).collect();
    let se_mean: Vec<f64> = stats.se_mean_s.iter().map(|x| x / norm).collect();
    let mean_ok = mean.iter().zip(&se_mean).all(|(m, s)| m.abs() <= SE_BAND * s);

    let second = stats.e2 / (norm * norm);
    let se_second = stats.se_e2 / (norm * norm);
    let second_ok = (second - constant).abs() <= rel_tol * constant;

    let walks = stats.walks as usize;
    let base = times.len() - 3;
    let scaled = |w: usize, j: usize| -> Vec<f64> {
        let t = times[base + j] as f64;
        result
            .tracked_position(w, base + j, d)
            .iter()
            .map(|x| x / t.powf(delta))
            .collect()
    };
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut early = Vec::with_capacity(walks);
    let mut late = Vec::with_capacity(walks);
    for w in 0..walks {
        let (a, b, c) = (scaled(w, 0), scaled(w, 1), scaled(w, 2));
        early.push(dist(&b, &a));
        late.push(dist(&c, &b));
    }
    let (d_early, d_late) = (median(early), median(late));
    let doubling_ok = d_late < d_early;

    Ok(CheckReport {
        check: "superdiffusive_limit".into(),
        pass: mean_ok && second_ok && doubling_ok,
        observed: json!({
            "mean_scaled": mean,
            "second_moment_scaled": second,
            "median_increment": [d_early, d_late],
        }),
        expected: json!({
            "mean_scaled": vec![0.0; d],
            "second_moment_scaled": constant,
            "median_increment": "decreasing",
        }),
        tolerance: json!({
            "mean_scaled": se_mean.iter().map(|s| SE_BAND * s).collect::<Vec<_>>(),
            "second_moment_scaled": rel_tol * constant,
        }),
        diagnostics: Some(json!({
            "n": n,
            "walks": stats.walks,
            "mean_ok": mean_ok,
            "second_moment_ok": second_ok,
            "second_moment_se": se_second,
            "increment_decreasing": doubling_ok,
            "increment_shrink_factor": d_early / d_late,
            "shrink_factor_at_least_1_5": d_early / d_late >= 1.5,
            "expected_shrink_factor": 2f64.powf(delta - 0.5),
        })),
    })
}

/// Path statistic for the almost-sure growth bound: `|S_n|` divided by
/// `sqrt(n (log n)^{1.5})` (diffusive) or `sqrt(n log n (log log n)^{1.5})`
/// (critical). `None` in the superdiffusive regime or for n < 16.
pub fn slln_path_statistic(position: &[f64], n: u64, regime: RegimeKind) -> Option<f64> {
    if n < 16 {
        return None;
    }
    let nf = n as f64;
    let r = position.iter().map(|x| x * x).sum::<f64>().sqrt();
    match regime {
        RegimeKind::Diffusive => Some(r / (nf * nf.ln().powf(1.5)).sqrt()),
        RegimeKind::Critical => Some(r / (nf * nf.ln() * nf.ln().ln().powf(1.5)).sqrt()),
        RegimeKind::Superdiffusive => None,
    }
}

/// Count frequencies of a single long walk against the uniform limit
/// `1/(2m)`. The path statistic over the last three decades is reported; its
/// monotonicity is a diagnostic only, since a single path fluctuates.
pub fn slln_check(snapshots: &[WalkState], params: &MemoryParams, tolerance: f64) -> Result<CheckReport> {
    let last = snapshots
        .last()
        .ok_or_else(|| Error::Config("slln check needs at least one snapshot".into()))?;
    let n = last.n();
    let m = params.m();
    let target = 1.0 / (2 * m) as f64;
    let freqs: Vec<f64> = last.counts().iter().map(|&c| c as f64 / n as f64).collect();
    let max_dev = freqs.iter().map(|f| (f - target).abs()).fold(0.0, f64::max);
    let regime = params.regime().kind;

    let mut path = Vec::new();
    let mut decade = 10u64;
    while decade <= n {
        if let Some(s) = snapshots.iter().find(|s| s.n() == decade) {
            if let Some(v) = slln_path_statistic(s.position(), decade, regime) {
                path.push((decade, v));
            }
        }
        decade = decade.saturating_mul(10);
    }
    let tail = &path[path.len().saturating_sub(3)..];
    let decreasing = tail.len() == 3 && tail.windows(2).all(|w| w[1].1 < w[0].1);

    Ok(CheckReport {
        check: "slln_counts".into(),
        pass: max_dev < tolerance,
        observed: json!({ "max_deviation": max_dev, "frequencies": freqs }),
        expected: json!(target),
        tolerance: json!(tolerance),
        diagnostics: Some(json!({
            "n": n,
            "regime": regime,
            "path_statistic": path.iter().map(|(t, v)| json!({"n": t, "value": v})).collect::<Vec<_>>(),
            "path_statistic_decreasing": decreasing,
        })),
    })
}

/// Decade checkpoints plus `n_max`, for [`slln_check`].
pub fn decade_checkpoints(n_max: u64) -> Checkpoints {
    let mut v: Vec<u64> = std::iter::successors(Some(10u64), |&x| x.checked_mul(10))
        .take_while(|&x| x <= n_max)
        .collect();
    v.push(n_max);
    Checkpoints::At(v)
}

/// Ensemble `e2` against the exact `s_n`, within 4 SE.
pub fn second_moment_check(stats: &CheckpointStats, exact_s: f64) -> CheckReport {
    let tol = SE_BAND * stats.se_e2;
    CheckReport {
        check: "e2_vs_exact".into(),
        pass: (stats.e2 - exact_s).abs() <= tol,
        observed: json!(stats.e2),
        expected: json!(exact_s),
        tolerance: json!(tol),
        diagnostics: Some(json!({ "n": stats.n, "walks": stats.walks })),
    }
}

/// Ensemble mean position against `E[S_n]` and mean counts against
/// `E[Y_n]`, each within 4 SE.
pub fn mean_check(stats: &CheckpointStats, expected_counts: &[f64]) -> CheckReport {
    let pos_ok = stats
        .mean_s
        .iter()
        .zip(&stats.exact_mean_s)
        .zip(&stats.se_mean_s)
        .all(|((a, b), s)| (a - b).abs() <= SE_BAND * s);
    let count_ok = stats
        .mean_counts
        .iter()
        .zip(expected_counts)
        .zip(&stats.se_counts)
        .all(|((a, b), s)| (a - b).abs() <= SE_BAND * s);
    CheckReport {
        check: "ensemble_means".into(),
        pass: pos_ok && count_ok,
        observed: json!({ "mean_s": stats.mean_s, "mean_counts": stats.mean_counts }),
        expected: json!({ "mean_s": stats.exact_mean_s, "mean_counts": expected_counts }),
        tolerance: json!({
            "mean_s": stats.se_mean_s.iter().map(|s| SE_BAND * s).collect::<Vec<_>>(),
            "mean_counts": stats.se_counts.iter().map(|s| SE_BAND * s).collect::<Vec<_>>(),
        }),
        diagnostics: Some(json!({ "n": stats.n, "walks": stats.walks })),
    }
}
