//! Exact moment sequences and asymptotic constants, computed by deterministic
//! recursions in O(n) time.
//!
//! Notation: `S̄_n = S_n - E[S_n]`, `T̄_n = T_n - E[T_n]`, and
//! `s_n = E|S̄_n|²`, `t_n = E|T̄_n|²`, `u_n = E[S̄_nᵀ T̄_n]`.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{class_base, urn_weight, Checkpoints};
use crate::error::{Error, Result};
use crate::lattice::{MemoryParams, RegimeKind, StepSet};
use crate::linalg::Matrix;
use crate::special::{ln_gamma, ln_gamma_ratio};
use crate::urn_algebra::{build_generators, GeneratorMatrices};

/// Default absolute tolerance for the superdiffusive constant.
pub const DEFAULT_SERIES_TOL: f64 = 1e-7;

/// Largest time the superdiffusive series is run to before giving up.
pub const SERIES_MAX_TERMS: u64 = 1 << 30;

/// `(a_n, b_n)` with `E[Y_n] = (a_n 1_m, b_n 1_m)`.
pub fn expected_counts(n: u64, m: usize) -> (f64, f64) {
    (n.div_ceil(2) as f64 / m as f64, (n / 2) as f64 / m as f64)
}

pub fn expected_count_vector(n: u64, m: usize) -> Vec<f64> {
    let (a, b) = expected_counts(n, m);
    let mut y = vec![a; 2 * m];
    y[m..].iter_mut().for_each(|x| *x = b);
    y
}

/// `E[S_n]`: v̄ for odd n, zero for even n.
pub fn expected_position(n: u64, steps: &StepSet) -> Vec<f64> {
    if n % 2 == 1 {
        steps.mean_odd_step().to_vec()
    } else {
        vec![0.0; steps.dimension()]
    }
}

/// Accumulates `Σ_i |v_i|² π_i - |Σ_i v_i π_i|²` where π is the mean law
/// of step `n`; `buf` has length d.
fn step_variance_with(n: u64, steps: &StepSet, params: &MemoryParams, buf: &mut [f64]) -> f64 {
    let m = steps.m();
    buf.iter_mut().for_each(|x| *x = 0.0);
    let mut second = 0.0;
    let mut add = |i: usize, p: f64, buf: &mut [f64]| {
        let v = steps.step(i);
        second += p * v.iter().map(|x| x * x).sum::<f64>();
        for (b, x) in buf.iter_mut().zip(v) {
            *b += p * x;
        }
    };
    if n == 1 {
        for i in 0..m {
            add(i, 1.0 / m as f64, buf);
        }
    } else {
        let prev = n - 1;
        let (a, b) = expected_counts(prev, m);
        let mf = m as f64;
        let inv = 1.0 / prev as f64;
        let (alpha, beta) = (params.alpha(), params.beta());
        if prev % 2 == 0 {
            let base = class_base(params, a * mf, b * mf);
            for i in 0..m {
                add(i, urn_weight(alpha, beta, a, b, base, inv), buf);
            }
        } else {
            let base = class_base(params, b * mf, a * mf);
            for i in 0..m {
                add(m + i, urn_weight(alpha, beta, b, a, base, inv), buf);
            }
        }
    }
    second - buf.iter().map(|x| x * x).sum::<f64>()
}

/// σ²_n = E|X_n - E[X_n]|² for `n >= 1`.
pub fn step_variance(n: u64, steps: &StepSet, params: &MemoryParams) -> f64 {
    assert!(n >= 1, "step_variance needs n >= 1");
    let mut buf = vec![0.0; steps.dimension()];
    step_variance_with(n, steps, params, &mut buf)
}

/// One row of the moment trace. The scaling sequences are `None` before
/// their starting index (η from 3, ζ and τ from 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: u64,
    pub sigma2: f64,
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub eta: Option<f64>,
    pub zeta: Option<f64>,
    pub tau: Option<f64>,
}

/// Streaming evaluation of the second-moment recursion together with the
/// scaling sequences η, ζ, τ. Constant memory.
#[derive(Clone, Debug)]
pub struct MomentRecursion<'a> {
    steps: &'a StepSet,
    params: MemoryParams,
    row: MomentRow,
    buf: Vec<f64>,
}

impl<'a> MomentRecursion<'a> {
    /// Starts at n = 1 with `s_1 = t_1 = u_1 = σ²_1`.
    pub fn new(steps: &'a StepSet, params: &MemoryParams) -> Self {
        let mut buf = vec![0.0; steps.dimension()];
        let sigma2 = step_variance_with(1, steps, params, &mut buf);
        Self {
            steps,
            params: *params,
            row: MomentRow {
                n: 1,
                sigma2,
                s: sigma2,
                t: sigma2,
                u: sigma2,
                eta: None,
                zeta: None,
                tau: None,
            },
            buf,
        }
    }

    pub fn current(&self) -> &MomentRow {
        &self.row
    }

    /// Moves from n to n + 1.
    pub fn advance(&mut self) {
        let r = self.row;
        let n = r.n;
        let nf = n as f64;
        let (gamma, delta) = (self.params.gamma(), self.params.delta());
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let sigma2 = step_variance_with(n + 1, self.steps, &self.params, &mut self.buf);
        let s = (1.0 + 2.0 * delta / nf) * r.s + 2.0 * gamma / nf * sign * r.u + sigma2;
        let t = (1.0 + 2.0 * gamma / nf) * r.t + 2.0 * delta / nf * sign * r.u + sigma2;
        let u = (1.0 + (delta + gamma) / nf) * r.u + sign / nf * (delta * r.s + gamma * r.t) + sign * sigma2;
        let zeta = match r.zeta {
            None if n + 1 == 2 => Some(1.0),
            None => None,
            Some(z) => Some((1.0 + delta / nf) * z),
        };
        let eta = match r.eta {
            None if n + 1 == 3 => Some(1.0),
            None => None,
            Some(e) => Some((1.0 + 2.0 * delta / nf) * e),
        };
        let tau = match (r.tau, zeta) {
            (None, Some(_)) => Some(0.0),
            (Some(acc), Some(z)) => Some(acc + 1.0 / (z * z)),
            _ => None,
        };
        self.row = MomentRow {
            n: n + 1,
            sigma2,
            s,
            t,
            u,
            eta,
            zeta,
            tau,
        };
    }

    /// Advances until `n == target` (no-op if already there or past).
    pub fn advance_to(&mut self, target: u64) -> &MomentRow {
        while self.row.n < target {
            self.advance();
        }
        &self.row
    }
}

/// Full moment trace for `n = 1..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTrace {
    pub rows: Vec<MomentRow>,
}

impl MomentTrace {
    /// Row for time `n` (1-based).
    pub fn at(&self, n: u64) -> Option<&MomentRow> {
        n.checked_sub(1).and_then(|i| self.rows.get(i as usize))
    }

    pub fn last(&self) -> &MomentRow {
        self.rows.last().expect("trace is never empty")
    }
}

fn check_n_max(n_max: u64) -> Result<()> {
    if n_max < 1 {
        return Err(Error::OutOfRange {
            name: "n_max",
            value: n_max as f64,
            expected: "n_max >= 1",
        });
    }
    Ok(())
}

pub fn second_moment_recursion(n_max: u64, steps: &StepSet, params: &MemoryParams) -> Result<MomentTrace> {
    check_n_max(n_max)?;
    let mut rec = MomentRecursion::new(steps, params);
    let mut rows = Vec::with_capacity(n_max as usize);
    rows.push(*rec.current());
    while rec.current().n < n_max {
        rec.advance();
        rows.push(*rec.current());
    }
    Ok(MomentTrace { rows })
}

/// The moment row at a single time, without storing the trace.
pub fn moments_at(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<MomentRow> {
    check_n_max(n)?;
    Ok(*MomentRecursion::new(steps, params).advance_to(n))
}

pub const MOMENTS_HEADER: &str = "n,sigma2_n,s_n,t_n,u_n,eta_n,zeta_n,tau_n";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Streams the moment trace at the checkpoint times to `w`. Returns the last
/// row.
pub fn write_moments_csv<W: Write>(
    mut w: W,
    steps: &StepSet,
    params: &MemoryParams,
    n_max: u64,
    checkpoints: &Checkpoints,
) -> Result<MomentRow> {
    check_n_max(n_max)?;
    writeln!(w, "{MOMENTS_HEADER}")?;
    let mut rec = MomentRecursion::new(steps, params);
    for t in checkpoints.points(n_max) {
        let r = rec.advance_to(t);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.sigma2,
            r.s,
            r.t,
            r.u,
            opt(r.eta),
            opt(r.zeta),
            opt(r.tau)
        )?;
    }
    Ok(*rec.current())
}

/// Exact covariance of the count vector, `E[Ȳ_n Ȳ_nᵀ]`, updated in place.
#[derive(Clone, Debug)]
pub struct CountCovariance {
    n: u64,
    m: usize,
    gens: GeneratorMatrices,
    cov: Matrix,
}

impl CountCovariance {
    pub fn new(params: &MemoryParams) -> Self {
        let m = params.m();
        let mut cov = Matrix::zeros(2 * m, 2 * m);
        let p = 1.0 / m as f64;
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] = if i == j { p - p * p } else { -p * p };
            }
        }
        Self {
            n: 1,
            m,
            gens: build_generators(params),
            cov,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.cov
    }

    pub fn advance(&mut self) {
        let n = self.n;
        let nf = n as f64;
        let size = 2 * self.m;
        let h = self.gens.at_time(n + 1);
        let ey = expected_count_vector(n, self.m);
        let pi: Vec<f64> = h.mul_vec(&ey).iter().map(|x| x / nf).collect();
        let mut second = self.cov.clone();
        for i in 0..size {
            for j in 0..size {
                second[(i, j)] += ey[i] * ey[j];
            }
        }
        let k = Matrix::identity(size).add(&h.scale(1.0 / nf));
        let kt = k.transpose();
        let ht = h.transpose();
        let propagated = k.matmul(&self.cov).matmul(&kt);
        let noise_mean = h.matmul(&second).matmul(&ht).scale(1.0 / (nf * nf));
        let mut next = propagated;
        for i in 0..size {
            next[(i, i)] += pi[i];
            for j in 0..size {
                next[(i, j)] -= noise_mean[(i, j)];
            }
        }
        self.cov = next;
        self.n = n + 1;
    }

    /// `(s_n, t_n, u_n)` as quadratic functionals of the covariance.
    pub fn functionals(&self, steps: &StepSet) -> (f64, f64, f64) {
        let size = 2 * self.m;
        let (mut s, mut t, mut u) = (0.0, 0.0, 0.0);
        for i in 0..size {
            let di = if i < self.m { 1.0 } else { -1.0 };
            for j in 0..size {
                let dj = if j < self.m { 1.0 } else { -1.0 };
                let gram: f64 = steps.step(i).iter().zip(steps.step(j)).map(|(a, b)| a * b).sum();
                let c = self.cov[(i, j)] * gram;
                s += c;
                t += di * dj * c;
                u += dj * c;
            }
        }
        (s, t, u)
    }
}

/// Count covariance matrices for `n = 1..=n_max`.
pub fn count_covariance_recursion(n_max: u64, params: &MemoryParams) -> Result<Vec<Matrix>> {
    check_n_max(n_max)?;
    let mut cc = CountCovariance::new(params);
    let mut out = vec![cc.matrix().clone()];
    while cc.n() < n_max {
        cc.advance();
        out.push(cc.matrix().clone());
    }
    Ok(out)
}

/// η, ζ and τ for `n <= n_max`, indexed by n.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSequences {
    eta: Vec<f64>,
    zeta: Vec<f64>,
    tau: Vec<f64>,
}

impl ScalingSequences {
    /// η_n for n >= 3.
    pub fn eta(&self, n: u64) -> Option<f64> {
        (n >= 3).then(|| self.eta.get(n as usize).copied()).flatten()
    }
    /// ζ_n for n >= 2.
    pub fn zeta(&self, n: u64) -> Option<f64> {
        (n >= 2).then(|| self.zeta.get(n as usize).copied()).flatten()
    }
    /// τ_n for n >= 2 (τ_2 = 0).
    pub fn tau(&self, n: u64) -> Option<f64> {
        (n >= 2).then(|| self.tau.get(n as usize).copied()).flatten()
    }
}

pub fn scaling_sequences(n_max: u64, params: &MemoryParams) -> Result<ScalingSequences> {
    if n_max < 3 {
        return Err(Error::OutOfRange {
            name: "n_max",
            value: n_max as f64,
            expected: "n_max >= 3",
        });
    }
    let delta = params.delta();
    let len = n_max as usize + 1;
    let mut eta = vec![f64::NAN; len];
    let mut zeta = vec![f64::NAN; len];
    let mut tau = vec![f64::NAN; len];
    zeta[2] = 1.0;
    tau[2] = 0.0;
    eta[3] = 1.0;
    for n in 2..n_max as usize {
        let nf = n as f64;
        zeta[n + 1] = (1.0 + delta / nf) * zeta[n];
        tau[n + 1] = tau[n] + 1.0 / (zeta[n + 1] * zeta[n + 1]);
        if n >= 3 {
            eta[n + 1] = (1.0 + 2.0 * delta / nf) * eta[n];
        }
    }
    Ok(ScalingSequences { eta, zeta, tau })
}

/// η_n = Γ(n+2δ)Γ(3) / (Γ(3+2δ)Γ(n)).
pub fn eta_closed(n: u64, delta: f64) -> f64 {
    (ln_gamma_ratio(n as f64, 2.0 * delta) + 2f64.ln() - ln_gamma(3.0 + 2.0 * delta)).exp()
}

/// ζ_n = Γ(n+δ)Γ(2) / (Γ(n)Γ(2+δ)).
pub fn zeta_closed(n: u64, delta: f64) -> f64 {
    (ln_gamma_ratio(n as f64, delta) - ln_gamma(2.0 + delta)).exp()
}

/// Leading-order growth of τ_n for δ < 1/2: Γ(2+δ)² n^{1-2δ} / (1-2δ).
pub fn tau_asymptotic(n: u64, delta: f64) -> f64 {
    let g = ln_gamma(2.0 + delta).exp();
    g * g * (n as f64).powf(1.0 - 2.0 * delta) / (1.0 - 2.0 * delta)
}

/// How `s_n` grows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Normalization {
    /// `s_n ~ c n`
    Linear,
    /// `s_n ~ c n log n`
    NLogN,
    /// `s_n ~ c n^exponent`
    Power { exponent: f64 },
}

impl Normalization {
    /// The growth function evaluated at n, so that `s_n / scale(n)` tends to
    /// the leading constant.
    pub fn scale(&self, n: f64) -> f64 {
        match self {
            Normalization::Linear => n,
            Normalization::NLogN => n * n.ln(),
            Normalization::Power { exponent } => n.powf(*exponent),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub regime: RegimeKind,
    /// Limit of σ²_n.
    pub sigma2: f64,
    /// Limit of `s_n / normalization.scale(n)`.
    pub leading_constant: f64,
    pub normalization: Normalization,
    /// Limit covariance of `S_n / sqrt(scale(n))`, row-major d x d. Only known
    /// in the Gaussian regimes.
    pub limit_cov: Option<Vec<f64>>,
    /// (1/m) Σ (v - v̄)(v - v̄)ᵀ.
    pub step_cov: Vec<f64>,
    /// Error bound on the leading constant when it comes from a series.
    pub constant_error: Option<f64>,
}

pub fn limit_constants(steps: &StepSet, params: &MemoryParams) -> Result<AsymptoticPrediction> {
    limit_constants_with_tolerance(steps, params, DEFAULT_SERIES_TOL)
}

/// [`limit_constants`] with an explicit tolerance for the superdiffusive
/// series.
pub fn limit_constants_with_tolerance(
    steps: &StepSet,
    params: &MemoryParams,
    series_tolerance: f64,
) -> Result<AsymptoticPrediction> {
    params.require_nondegenerate()?;
    let sigma2 = steps.centered_variance();
    let step_cov = steps.centered_covariance();
    let delta = params.delta();
    let regime = params.regime().kind;
    Ok(match regime {
        RegimeKind::Diffusive => {
            let c = 1.0 / (1.0 - 2.0 * delta);
            AsymptoticPrediction {
                regime,
                sigma2,
                leading_constant: sigma2 * c,
                normalization: Normalization::Linear,
                limit_cov: Some(step_cov.iter().map(|x| x * c).collect()),
                step_cov,
                constant_error: None,
            }
        }
        RegimeKind::Critical => AsymptoticPrediction {
            regime,
            sigma2,
            leading_constant: sigma2,
            normalization: Normalization::NLogN,
            limit_cov: Some(step_cov.clone()),
            step_cov,
            constant_error: None,
        },
        RegimeKind::Superdiffusive => {
            let c = superdiffusive_constant(steps, params, series_tolerance)?;
            AsymptoticPrediction {
                regime,
                sigma2,
                leading_constant: c.value,
                normalization: Normalization::Power { exponent: 2.0 * delta },
                limit_cov: None,
                step_cov,
                constant_error: Some(c.error_bound),
            }
        }
    })
}

/// [`limit_constants`], refusing parameters outside the `expected` regime.
pub fn limit_constants_for(
    steps: &StepSet,
    params: &MemoryParams,
    expected: RegimeKind,
) -> Result<AsymptoticPrediction> {
    let actual = params.regime().kind;
    if actual != expected {
        return Err(Error::WrongRegime { expected, actual });
    }
    limit_constants(steps, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub error_bound: f64,
    /// Time the recursion was run to.
    pub terms: u64,
}

/// `C = lim s_n / n^{2δ}` for 1/2 < δ < 1.
///
/// The partial sums of the defining series are exactly `s_n / η_n`. To each
/// partial sum we add the σ² part of the tail in closed form and half of the
/// next alternating term; the remaining error is O(1/n), so estimates at
/// n and n/2 are combined by Richardson extrapolation. The reported bound is
/// the distance between the two unextrapolated estimates, which dominates
/// the error of the extrapolated value once the O(1/n) term is resolved.
pub fn superdiffusive_constant(steps: &StepSet, params: &MemoryParams, tolerance: f64) -> Result<SeriesEstimate> {
    superdiffusive_constant_capped(steps, params, tolerance, SERIES_MAX_TERMS)
}

/// [`superdiffusive_constant`] with an explicit cap on the recursion length.
pub fn superdiffusive_constant_capped(
    steps: &StepSet,
    params: &MemoryParams,
    tolerance: f64,
    max_terms: u64,
) -> Result<SeriesEstimate> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let actual = params.regime().kind;
    if actual != RegimeKind::Superdiffusive {
        return Err(Error::WrongRegime {
            expected: RegimeKind::Superdiffusive,
            actual,
        });
    }
    params.require_nondegenerate()?;

    let (gamma, delta) = (params.gamma(), params.delta());
    let sigma2 = steps.centered_variance();
    let ln_g3 = ln_gamma(3.0 + 2.0 * delta);
    // C = (Γ(3) / Γ(3+2δ)) · lim s_n / η_n
    let prefactor = (2f64.ln() - ln_g3).exp();
    // Σ_{j >= J} 1/η_j = Γ(3+2δ)/2 · Γ(J) / ((2δ-1) Γ(J+2δ-1))
    let sigma_tail = |j: f64| {
        sigma2 * (ln_g3 - 2f64.ln() - ln_gamma_ratio(j, 2.0 * delta - 1.0)).exp() / (2.0 * delta - 1.0)
    };

    let mut rec = MomentRecursion::new(steps, params);
    let mut target = 16u64;
    let mut prev: Option<f64> = None;
    loop {
        let r = *rec.advance_to(target);
        let n = r.n as f64;
        let eta = r.eta.expect("n >= 3");
        let eta_next = (1.0 + 2.0 * delta / n) * eta;
        let sign = if r.n % 2 == 0 { 1.0 } else { -1.0 };
        let next_alt = 2.0 * gamma / n * sign * r.u / eta_next;
        let estimate = prefactor * (r.s / eta + sigma_tail(n + 1.0) + 0.5 * next_alt);
        if let Some(p) = prev {
            let bound = (estimate - p).abs();
            let value = 2.0 * estimate - p;
            if bound < tolerance {
                return Ok(SeriesEstimate {
                    value,
                    error_bound: bound,
                    terms: r.n,
                });
            }
            if target >= max_terms {
                return Err(Error::NotConverged {
                    tolerance,
                    terms: r.n,
                    estimate: value,
                });
            }
        }
        prev = Some(estimate);
        target *= 2;
    }
}

/// `t_n / n^{2γ}` at time n: a numerical estimate of the growth constant of
/// the auxiliary process when γ > 1/2, for which no series is known.
pub fn auxiliary_growth_ratio(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<f64> {
    let r = moments_at(n, steps, params)?;
    Ok(r.t / (n as f64).powf(2.0 * params.gamma()))
}

/// `s_n / (leading_constant · scale(n))`; tends to 1.
pub fn second_moment_ratio(row: &MomentRow, prediction: &AsymptoticPrediction) -> f64 {
    row.s / (prediction.leading_constant * prediction.normalization.scale(row.n as f64))
}

/// `E[X_{n+1} | F_n]` from the counts at time n:
/// `(δ/n) S_n + (γ/n)(-1)^n T_n + {(1-γ)(-1)^n - (δ/n) 1_odd(n)} v̄`.
pub fn conditional_step_mean(counts: &[u64], n: u64, steps: &StepSet, params: &MemoryParams) -> Result<Vec<f64>> {
    let total: u64 = counts.iter().sum();
    if n < 1 || total != n || counts.len() != 2 * steps.m() {
        return Err(Error::Config(format!(
            "count vector of length {} summing to {total} does not describe time {n}",
            counts.len()
        )));
    }
    let s = crate::dynamics::position_from_counts(steps, counts);
    let t = crate::dynamics::auxiliary_from_counts(steps, counts);
    let nf = n as f64;
    let (gamma, delta) = (params.gamma(), params.delta());
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let odd = if n % 2 == 1 { delta / nf } else { 0.0 };
    let c = (1.0 - gamma) * sign - odd;
    Ok((0..steps.dimension())
        .map(|k| delta / nf * s[k] + gamma / nf * sign * t[k] + c * steps.mean_odd_step()[k])
        .collect())
}
