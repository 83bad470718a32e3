//! Step sets, memory parameters and regime classification.
//!
//! A lattice is described by its odd steps `v_1..v_m`; the even steps are the
//! negations `v_{m+i} = -v_i`. Throughout the crate a step index `i < m`
//! refers to an odd step and `m <= i < 2m` to the even step `-v_{i-m}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-coordinate tolerance for vector equality.
pub const VECTOR_TOL: f64 = 1e-12;

/// Tolerance used to decide `delta == 1/2` after deriving delta from (p, q, m).
pub const CRITICAL_TOL: f64 = 1e-12;

pub const BUILTIN_NAMES: [&str; 4] = ["hexagonal", "brick_wall", "distorted_hexagonal", "two_step_line"];

#[derive(Clone, Debug, PartialEq)]
pub struct StepSet {
    dimension: usize,
    odd: Vec<Vec<f64>>,
    /// All 2m steps, row-major (2m x d).
    all: Vec<f64>,
    mean: Vec<f64>,
}

/// On-disk lattice description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub odd_steps: Vec<Vec<f64>>,
}

fn coincide(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= VECTOR_TOL)
}

fn opposite(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x + y).abs() <= VECTOR_TOL)
}

impl StepSet {
    /// Validates a list of odd steps.
    pub fn new(raw: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(raw, false)
    }

    /// Like [`StepSet::new`] but accepts odd steps that are negations of each
    /// other. Directions stay distinct as labels (step `i` and step `m + j`
    /// may share a vector), which keeps the walk well defined; only the
    /// geometric picture of two disjoint vertex classes is lost. Used for the
    /// brick-wall lattice, whose odd set {±e1, e2} contains ±e1.
    pub fn with_overlap(raw: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(raw, true)
    }

    fn build(raw: Vec<Vec<f64>>, allow_overlap: bool) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::EmptySet(raw.len()));
        }
        let dimension = raw[0].len();
        for (index, v) in raw.iter().enumerate() {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dimension,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(index));
            }
            if v.iter().all(|x| x.abs() <= VECTOR_TOL) {
                return Err(Error::ZeroVector(index));
            }
        }
        for i in 0..raw.len() {
            for j in (i + 1)..raw.len() {
                if coincide(&raw[i], &raw[j]) {
                    return Err(Error::DuplicateVector(i, j));
                }
                if !allow_overlap && opposite(&raw[i], &raw[j]) {
                    return Err(Error::OverlapViolation(i, j));
                }
            }
        }

        let m = raw.len();
        let mut all = Vec::with_capacity(2 * m * dimension);
        for v in &raw {
            all.extend_from_slice(v);
        }
        for v in &raw {
            all.extend(v.iter().map(|x| -x));
        }
        let mean = (0..dimension)
            .map(|k| raw.iter().map(|v| v[k]).sum::<f64>() / m as f64)
            .collect();
        Ok(Self {
            dimension,
            odd: raw,
            all,
            mean,
        })
    }

    pub fn from_spec(spec: LatticeSpec) -> Result<Self> {
        if let Some((index, v)) = spec
            .odd_steps
            .iter()
            .enumerate()
            .find(|(_, v)| v.len() != spec.dimension)
        {
            return Err(Error::DimensionMismatch {
                index,
                expected: spec.dimension,
                found: v.len(),
            });
        }
        Self::new(spec.odd_steps)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn to_spec(&self) -> LatticeSpec {
        LatticeSpec {
            dimension: self.dimension,
            odd_steps: self.odd.clone(),
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let s3 = 3f64.sqrt() / 2.0;
        let raw = match name {
            "hexagonal" => vec![vec![1.0, 0.0], vec![-0.5, s3], vec![-0.5, -s3]],
            "brick_wall" => {
                return Self::with_overlap(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]);
            }
            "distorted_hexagonal" => vec![vec![1.0, 0.0], vec![0.5, 1.0], vec![0.0, 0.5]],
            "two_step_line" => vec![vec![1.0], vec![2.0]],
            _ => return Err(Error::UnknownName(name.to_string())),
        };
        Self::new(raw)
    }

    /// Number of odd steps.
    pub fn m(&self) -> usize {
        self.odd.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn odd_steps(&self) -> &[Vec<f64>] {
        &self.odd
    }

    /// Step `i` in `0..2m`.
    #[inline]
    pub fn step(&self, i: usize) -> &[f64] {
        &self.all[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Mean of the odd steps, v̄.
    pub fn mean_odd_step(&self) -> &[f64] {
        &self.mean
    }

    pub fn max_norm(&self) -> f64 {
        self.odd
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// σ² = (1/m) Σ |v - v̄|².
    pub fn centered_variance(&self) -> f64 {
        self.odd
            .iter()
            .map(|v| v.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / self.m() as f64
    }

    /// (1/m) Σ (v - v̄)(v - v̄)ᵀ, row-major d x d.
    pub fn centered_covariance(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut cov = vec![0.0; d * d];
        for v in &self.odd {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += (v[a] - self.mean[a]) * (v[b] - self.mean[b]);
                }
            }
        }
        let m = self.m() as f64;
        cov.iter_mut().for_each(|c| *c /= m);
        cov
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoryParams {
    p: f64,
    q: f64,
    m: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
}

impl MemoryParams {
    pub fn new(p: f64, q: f64, m: usize) -> Result<Self> {
        let unit = "0 <= x <= 1";
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { name: "p", value: p, expected: unit });
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange { name: "q", value: q, expected: unit });
        }
        if m < 2 {
            return Err(Error::OutOfRange {
                name: "m",
                value: m as f64,
                expected: "m >= 2",
            });
        }
        let mf = m as f64;
        let alpha = (mf * p - 1.0) / (mf - 1.0);
        let beta = (mf * q - 1.0) / (mf - 1.0);
        Ok(Self {
            p,
            q,
            m,
            alpha,
            beta,
            gamma: 0.5 * (alpha + beta),
            delta: 0.5 * (alpha - beta),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether γ ± δ lie in [-1/(m-1), 1]. Always true for p, q in [0, 1];
    /// reported for completeness.
    pub fn admissible(&self) -> bool {
        let lo = -1.0 / (self.m as f64 - 1.0) - 1e-12;
        let hi = 1.0 + 1e-12;
        let sum = self.gamma + self.delta;
        let diff = self.gamma - self.delta;
        (lo..=hi).contains(&sum) && (lo..=hi).contains(&diff)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }

    /// Fails with [`Error::DegenerateParams`] when γ = 1 or δ = 1.
    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.regime().is_degenerate() {
            Err(Error::DegenerateParams {
                gamma: self.gamma,
                delta: self.delta,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeKind {
    Diffusive,
    Critical,
    Superdiffusive,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeKind::Diffusive => "diffusive",
            RegimeKind::Critical => "critical",
            RegimeKind::Superdiffusive => "superdiffusive",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DegenerateFlags {
    pub gamma_is_one: bool,
    pub delta_is_one: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub degenerate: DegenerateFlags,
}

impl Regime {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.gamma_is_one || self.degenerate.delta_is_one
    }

    pub fn flag_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.degenerate.gamma_is_one {
            out.push("gamma_is_one");
        }
        if self.degenerate.delta_is_one {
            out.push("delta_is_one");
        }
        out
    }
}

pub fn classify_regime(params: &MemoryParams) -> Regime {
    let delta = params.delta();
    let kind = if (delta - 0.5).abs() <= CRITICAL_TOL {
        RegimeKind::Critical
    } else if delta < 0.5 {
        RegimeKind::Diffusive
    } else {
        RegimeKind::Superdiffusive
    };
    Regime {
        kind,
        degenerate: DegenerateFlags {
            gamma_is_one: params.gamma() == 1.0,
            delta_is_one: delta == 1.0,
        },
    }
}
