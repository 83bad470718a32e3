//! Exact small-n ground truth.
//!
//! [`exact_law`] propagates the law of the count vector through the urn
//! transition. [`history_simulator_law`] ignores the urn form altogether and
//! enumerates step sequences, recalling each past step literally; agreement
//! of the two is what justifies simulating from counts alone.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dynamics::{auxiliary_from_counts, position_from_counts, reachable_counts, urn_law, WalkState};
use crate::error::{Error, Result};
use crate::lattice::{MemoryParams, StepSet};

/// Default cap on the number of count states [`exact_law`] will enumerate.
pub const DEFAULT_STATE_LIMIT: u64 = 1_000_000;

/// Longest history [`history_simulator_law`] enumerates.
pub const MAX_HISTORY_LEN: u64 = 6;

/// Law of `Y_n` as a map from count vectors to probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactLaw {
    pub n: u64,
    pub m: usize,
    pub table: BTreeMap<Vec<u32>, f64>,
}

impl ExactLaw {
    pub fn total_mass(&self) -> f64 {
        self.table.values().sum()
    }

    pub fn prob(&self, counts: &[u32]) -> f64 {
        self.table.get(counts).copied().unwrap_or(0.0)
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of count vectors reachable at time n.
pub fn state_count(n: u64, m: usize) -> u64 {
    let m = m as u64;
    binomial(n.div_ceil(2) + m - 1, m - 1).saturating_mul(binomial(n / 2 + m - 1, m - 1))
}

fn check_inputs(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<()> {
    if n < 1 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            expected: "n >= 1",
        });
    }
    if steps.m() != params.m() {
        return Err(Error::Config(format!(
            "step set has m = {} but parameters were derived for m = {}",
            steps.m(),
            params.m()
        )));
    }
    Ok(())
}

pub fn exact_law(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<ExactLaw> {
    exact_law_with_limit(n, steps, params, DEFAULT_STATE_LIMIT)
}

/// Forward dynamic programming over count states, refusing to start when
/// more than `limit` states would be reachable at time n.
pub fn exact_law_with_limit(n: u64, steps: &StepSet, params: &MemoryParams, limit: u64) -> Result<ExactLaw> {
    check_inputs(n, steps, params)?;
    let m = steps.m();
    let states = state_count(n, m);
    if states > limit {
        return Err(Error::TooLarge { states, limit });
    }
    let mut table = BTreeMap::new();
    for i in 0..m {
        let mut y = vec![0u32; 2 * m];
        y[i] = 1;
        table.insert(y, 1.0 / m as f64);
    }
    for k in 1..n {
        let mut next = BTreeMap::new();
        for (y, &mass) in &table {
            let yf: Vec<f64> = y.iter().map(|&c| c as f64).collect();
            let law = urn_law(&yf, k, params);
            for (w, &p) in law.probs.iter().enumerate() {
                if p > 0.0 {
                    let mut z = y.clone();
                    z[w] += 1;
                    *next.entry(z).or_insert(0.0) += mass * p;
                }
            }
        }
        table = next;
    }
    Ok(ExactLaw { n, m, table })
}

/// Step-choice kernel: probability that the next step is `w`, given that the
/// recalled step is `remembered` and the next step must lie in the class
/// `next_odd`.
fn kernel(remembered: usize, w: usize, next_odd: bool, m: usize, params: &MemoryParams) -> f64 {
    let w_odd = w < m;
    if w_odd != next_odd {
        return 0.0;
    }
    let same_class = (remembered < m) == next_odd;
    // the direction in the next class that corresponds to the recalled step
    let target = if same_class { remembered } else { (remembered + m) % (2 * m) };
    let keep = if same_class { params.p() } else { params.q() };
    if w == target {
        keep
    } else {
        (1.0 - keep) / (m - 1) as f64
    }
}

/// Law of `Y_n` from the literal history-based definition: at each time the
/// walk recalls one of its past steps uniformly and applies the kernel.
pub fn history_simulator_law(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<ExactLaw> {
    check_inputs(n, steps, params)?;
    let m = steps.m();
    if n > MAX_HISTORY_LEN {
        return Err(Error::TooLarge {
            states: (m as u64).saturating_pow(n as u32),
            limit: (m as u64).saturating_pow(MAX_HISTORY_LEN as u32),
        });
    }

    fn extend(
        history: &mut Vec<usize>,
        prob: f64,
        n: u64,
        m: usize,
        params: &MemoryParams,
        table: &mut BTreeMap<Vec<u32>, f64>,
    ) {
        let k = history.len();
        if k as u64 == n {
            let mut y = vec![0u32; 2 * m];
            for &i in history.iter() {
                y[i] += 1;
            }
            *table.entry(y).or_insert(0.0) += prob;
            return;
        }
        let next_odd = (k + 1) % 2 == 1;
        for w in 0..2 * m {
            let p = if k == 0 {
                if w < m {
                    1.0 / m as f64
                } else {
                    0.0
                }
            } else {
                history.iter().map(|&x| kernel(x, w, next_odd, m, params)).sum::<f64>() / k as f64
            };
            if p > 0.0 {
                history.push(w);
                extend(history, prob * p, n, m, params, table);
                history.pop();
            }
        }
    }

    let mut table = BTreeMap::new();
    extend(&mut Vec::with_capacity(n as usize), 1.0, n, m, params, &mut table);
    Ok(ExactLaw { n, m, table })
}

/// ½ Σ |P(y) - Q(y)|.
pub fn total_variation(a: &ExactLaw, b: &ExactLaw) -> f64 {
    let mut sum = 0.0;
    for (y, p) in &a.table {
        sum += (p - b.prob(y)).abs();
    }
    for (y, q) in &b.table {
        if !a.table.contains_key(y) {
            sum += q.abs();
        }
    }
    0.5 * sum
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawMoments {
    pub n: u64,
    pub mean_counts: Vec<f64>,
    pub mean_position: Vec<f64>,
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

/// Moments of the position and auxiliary process by direct summation over
/// the law.
pub fn exact_moments_from_law(law: &ExactLaw, steps: &StepSet) -> LawMoments {
    let d = steps.dimension();
    let mut mean_counts = vec![0.0; 2 * law.m];
    let mut es = vec![0.0; d];
    let mut et = vec![0.0; d];
    let mut rows = Vec::with_capacity(law.table.len());
    for (y, &p) in &law.table {
        let counts: Vec<u64> = y.iter().map(|&c| c as u64).collect();
        let s = position_from_counts(steps, &counts);
        let t = auxiliary_from_counts(steps, &counts);
        for (mc, &c) in mean_counts.iter_mut().zip(y) {
            *mc += p * c as f64;
        }
        for k in 0..d {
            es[k] += p * s[k];
            et[k] += p * t[k];
        }
        rows.push((p, s, t));
    }
    let (mut s2, mut t2, mut st) = (0.0, 0.0, 0.0);
    for (p, s, t) in &rows {
        for k in 0..d {
            let a = s[k] - es[k];
            let b = t[k] - et[k];
            s2 += p * a * a;
            t2 += p * b * b;
            st += p * a * b;
        }
    }
    LawMoments {
        n: law.n,
        mean_counts,
        mean_position: es,
        s: s2,
        t: t2,
        u: st,
    }
}

/// `E[M_{n+1} - M_n | Y_n = y]` for a count state y at time n >= 2,
/// computed by applying every possible next step to the walk state.
pub fn martingale_drift(counts: &[u64], steps: &StepSet, params: &MemoryParams) -> Result<Vec<f64>> {
    let state = WalkState::from_counts(steps, params, counts)?;
    if state.n() < 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: state.n() as f64,
            expected: "n >= 2",
        });
    }
    let law = state.step_law(params);
    let mut drift = vec![0.0; steps.dimension()];
    for (w, &p) in law.probs.iter().enumerate() {
        if p > 0.0 {
            let mut next = state.clone();
            next.apply_step(steps, params, w);
            for (dk, (a, b)) in drift.iter_mut().zip(next.martingale().iter().zip(state.martingale())) {
                *dk += p * (a - b);
            }
        }
    }
    Ok(drift)
}

/// Largest drift norm over every reachable state at time n, and the
/// law-weighted mean norm `Σ_y P(Y_n = y) |E[ΔM | y]|`.
pub fn martingale_drift_summary(n: u64, steps: &StepSet, params: &MemoryParams) -> Result<(f64, f64)> {
    let law = exact_law(n, steps, params)?;
    let mut worst = 0.0f64;
    let mut weighted = 0.0;
    for y in reachable_counts(n, steps.m()) {
        let drift = martingale_drift(&y, steps, params)?;
        let norm = drift.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(norm);
        let key: Vec<u32> = y.iter().map(|&c| c as u32).collect();
        weighted += law.prob(&key) * norm;
    }
    Ok((worst, weighted))
}
