//! Single-walk simulation driven by the count vector.
//!
//! The next step depends on the past only through the counts `Y_n`: recalling
//! a uniformly chosen past step and perturbing it with the G-kernel gives step
//! `w` with probability `(H_{n+1} Y_n / n)_w`. Sampling from that law costs
//! O(m) per step and needs no step history.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{MemoryParams, StepSet};

/// Distribution of the next step index over `0..2m`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw {
    pub probs: Vec<f64>,
}

impl StepLaw {
    /// Inverse-CDF sampling in index order. Zero-probability entries are
    /// never returned, even when rounding leaves the total slightly below `u`.
    pub fn sample(&self, u: f64) -> usize {
        let mut cum = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last = i;
                cum += p;
                if u < cum {
                    return i;
                }
            }
        }
        last
    }

    /// Σ_w v_w P(w).
    pub fn mean_step(&self, steps: &StepSet) -> Vec<f64> {
        let mut out = vec![0.0; steps.dimension()];
        for (i, &p) in self.probs.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(steps.step(i)) {
                *o += p * x;
            }
        }
        out
    }
}

pub fn initial_step_law(m: usize) -> StepLaw {
    let mut probs = vec![0.0; 2 * m];
    probs[..m].iter_mut().for_each(|p| *p = 1.0 / m as f64);
    StepLaw { probs }
}

/// Urn weight of one target direction.
///
/// `own` counts the target direction itself, `mirror` its negation, and
/// `base` is the class-uniform part `(1-α)/m · own_total + (1-β)/m · mirror_total`.
#[inline(always)]
pub(crate) fn urn_weight(alpha: f64, beta: f64, own: f64, mirror: f64, base: f64, inv_n: f64) -> f64 {
    (alpha * own + beta * mirror + base) * inv_n
}

#[inline(always)]
pub(crate) fn class_base(params: &MemoryParams, own_total: f64, mirror_total: f64) -> f64 {
    let m = params.m() as f64;
    (1.0 - params.alpha()) / m * own_total + (1.0 - params.beta()) / m * mirror_total
}

/// `H_{n+1} y / n` for a real-valued count vector `y` summing to `n >= 1`.
/// Used both for sampled states and for expected counts.
pub fn urn_law(y: &[f64], n: u64, params: &MemoryParams) -> StepLaw {
    let m = params.m();
    let inv_n = 1.0 / n as f64;
    let odd_total: f64 = y[..m].iter().sum();
    let even_total: f64 = y[m..].iter().sum();
    let mut probs = vec![0.0; 2 * m];
    // time n + 1 is odd iff n is even
    if n % 2 == 0 {
        let base = class_base(params, odd_total, even_total);
        for i in 0..m {
            probs[i] = urn_weight(params.alpha(), params.beta(), y[i], y[m + i], base, inv_n);
        }
    } else {
        let base = class_base(params, even_total, odd_total);
        for i in 0..m {
            probs[m + i] = urn_weight(params.alpha(), params.beta(), y[m + i], y[i], base, inv_n);
        }
    }
    StepLaw { probs }
}

/// State of one walk after `n` steps.
///
/// The martingale fields follow `M_n = S_n / ζ_n - R_n - S_2` and are zero
/// sentinels while `n < 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    n: u64,
    counts: Vec<u64>,
    odd_total: u64,
    even_total: u64,
    position: Vec<f64>,
    auxiliary: Vec<f64>,
    martingale: Vec<f64>,
    compensator: Vec<f64>,
    anchor: Vec<f64>,
    zeta: f64,
    track_martingale: bool,
}

impl WalkState {
    /// The walk at the origin before its first step.
    pub fn new(steps: &StepSet) -> Self {
        let d = steps.dimension();
        Self {
            n: 0,
            counts: vec![0; 2 * steps.m()],
            odd_total: 0,
            even_total: 0,
            position: vec![0.0; d],
            auxiliary: vec![0.0; d],
            martingale: vec![0.0; d],
            compensator: vec![0.0; d],
            anchor: vec![0.0; d],
            zeta: 1.0,
            track_martingale: true,
        }
    }

    /// Like [`WalkState::new`] but skips the martingale bookkeeping, whose
    /// fields then stay zero. Position, auxiliary vector and counts evolve
    /// identically for the same uniforms.
    pub fn positions_only(steps: &StepSet) -> Self {
        Self {
            track_martingale: false,
            ..Self::new(steps)
        }
    }

    /// Builds a state directly from a count vector.
    ///
    /// Position and auxiliary vectors are reconstructed from the counts and
    /// ζ_n is the exact product. The path-dependent parts are pinned to
    /// `R_n = 0`, `S_2 = 0`, so `M_n = S_n / ζ_n`; martingale *increments*
    /// from such a state are exact.
    pub fn from_counts(steps: &StepSet, params: &MemoryParams, counts: &[u64]) -> Result<Self> {
        let m = steps.m();
        if counts.len() != 2 * m {
            return Err(Error::Config(format!(
                "count vector has length {}, expected {}",
                counts.len(),
                2 * m
            )));
        }
        let odd_total: u64 = counts[..m].iter().sum();
        let even_total: u64 = counts[m..].iter().sum();
        let n = odd_total + even_total;
        if odd_total != even_total + n % 2 {
            return Err(Error::Config(format!(
                "count vector violates parity: {odd_total} odd and {even_total} even steps"
            )));
        }
        let mut state = Self::new(steps);
        state.n = n;
        state.counts = counts.to_vec();
        state.odd_total = odd_total;
        state.even_total = even_total;
        state.position = position_from_counts(steps, counts);
        state.auxiliary = auxiliary_from_counts(steps, counts);
        if n >= 2 {
            state.zeta = (2..n).fold(1.0, |z, k| z * (1.0 + params.delta() / k as f64));
            state.martingale = state.position.iter().map(|s| s / state.zeta).collect();
        }
        Ok(state)
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn position(&self) -> &[f64] {
        &self.position
    }
    pub fn auxiliary(&self) -> &[f64] {
        &self.auxiliary
    }
    pub fn martingale(&self) -> &[f64] {
        &self.martingale
    }
    pub fn compensator(&self) -> &[f64] {
        &self.compensator
    }
    /// ζ_n (1 while n < 2).
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Law of the next step.
    pub fn step_law(&self, params: &MemoryParams) -> StepLaw {
        if self.n == 0 {
            return initial_step_law(params.m());
        }
        let y: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        urn_law(&y, self.n, params)
    }

    /// Samples the next step with `u` in [0, 1) and applies it. Returns the
    /// index of the step taken.
    ///
    /// Equivalent to `self.step_law(params).sample(u)` followed by
    /// [`WalkState::apply_step`], without allocating.
    pub fn advance(&mut self, steps: &StepSet, params: &MemoryParams, u: f64) -> usize {
        let i = self.sample_index(params, u);
        self.apply_step(steps, params, i);
        i
    }

    #[inline]
    fn sample_index(&self, params: &MemoryParams, u: f64) -> usize {
        let m = params.m();
        let mut cum = 0.0;
        let mut last = 0;
        if self.n == 0 {
            let p = 1.0 / m as f64;
            for i in 0..m {
                last = i;
                cum += p;
                if u < cum {
                    return i;
                }
            }
            return last;
        }
        let inv_n = 1.0 / self.n as f64;
        let (alpha, beta) = (params.alpha(), params.beta());
        let (own_off, mirror_off, base) = if self.n % 2 == 0 {
            (0, m, class_base(params, self.odd_total as f64, self.even_total as f64))
        } else {
            (m, 0, class_base(params, self.even_total as f64, self.odd_total as f64))
        };
        for i in 0..m {
            let own = self.counts[own_off + i] as f64;
            let mirror = self.counts[mirror_off + i] as f64;
            let p = urn_weight(alpha, beta, own, mirror, base, inv_n);
            if p > 0.0 {
                last = own_off + i;
                cum += p;
                if u < cum {
                    return own_off + i;
                }
            }
        }
        last
    }

    /// Takes step `i` (which must have the parity of time n + 1) and updates
    /// every tracked quantity.
    pub fn apply_step(&mut self, steps: &StepSet, params: &MemoryParams, i: usize) {
        let n = self.n;
        let m = steps.m();
        debug_assert!((n % 2 == 0) == (i < m), "step {i} has the wrong parity for time {}", n + 1);
        // (-1)^n
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        if self.track_martingale && n >= 2 {
            let nf = n as f64;
            let (gamma, delta) = (params.gamma(), params.delta());
            let zeta_next = (1.0 + delta / nf) * self.zeta;
            let odd_n = if n % 2 == 1 { delta / nf } else { 0.0 };
            let vbar_coef = (1.0 - gamma) * sign - odd_n;
            let vbar = steps.mean_odd_step();
            for k in 0..self.compensator.len() {
                let drift = gamma / nf * sign * self.auxiliary[k] + vbar_coef * vbar[k];
                self.compensator[k] += drift / zeta_next;
            }
            self.zeta = zeta_next;
        }

        let x = steps.step(i);
        self.counts[i] += 1;
        if i < m {
            self.odd_total += 1;
        } else {
            self.even_total += 1;
        }
        for (k, &xk) in x.iter().enumerate() {
            self.position[k] += xk;
            self.auxiliary[k] += sign * xk;
        }
        self.n = n + 1;

        if !self.track_martingale {
            return;
        }
        if self.n == 2 {
            self.anchor.copy_from_slice(&self.position);
            self.zeta = 1.0;
            self.compensator.iter_mut().for_each(|r| *r = 0.0);
            self.martingale.iter_mut().for_each(|r| *r = 0.0);
        } else if self.n > 2 {
            for k in 0..self.martingale.len() {
                self.martingale[k] = self.position[k] / self.zeta - self.compensator[k] - self.anchor[k];
            }
        }
    }

    /// Checks the count identities and compares S_n, T_n against their
    /// reconstruction from counts.
    pub fn check_invariants(&self, steps: &StepSet, tol: f64) -> bool {
        let m = steps.m();
        let odd: u64 = self.counts[..m].iter().sum();
        let even: u64 = self.counts[m..].iter().sum();
        if odd + even != self.n || odd != even + self.n % 2 {
            return false;
        }
        let s = position_from_counts(steps, &self.counts);
        let t = auxiliary_from_counts(steps, &self.counts);
        s.iter().zip(&self.position).all(|(a, b)| (a - b).abs() <= tol)
            && t.iter().zip(&self.auxiliary).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// S = Σ_i v_i Y(i).
pub fn position_from_counts(steps: &StepSet, counts: &[u64]) -> Vec<f64> {
    let mut s = vec![0.0; steps.dimension()];
    for (i, &c) in counts.iter().enumerate() {
        for (sk, x) in s.iter_mut().zip(steps.step(i)) {
            *sk += c as f64 * x;
        }
    }
    s
}

/// T = Σ_{odd} v_i Y(i) - Σ_{even} v_i Y(i).
pub fn auxiliary_from_counts(steps: &StepSet, counts: &[u64]) -> Vec<f64> {
    let m = steps.m();
    let mut t = vec![0.0; steps.dimension()];
    for (i, &c) in counts.iter().enumerate() {
        let sign = if i < m { 1.0 } else { -1.0 };
        for (tk, x) in t.iter_mut().zip(steps.step(i)) {
            *tk += sign * c as f64 * x;
        }
    }
    t
}

/// Every count vector reachable at time `n`: the odd block sums to ⌈n/2⌉ and
/// the even block to ⌊n/2⌋. Ordered lexicographically.
pub fn reachable_counts(n: u64, m: usize) -> Vec<Vec<u64>> {
    fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(total - first, parts - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let odd = compositions(n.div_ceil(2), m);
    let even = compositions(n / 2, m);
    let mut out = Vec::with_capacity(odd.len() * even.len());
    for a in &odd {
        for b in &even {
            out.push(a.iter().chain(b).copied().collect());
        }
    }
    out
}

/// Independent, reproducible random stream for walk `stream` under `seed`.
pub fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in [0, 1) as consumed by [`WalkState::advance`].
#[inline]
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

/// Checkpoint schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Checkpoints {
    /// Powers of two up to `n_max`, plus `n_max`.
    Pow2,
    /// `k` evenly spaced times ending at `n_max`.
    Linear(u64),
    /// Every time `1..=n_max`.
    All,
    At(Vec<u64>),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Pow2
    }
}

impl Checkpoints {
    /// Sorted, deduplicated checkpoint times in `1..=n_max`.
    pub fn points(&self, n_max: u64) -> Vec<u64> {
        let mut out: Vec<u64> = match self {
            Checkpoints::Pow2 => {
                let mut v: Vec<u64> = std::iter::successors(Some(1u64), |&x| x.checked_mul(2))
                    .take_while(|&x| x <= n_max)
                    .collect();
                v.push(n_max);
                v
            }
            Checkpoints::Linear(k) => {
                let k = (*k).max(1);
                (1..=k).map(|j| ((n_max as u128 * j as u128) / k as u128) as u64).collect()
            }
            Checkpoints::All => (1..=n_max).collect(),
            Checkpoints::At(v) => v.iter().copied().filter(|&x| x <= n_max).collect(),
        };
        out.retain(|&x| x >= 1);
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl FromStr for Checkpoints {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pow2" => return Ok(Checkpoints::Pow2),
            "all" => return Ok(Checkpoints::All),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("linear:") {
            return k
                .parse::<u64>()
                .ok()
                .filter(|&k| k >= 1)
                .map(Checkpoints::Linear)
                .ok_or_else(|| Error::Config(format!("bad linear checkpoint count {k:?}")));
        }
        Err(Error::Config(format!("unknown checkpoint schedule {s:?} (pow2 | linear:k | all)")))
    }
}

/// Runs one walk to `n_max` and returns snapshots at the checkpoint times.
pub fn run_walk(
    steps: &StepSet,
    params: &MemoryParams,
    n_max: u64,
    seed: u64,
    stream: u64,
    checkpoints: &Checkpoints,
) -> Result<Vec<WalkState>> {
    if n_max < 2 {
        return Err(Error::TooShort(n_max));
    }
    let times = checkpoints.points(n_max);
    let mut rng = walk_rng(seed, stream);
    let mut state = WalkState::new(steps);
    let mut out = Vec::with_capacity(times.len());
    for &t in &times {
        while state.n < t {
            state.advance(steps, params, uniform(&mut rng));
        }
        out.push(state.clone());
    }
    Ok(out)
}

pub fn trajectory_header(d: usize, m: usize) -> String {
    let mut cols = vec!["n".to_string()];
    for prefix in ["S", "T", "M"] {
        cols.extend((1..=d).map(|k| format!("{prefix}_{k}")));
    }
    cols.extend((1..=2 * m).map(|k| format!("Y_{k}")));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(mut w: W, steps: &StepSet, snapshots: &[WalkState]) -> Result<()> {
    writeln!(w, "{}", trajectory_header(steps.dimension(), steps.m()))?;
    for s in snapshots {
        let mut row = vec![s.n.to_string()];
        for v in [&s.position, &s.auxiliary, &s.martingale] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        row.extend(s.counts.iter().map(|c| c.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urn_algebra::build_generators;

    fn hex() -> StepSet {
        StepSet::builtin("hexagonal").unwrap()
    }

    #[test]
    fn initial_law() {
        let law = initial_step_law(3);
        assert_eq!(law.probs, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(initial_step_law(2).probs, vec![0.5, 0.5, 0.0, 0.0]);
        assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn law_after_one_step() {
        let steps = hex();
        let params = MemoryParams::new(0.7, 0.4, 3).unwrap();
        let state = WalkState::from_counts(&steps, &params, &[1, 0, 0, 0, 0, 0]).unwrap();
        let law = state.step_law(&params);
        let r = (1.0 - 0.4) / 2.0;
        let want = [0.0, 0.0, 0.0, 0.4, r, r];
        for (a, b) in law.probs.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{:?}", law.probs);
        }
    }

    #[test]
    fn law_matches_matrix_product() {
        let params = MemoryParams::new(0.8, 0.2, 3).unwrap();
        let gens = build_generators(&params);
        // n = 2, Y = e_1 + e_{m+2}
        let y = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let law = urn_law(&y, 2, &params);
        let want: Vec<f64> = gens.h_odd.mul_vec(&y).iter().map(|x| x / 2.0).collect();
        for (a, b) in law.probs.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        // ½ (column 1 of A) + ½ (column 2 of B) on the odd half
        let a_col = [0.8, 0.1, 0.1];
        let b_col = [0.4, 0.2, 0.4];
        for i in 0..3 {
            assert!((law.probs[i] - 0.5 * (a_col[i] + b_col[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn memoryless_law_is_uniform() {
        let params = MemoryParams::new(1.0 / 3.0, 1.0 / 3.0, 3).unwrap();
        let state = WalkState::from_counts(&hex(), &params, &[3, 0, 1, 2, 1, 0]).unwrap();
        let law = state.step_law(&params);
        for (i, p) in law.probs.iter().enumerate() {
            let want = if i >= 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-15);
        }
    }

    #[test]
    fn sampler_agrees_with_law_vector() {
        let steps = hex();
        let params = MemoryParams::new(0.65, 0.3, 3).unwrap();
        let mut rng = walk_rng(11, 0);
        let mut state = WalkState::new(&steps);
        for _ in 0..2000 {
            let u = uniform(&mut rng);
            let via_law = state.step_law(&params).sample(u);
            let taken = state.advance(&steps, &params, u);
            assert_eq!(via_law, taken);
        }
    }

    #[test]
    fn persistent_walk_alternates() {
        let steps = hex();
        let params = MemoryParams::new(1.0, 1.0, 3).unwrap();
        let mut rng = walk_rng(5, 2);
        let mut state = WalkState::new(&steps);
        let first = state.advance(&steps, &params, uniform(&mut rng));
        for k in 2..=200u64 {
            let i = state.advance(&steps, &params, uniform(&mut rng));
            let want = if k % 2 == 1 { first } else { first + 3 };
            assert_eq!(i, want);
        }
    }

    #[test]
    fn delta_one_alternates_two_directions() {
        let steps = StepSet::builtin("two_step_line").unwrap();
        let params = MemoryParams::new(1.0, 0.0, 2).unwrap();
        for seed in 0..20 {
            let mut rng = walk_rng(seed, 0);
            let mut state = WalkState::new(&steps);
            let v = state.advance(&steps, &params, uniform(&mut rng));
            let w = 1 - v;
            for k in 2..=100u64 {
                let i = state.advance(&steps, &params, uniform(&mut rng));
                let want = if k % 2 == 1 { v } else { 2 + w };
                assert_eq!(i, want);
            }
        }
    }

    #[test]
    fn counts_conserved_and_reconstruction() {
        let steps = StepSet::builtin("distorted_hexagonal").unwrap();
        let params = MemoryParams::new(0.9, 0.1, 3).unwrap();
        let mut rng = walk_rng(3, 9);
        let mut state = WalkState::new(&steps);
        for _ in 0..1000 {
            state.advance(&steps, &params, uniform(&mut rng));
            assert_eq!(state.counts().iter().sum::<u64>(), state.n());
        }
        assert!(state.check_invariants(&steps, 1e-9));
    }

    #[test]
    fn martingale_starts_at_zero() {
        let steps = hex();
        let params = MemoryParams::new(0.6, 0.5, 3).unwrap();
        let snaps = run_walk(&steps, &params, 16, 1, 0, &Checkpoints::Pow2).unwrap();
        assert_eq!(snaps.iter().map(|s| s.n()).collect::<Vec<_>>(), vec![1, 2, 4, 8, 16]);
        assert!(snaps[0].martingale().iter().all(|&x| x == 0.0));
        assert!(snaps[1].martingale().iter().all(|&x| x == 0.0));
        assert_eq!(snaps[1].zeta(), 1.0);
        let s4 = &snaps[2];
        let z4 = (1.0 + params.delta() / 2.0) * (1.0 + params.delta() / 3.0);
        assert!((s4.zeta() - z4).abs() < 1e-15);
    }

    #[test]
    fn positions_only_follows_same_path() {
        let steps = hex();
        let params = MemoryParams::new(0.75, 0.35, 3).unwrap();
        let mut rng = walk_rng(8, 1);
        let mut full = WalkState::new(&steps);
        let mut lean = WalkState::positions_only(&steps);
        for _ in 0..5000 {
            let u = uniform(&mut rng);
            assert_eq!(full.advance(&steps, &params, u), lean.advance(&steps, &params, u));
        }
        assert_eq!(full.counts(), lean.counts());
        assert_eq!(full.position(), lean.position());
        assert!(lean.martingale().iter().all(|&x| x == 0.0));
        assert!(full.martingale().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn run_walk_is_deterministic() {
        let steps = hex();
        let params = MemoryParams::new(0.6, 0.5, 3).unwrap();
        let a = run_walk(&steps, &params, 5000, 42, 7, &Checkpoints::Pow2).unwrap();
        let b = run_walk(&steps, &params, 5000, 42, 7, &Checkpoints::Pow2).unwrap();
        assert_eq!(a, b);
        let c = run_walk(&steps, &params, 5000, 42, 8, &Checkpoints::Pow2).unwrap();
        assert_ne!(a, c);
        assert!(matches!(
            run_walk(&steps, &params, 1, 42, 7, &Checkpoints::Pow2),
            Err(Error::TooShort(1))
        ));
    }

    #[test]
    fn reachable_state_counts() {
        assert_eq!(reachable_counts(1, 3).len(), 3);
        assert_eq!(reachable_counts(2, 2), vec![
            vec![0, 1, 0, 1],
            vec![0, 1, 1, 0],
            vec![1, 0, 0, 1],
            vec![1, 0, 1, 0],
        ]);
        // C(4+2,2)^2 states at n = 8, m = 3
        assert_eq!(reachable_counts(8, 3).len(), 225);
    }

    #[test]
    fn checkpoint_schedules() {
        assert_eq!(Checkpoints::Pow2.points(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(Checkpoints::Linear(4).points(10), vec![2, 5, 7, 10]);
        assert_eq!("linear:4".parse::<Checkpoints>().unwrap(), Checkpoints::Linear(4));
        assert_eq!("all".parse::<Checkpoints>().unwrap().points(3), vec![1, 2, 3]);
        assert!("linear:0".parse::<Checkpoints>().is_err());
        assert!("weekly".parse::<Checkpoints>().is_err());
    }

    #[test]
    fn trajectory_csv_header() {
        assert_eq!(
            trajectory_header(2, 3),
            "n,S_1,S_2,T_1,T_2,M_1,M_2,Y_1,Y_2,Y_3,Y_4,Y_5,Y_6"
        );
        let steps = StepSet::builtin("two_step_line").unwrap();
        let params = MemoryParams::new(0.875, 0.125, 2).unwrap();
        let snaps = run_walk(&steps, &params, 4, 0, 0, &Checkpoints::Pow2).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &steps, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("n,S_1,T_1,M_1,Y_1,Y_2,Y_3,Y_4\n1,"));
    }
}
