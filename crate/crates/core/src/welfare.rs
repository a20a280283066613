//! Welfare-optimal counting strategies.
//!
//! The pipeline is: lexicographic cascade of per-principal optimizations
//! ([`long_term`]), one-step advantages against the resulting values
//! ([`advantages`]), the unrolling horizon κ ([`find_kappa`]) and backward
//! induction over κ layers whose rewards are discounted advantage sums
//! ([`optimize`]).

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{eval_counting, Payoffs};
use crate::model::{ActionSets, NumericMdp};
use crate::numeric::{NumericMode, Scalar};
use crate::solve::{optimal_action_set, solve_discounted, SolveConfig};
use crate::strategy::CountingStrategy;

pub const DEFAULT_MAX_KAPPA: u64 = 10_000_000;
pub const DEFAULT_FLOAT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareConfig {
    pub mode: NumericMode,
    pub solve: SolveConfig,
    /// Prefix-sum slack; `None` means 0 in exact mode and 1e-12 in float mode.
    pub slack: Option<f64>,
    pub max_kappa: u64,
}

impl WelfareConfig {
    pub fn new(mode: NumericMode) -> Self {
        WelfareConfig {
            mode,
            solve: SolveConfig::default(),
            slack: None,
            max_kappa: DEFAULT_MAX_KAPPA,
        }
    }

    pub fn exact() -> Self {
        Self::new(NumericMode::Exact)
    }

    pub fn float() -> Self {
        Self::new(NumericMode::float())
    }

    pub fn slack<T: Scalar>(&self) -> T {
        match self.slack {
            Some(x) => T::from_f64(x),
            None if T::EXACT => T::zero(),
            None => T::from_f64(DEFAULT_FLOAT_SLACK),
        }
    }

    fn tie_tolerance<T: Scalar>(&self) -> T {
        if T::EXACT {
            T::zero()
        } else {
            T::from_f64(self.mode.tolerance())
        }
    }
}

/// Output of the cascade `M_0 → M_1 → … → M_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermResult<T> {
    /// `levels[j]` are the action sets of `M_j`; `levels[n]` is the final restriction.
    pub levels: Vec<ActionSets>,
    /// `values[i][s]`: optimal value of principal `i` on `M_i`.
    pub values: Vec<Vec<T>>,
    /// Lowest-index surviving action per state.
    pub tail: Vec<usize>,
}

impl<T> LongTermResult<T> {
    pub fn restricted(&self) -> &ActionSets {
        self.levels.last().expect("at least M_0")
    }

    /// The cascade level `j` at which `(s,a)` left the action set
    /// (present in `M_j`, absent from `M_{j+1}`); `None` if retained.
    pub fn removal_level(&self, s: usize, a: usize) -> Option<usize> {
        (0..self.levels.len() - 1).find(|&j| !self.levels[j + 1][s].contains(&a))
    }
}

pub fn long_term<T: Scalar>(mdp: &NumericMdp<T>, config: &WelfareConfig) -> Result<LongTermResult<T>> {
    let tie = config.tie_tolerance::<T>();
    let mut levels = vec![mdp.all_actions()];
    let mut values = Vec::with_capacity(mdp.num_principals());
    for j in 0..mdp.num_principals() {
        let current = levels.last().unwrap();
        let sol = solve_discounted(mdp, current, j, &config.solve)?;
        let next = optimal_action_set(&sol.q, &sol.values, &tie);
        values.push(sol.values.values);
        levels.push(next);
    }
    let tail = levels.last().unwrap().iter().map(|acts| acts[0]).collect();
    Ok(LongTermResult { levels, values, tail })
}

/// `delta[s][a][i] = R(s,a,i) + λ_i Σ p V_i(s') - V_i(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageTable<T> {
    pub delta: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> AdvantageTable<T> {
    /// Layer reward `Σ_i λ_i^j Δ_0(s,a,i)` given the powers `λ_i^j`.
    fn layer_reward(&self, s: usize, a: usize, powers: &[T]) -> T {
        self.delta[s][a]
            .iter()
            .zip(powers)
            .fold(T::zero(), |acc, (d, p)| acc + d.clone() * p.clone())
    }
}

/// Computes advantages, certifying that entries known to vanish (retained
/// actions, and principals before an action's removal level) are zero up
/// to the solver tolerance, and clamping them to exactly zero.
pub fn advantages<T: Scalar>(mdp: &NumericMdp<T>, lt: &LongTermResult<T>, config: &WelfareConfig) -> Result<AdvantageTable<T>> {
    let certify = T::from_f64(100.0 * (config.mode.tolerance() + config.solve.vi_tolerance));
    let n = mdp.num_principals();
    let mut delta = Vec::with_capacity(mdp.num_states());
    for s in 0..mdp.num_states() {
        let mut rows = Vec::with_capacity(mdp.actions[s].len());
        for a in 0..mdp.actions[s].len() {
            let level = lt.removal_level(s, a).unwrap_or(n);
            let mut row = Vec::with_capacity(n);
            for i in 0..n {
                let v = &lt.values[i];
                let d = mdp.q_value(s, a, i, v) - v[s].clone();
                if i < level {
                    let bound = if T::EXACT {
                        T::zero()
                    } else {
                        certify.clone() * (T::one() + v[s].abs())
                    };
                    if d.abs() > bound {
                        return Err(Error::Invariant(format!(
                            "advantage of retained action {a} at `{}` for principal {i} is {}",
                            mdp.state_names[s],
                            d.render()
                        )));
                    }
                    row.push(T::zero());
                } else {
                    if i == level && !d.is_negative() {
                        return Err(Error::Invariant(format!(
                            "removed action {a} at `{}` has non-negative advantage {} for principal {i}",
                            mdp.state_names[s],
                            d.render()
                        )));
                    }
                    row.push(d);
                }
            }
            rows.push(row);
        }
        delta.push(rows);
    }
    Ok(AdvantageTable { delta })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KappaSearch {
    pub kappa: u64,
    /// Least horizon for each `(s,a)` on its own.
    pub per_action: Vec<Vec<u64>>,
}

/// Least `j` such that every prefix sum `Σ_{p≤i'} λ_p^j Δ_0(s,a,p)` is at most
/// `slack`, over all `(s,a)` and `i'`.
///
/// Each pair is scanned independently and κ is the maximum; the condition
/// is absorbing, so this equals the joint scan. Sums are divided by
/// `λ_m^j` for the first principal `m` with a nonzero entry, which keeps
/// them representable for large `j` (the sign is unchanged, and in exact
/// mode with zero slack the test is identical).
pub fn find_kappa<T: Scalar>(discounts: &[T], adv: &AdvantageTable<T>, slack: &T, max_kappa: u64) -> Result<KappaSearch> {
    let per_action = adv
        .delta
        .par_iter()
        .map(|rows| {
            rows.iter()
                .map(|row| pair_kappa(discounts, row, slack, max_kappa))
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let kappa = per_action.iter().flatten().copied().max().unwrap_or(0);
    Ok(KappaSearch { kappa, per_action })
}

struct PairTest<T> {
    ratios: Vec<T>,
    deltas: Vec<T>,
}

impl<T: Scalar> PairTest<T> {
    fn holds(&self, j: u64, slack: &T) -> bool {
        !T::prefix_sum_exceeds(&self.ratios, &self.deltas, j, slack)
    }
}

fn float_scan(test: &PairTest<f64>, slack: f64, max_kappa: u64) -> Option<u64> {
    (0..max_kappa).find(|&j| test.holds(j, &slack))
}

fn pair_kappa<T: Scalar>(discounts: &[T], row: &[T], slack: &T, max_kappa: u64) -> Result<u64> {
    let Some(m) = row.iter().position(|d| !d.is_zero()) else {
        return Ok(0);
    };
    let test = PairTest {
        ratios: discounts[m..].iter().map(|l| l.clone() / discounts[m].clone()).collect(),
        deltas: row[m..].to_vec(),
    };
    if test.holds(0, slack) {
        return Ok(0);
    }
    let exceeded = Error::HorizonExceeded { max_kappa };
    let approx = PairTest {
        ratios: test.ratios.iter().map(Scalar::to_f64).collect(),
        deltas: test.deltas.iter().map(Scalar::to_f64).collect(),
    };
    if !T::EXACT {
        return float_scan(&approx, slack.to_f64(), max_kappa).ok_or(exceeded);
    }
    // Exact: start from the float estimate, then gallop and bisect with
    // exact powers so only a handful of large-power evaluations happen.
    let last = max_kappa.saturating_sub(1);
    let guess = float_scan(&approx, slack.to_f64(), max_kappa).unwrap_or(last).max(1);
    let (mut lo, mut hi) = if test.holds(guess, slack) {
        // Find a failing j below the guess.
        let mut step = 1;
        let mut hi = guess;
        loop {
            let probe = hi.saturating_sub(step);
            if probe == 0 || !test.holds(probe, slack) {
                break (probe, hi);
            }
            hi = probe;
            step *= 2;
        }
    } else {
        let mut step = 1;
        let mut lo = guess;
        loop {
            if lo >= last {
                return Err(exceeded);
            }
            let probe = (lo + step).min(last);
            if test.holds(probe, slack) {
                break (lo, probe);
            }
            lo = probe;
            step *= 2;
        }
    };
    // Invariant: fails at lo (or lo == 0, already known to fail), holds at hi.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if test.holds(mid, slack) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionEstimate {
    /// Least principal index with a nonzero advantage; `None` for retained actions.
    pub min_index: Option<usize>,
    pub kappa_prime: f64,
    pub kappa: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub per_action: Vec<Vec<ActionEstimate>>,
    pub bound: u64,
}

/// A-priori horizon bound `κ_{s,a} = ⌈ln κ' / ln(λ_i/λ_{i+1})⌉`.
pub fn kappa_estimate<T: Scalar>(discounts: &[T], adv: &AdvantageTable<T>) -> KappaEstimate {
    let n = discounts.len();
    let per_action: Vec<Vec<ActionEstimate>> = adv
        .delta
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| {
                    let Some(i) = row.iter().position(|d| !d.is_zero()) else {
                        return ActionEstimate {
                            min_index: None,
                            kappa_prime: 0.0,
                            kappa: 0,
                        };
                    };
                    let positive = row[i + 1..]
                        .iter()
                        .filter(|d| d.is_positive())
                        .fold(T::zero(), |acc, d| acc + d.clone());
                    let kappa_prime = (positive / row[i].abs()).to_f64();
                    let kappa = if i + 1 == n || kappa_prime <= 1.0 {
                        0
                    } else {
                        let gap = (discounts[i].clone() - discounts[i + 1].clone()) / discounts[i + 1].clone();
                        let k = (kappa_prime.ln() / gap.to_f64().ln_1p()).ceil();
                        if k.is_finite() && k > 0.0 {
                            k as u64
                        } else {
                            0
                        }
                    };
                    ActionEstimate {
                        min_index: Some(i),
                        kappa_prime,
                        kappa,
                    }
                })
                .collect()
        })
        .collect();
    let bound = per_action.iter().flatten().map(|e| e.kappa).max().unwrap_or(0);
    KappaEstimate { per_action, bound }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport<T> {
    pub start: usize,
    pub per_principal: Vec<T>,
    pub social_welfare: T,
    pub baseline: T,
    pub deviation_gain: T,
    pub kappa: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub longterm: Duration,
    pub unroll: Duration,
}

#[derive(Debug, Clone)]
pub struct Optimized<T> {
    pub long_term: LongTermResult<T>,
    pub advantages: AdvantageTable<T>,
    pub kappa: KappaSearch,
    pub strategy: CountingStrategy,
    /// `E(s,0)` for every state.
    pub gain: Vec<T>,
    pub payoffs: Payoffs<T>,
    pub timings: Timings,
}

impl<T: Scalar> Optimized<T> {
    pub fn baseline(&self, s: usize) -> T {
        self.long_term
            .values
            .iter()
            .fold(T::zero(), |acc, v| acc + v[s].clone())
    }

    pub fn report(&self, start: usize) -> WelfareReport<T> {
        let baseline = self.baseline(start);
        WelfareReport {
            start,
            per_principal: self.payoffs.at(start),
            social_welfare: baseline.clone() + self.gain[start].clone(),
            baseline,
            deviation_gain: self.gain[start].clone(),
            kappa: self.kappa.kappa,
        }
    }
}

/// Runs the full pipeline and returns a welfare-optimal counting strategy.
pub fn optimize<T: Scalar>(mdp: &NumericMdp<T>, config: &WelfareConfig) -> Result<Optimized<T>> {
    let t0 = Instant::now();
    let lt = long_term(mdp, config)?;
    let adv = advantages(mdp, &lt, config)?;
    let longterm = t0.elapsed();

    let t1 = Instant::now();
    let search = find_kappa(&mdp.discounts, &adv, &config.slack::<T>(), config.max_kappa)?;
    let kappa = usize::try_from(search.kappa).map_err(|_| Error::HorizonExceeded {
        max_kappa: config.max_kappa,
    })?;
    let (prefix, gain) = backward_induction(mdp, &adv, kappa);
    let unroll = t1.elapsed();

    let strategy = CountingStrategy {
        kappa,
        prefix,
        tail: lt.tail.clone(),
    };
    let payoffs = eval_counting(mdp, &strategy)?;
    Ok(Optimized {
        long_term: lt,
        advantages: adv,
        kappa: search,
        strategy,
        gain,
        payoffs,
        timings: Timings { longterm, unroll },
    })
}

/// `E(s,κ) = 0`, `E(s,j) = max_a [Σ_i λ_i^j Δ_0(s,a,i) + Σ p E(s',j+1)]`,
/// lowest action index on ties.
fn backward_induction<T: Scalar>(mdp: &NumericMdp<T>, adv: &AdvantageTable<T>, kappa: usize) -> (Vec<Vec<usize>>, Vec<T>) {
    let n = mdp.num_states();
    let mut prefix = vec![Vec::new(); kappa];
    let mut e = vec![T::zero(); n];
    // Exact powers are updated incrementally; float powers are recomputed
    // per layer so that underflow at large depth cannot stick.
    let mut powers: Vec<T> = if T::EXACT && kappa > 0 {
        mdp.discounts.iter().map(|l| l.powu(kappa as u64 - 1)).collect()
    } else {
        Vec::new()
    };
    for j in (0..kappa).rev() {
        if !T::EXACT {
            powers = mdp.discounts.iter().map(|l| l.powu(j as u64)).collect();
        }
        let layer: Vec<(usize, T)> = (0..n)
            .into_par_iter()
            .with_min_len(256)
            .map(|s| {
                let mut best: Option<(usize, T)> = None;
                for a in 0..mdp.actions[s].len() {
                    let value = adv.layer_reward(s, a, &powers) + mdp.expectation(s, a, &e);
                    match &best {
                        Some((_, b)) if value <= *b => {}
                        _ => best = Some((a, value)),
                    }
                }
                best.expect("every state has an action")
            })
            .collect();
        prefix[j] = layer.iter().map(|(a, _)| *a).collect();
        e = layer.into_iter().map(|(_, v)| v).collect();
        if T::EXACT && j > 0 {
            powers = powers
                .into_iter()
                .zip(&mdp.discounts)
                .map(|(p, l)| p / l.clone())
                .collect();
        }
    }
    (prefix, e)
}
