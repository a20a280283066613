//! Brute-force ground truth for small instances.
//!
//! Positional strategies are numbered in lexicographic order of their
//! action vectors (state 0 most significant); ties in welfare go to the
//! smaller number regardless of how the search is scheduled.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::NumericMdp;
use crate::numeric::{PolicySystem, Scalar};
use crate::solve::evaluate_policy;
use crate::strategy::{CountingStrategy, Positional};

pub const DEFAULT_CAP: u64 = 1_000_000;

fn strategy_count<T: Scalar>(mdp: &NumericMdp<T>) -> BigUint {
    mdp.actions.iter().map(|a| BigUint::from(a.len())).product()
}

fn checked_count<T: Scalar>(mdp: &NumericMdp<T>, cap: u64) -> Result<u64> {
    let size = strategy_count(mdp);
    match u64::try_from(&size) {
        Ok(n) if n <= cap => Ok(n),
        _ => Err(Error::CapExceeded {
            size: size.to_string(),
            cap,
        }),
    }
}

/// The positional strategy with number `index`.
pub fn nth_positional<T: Scalar>(mdp: &NumericMdp<T>, mut index: u64) -> Positional {
    let mut policy = vec![0; mdp.num_states()];
    for s in (0..mdp.num_states()).rev() {
        let k = mdp.actions[s].len() as u64;
        policy[s] = (index % k) as usize;
        index /= k;
    }
    policy
}

/// States reachable from `start` under `policy`, in discovery order.
fn reachable<T: Scalar>(mdp: &NumericMdp<T>, policy: &[usize], start: usize) -> Vec<usize> {
    let mut seen = vec![false; mdp.num_states()];
    let mut order = vec![start];
    seen[start] = true;
    let mut head = 0;
    while head < order.len() {
        let s = order[head];
        head += 1;
        for (t, _) in &mdp.actions[s][policy[s]].successors {
            if !seen[*t] {
                seen[*t] = true;
                order.push(*t);
            }
        }
    }
    order
}

/// Per-principal payoffs from `start`, solving only over reachable states.
pub fn start_payoffs<T: Scalar>(mdp: &NumericMdp<T>, policy: &[usize], start: usize) -> Result<Vec<T>> {
    let states = reachable(mdp, policy, start);
    let mut local = vec![usize::MAX; mdp.num_states()];
    for (i, &s) in states.iter().enumerate() {
        local[s] = i;
    }
    let rows: Vec<Vec<(usize, T)>> = states
        .iter()
        .map(|&s| {
            mdp.actions[s][policy[s]]
                .successors
                .iter()
                .map(|(t, p)| (local[*t], p.clone()))
                .collect()
        })
        .collect();
    (0..mdp.num_principals())
        .map(|i| {
            let system = PolicySystem {
                rows: rows.clone(),
                rhs: states
                    .iter()
                    .map(|&s| mdp.actions[s][policy[s]].rewards[i].clone())
                    .collect(),
                discount: mdp.discounts[i].clone(),
            };
            Ok(T::solve_policy_system(&system)?[0].clone())
        })
        .collect()
}

fn sum<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

/// Welfare from `start`, memoized on the strategy's reachable part.
struct Evaluator<'a, T> {
    mdp: &'a NumericMdp<T>,
    start: usize,
    cache: HashMap<Vec<(usize, usize)>, T>,
}

impl<'a, T: Scalar> Evaluator<'a, T> {
    fn new(mdp: &'a NumericMdp<T>, start: usize) -> Self {
        Evaluator {
            mdp,
            start,
            cache: HashMap::new(),
        }
    }

    fn welfare(&mut self, policy: &[usize]) -> Result<T> {
        let mut key: Vec<(usize, usize)> = reachable(self.mdp, policy, self.start)
            .into_iter()
            .map(|s| (s, policy[s]))
            .collect();
        key.sort_unstable();
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let v = sum(&start_payoffs(self.mdp, policy, self.start)?);
        self.cache.insert(key, v.clone());
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionalSearch<T> {
    pub best_welfare: T,
    pub strategy: Positional,
    /// Welfare of every strategy by number, when requested.
    pub table: Option<Vec<T>>,
}

const CHUNK: u64 = 4096;

/// Relative margin below the threshold at which binary64 screening rejects.
const SCREEN_MARGIN: f64 = 1e-6;

fn chunks(total: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let n = total.div_ceil(CHUNK) as usize;
    (0..n).into_par_iter().map(move |c| {
        let c = c as u64;
        (c * CHUNK, ((c + 1) * CHUNK).min(total))
    })
}

/// Evaluates every pure positional strategy from `start`.
pub fn enumerate_positional<T: Scalar>(mdp: &NumericMdp<T>, start: usize, cap: u64, with_table: bool) -> Result<PositionalSearch<T>> {
    let total = checked_count(mdp, cap)?;
    let per_chunk = chunks(total)
        .map(|(lo, hi)| {
            let mut eval = Evaluator::new(mdp, start);
            let mut best: Option<(u64, T)> = None;
            let mut table = Vec::new();
            for idx in lo..hi {
                let w = eval.welfare(&nth_positional(mdp, idx))?;
                if with_table {
                    table.push(w.clone());
                }
                if best.as_ref().is_none_or(|(_, b)| w > *b) {
                    best = Some((idx, w));
                }
            }
            Ok((best.expect("non-empty chunk"), table))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(u64, T)> = None;
    let mut table = Vec::new();
    for ((idx, w), part) in per_chunk {
        if best.as_ref().is_none_or(|(_, b)| w > *b) {
            best = Some((idx, w));
        }
        table.extend(part);
    }
    let (idx, best_welfare) = best.expect("at least one strategy");
    Ok(PositionalSearch {
        best_welfare,
        strategy: nth_positional(mdp, idx),
        table: with_table.then_some(table),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDecision<T> {
    pub holds: bool,
    /// Lexicographically first strategy meeting the threshold.
    pub witness: Option<(Positional, T)>,
}

/// Whether some positional strategy reaches welfare `threshold` from
/// `start`; `None` stands for an unbounded-below threshold.
pub fn threshold_decide_positional<T: Scalar>(mdp: &NumericMdp<T>, start: usize, threshold: Option<&T>, cap: u64) -> Result<ThresholdDecision<T>> {
    let total = checked_count(mdp, cap)?;
    // Exact runs skip strategies whose binary64 welfare falls clearly short.
    let screen = match threshold {
        Some(t) if T::EXACT => {
            let t = t.to_f64();
            Some((mdp.to_float(), t - SCREEN_MARGIN * (1.0 + t.abs())))
        }
        _ => None,
    };
    let found = chunks(total)
        .map(|(lo, hi)| -> Result<Option<(u64, T)>> {
            let mut eval = Evaluator::new(mdp, start);
            let mut quick = screen.as_ref().map(|(m, cut)| (Evaluator::new(m, start), *cut));
            for idx in lo..hi {
                let policy = nth_positional(mdp, idx);
                if let Some((q, cut)) = quick.as_mut() {
                    let w = q.welfare(&policy)?;
                    if w.is_finite() && w < *cut {
                        continue;
                    }
                }
                let w = eval.welfare(&policy)?;
                if threshold.is_none_or(|t| w >= *t) {
                    return Ok(Some((idx, w)));
                }
            }
            Ok(None)
        })
        .find_first(|r| !matches!(r, Ok(None)));
    match found {
        None => Ok(ThresholdDecision {
            holds: false,
            witness: None,
        }),
        Some(Err(e)) => Err(e),
        Some(Ok(Some((idx, w)))) => Ok(ThresholdDecision {
            holds: true,
            witness: Some((nth_positional(mdp, idx), w)),
        }),
        Some(Ok(None)) => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingSearch<T> {
    pub best_welfare: T,
    pub strategy: CountingStrategy,
    /// Number of (prefix, tail) candidates evaluated.
    pub candidates: u64,
}

struct Leaf<T> {
    prefix: Vec<Vec<Option<usize>>>,
    acc: Vec<T>,
    dist: Vec<(usize, T)>,
}

/// Number of prefix leaves, or `None` once it exceeds `limit`. Depends only
/// on supports, so no arithmetic is done.
fn count_leaves<T: Scalar>(mdp: &NumericMdp<T>, start: usize, horizon: usize, limit: u64) -> Option<u64> {
    fn go<T: Scalar>(
        mdp: &NumericMdp<T>,
        support: Vec<usize>,
        left: usize,
        limit: u64,
        memo: &mut HashMap<(usize, Vec<usize>), Option<u64>>,
    ) -> Option<u64> {
        if left == 0 {
            return Some(1);
        }
        let key = (left, support);
        if let Some(v) = memo.get(&key) {
            return *v;
        }
        let support = &key.1;
        let radices: Vec<usize> = support.iter().map(|&s| mdp.actions[s].len()).collect();
        let combos: usize = radices.iter().product();
        let mut total = 0u64;
        let mut result = Some(0);
        for c in 0..combos {
            let mut rest = c;
            let mut next = BTreeSet::new();
            for (k, &s) in support.iter().enumerate().rev() {
                let a = rest % radices[k];
                rest /= radices[k];
                next.extend(mdp.actions[s][a].successors.iter().map(|(t, _)| *t));
            }
            match go(mdp, next.into_iter().collect(), left - 1, limit, memo) {
                Some(k) if total + k <= limit => total += k,
                _ => {
                    result = None;
                    break;
                }
            }
        }
        if result.is_some() {
            result = Some(total);
        }
        memo.insert(key, result);
        result
    }
    go(mdp, vec![start], horizon, limit, &mut HashMap::new())
}

/// Enumerates prefixes of depth `horizon` over the states reachable at
/// each step, accumulating discounted rewards by forward propagation.
fn prefix_leaves<T: Scalar>(mdp: &NumericMdp<T>, start: usize, horizon: usize) -> Vec<Leaf<T>> {
    let n = mdp.num_principals();
    let mut leaves = Vec::new();
    let mut stack = vec![Leaf {
        prefix: Vec::new(),
        acc: vec![T::zero(); n],
        dist: vec![(start, T::one())],
    }];
    while let Some(node) = stack.pop() {
        let step = node.prefix.len();
        if step == horizon {
            leaves.push(node);
            continue;
        }
        let powers: Vec<T> = mdp.discounts.iter().map(|l| l.powu(step as u64)).collect();
        let support: Vec<usize> = node.dist.iter().map(|(s, _)| *s).collect();
        let radices: Vec<usize> = support.iter().map(|&s| mdp.actions[s].len()).collect();
        let combos: usize = radices.iter().product();
        // Push in reverse so the lexicographically first choice is expanded first.
        for c in (0..combos).rev() {
            let mut rest = c;
            let mut choice = vec![0; support.len()];
            for k in (0..support.len()).rev() {
                choice[k] = rest % radices[k];
                rest /= radices[k];
            }
            let mut row = vec![None; mdp.num_states()];
            let mut acc = node.acc.clone();
            let mut next: Vec<(usize, T)> = Vec::new();
            for ((s, p), &a) in node.dist.iter().zip(&choice) {
                row[*s] = Some(a);
                let act = &mdp.actions[*s][a];
                for i in 0..n {
                    acc[i] = acc[i].clone() + powers[i].clone() * p.clone() * act.rewards[i].clone();
                }
                for (t, q) in &act.successors {
                    let w = p.clone() * q.clone();
                    match next.iter_mut().find(|(u, _)| u == t) {
                        Some((_, x)) => *x = x.clone() + w,
                        None => next.push((*t, w)),
                    }
                }
            }
            next.sort_by_key(|(s, _)| *s);
            let mut prefix = node.prefix.clone();
            prefix.push(row);
            stack.push(Leaf { prefix, acc, dist: next });
        }
    }
    leaves
}

/// Exhaustive search over counting strategies with a depth-`horizon`
/// prefix (restricted to reachable cells) and any positional tail.
pub fn enumerate_counting<T: Scalar>(mdp: &NumericMdp<T>, start: usize, horizon: usize, cap: u64) -> Result<CountingSearch<T>> {
    let tails = checked_count(mdp, cap)?;
    if count_leaves(mdp, start, horizon, cap / tails).is_none() {
        return Err(Error::CapExceeded {
            size: format!("more than {cap}"),
            cap,
        });
    }
    let leaves = prefix_leaves(mdp, start, horizon);
    let candidates = leaves.len() as u64 * tails;
    let tail_values: Vec<(Positional, Vec<Vec<T>>)> = (0..tails as usize)
        .into_par_iter()
        .map(|idx| {
            let tail = nth_positional(mdp, idx as u64);
            let values = (0..mdp.num_principals())
                .map(|i| evaluate_policy(mdp, &tail, i))
                .collect::<Result<Vec<_>>>()?;
            Ok((tail, values))
        })
        .collect::<Result<_>>()?;
    let final_powers: Vec<T> = mdp.discounts.iter().map(|l| l.powu(horizon as u64)).collect();
    let mut best: Option<(T, usize, usize)> = None;
    for (li, leaf) in leaves.iter().enumerate() {
        for (ti, (_, values)) in tail_values.iter().enumerate() {
            let mut w = T::zero();
            for i in 0..mdp.num_principals() {
                let future = leaf
                    .dist
                    .iter()
                    .fold(T::zero(), |acc, (s, p)| acc + p.clone() * values[i][*s].clone());
                w = w + leaf.acc[i].clone() + final_powers[i].clone() * future;
            }
            if best.as_ref().is_none_or(|(b, _, _)| w > *b) {
                best = Some((w, li, ti));
            }
        }
    }
    let (best_welfare, li, ti) = best.expect("at least one candidate");
    let tail = tail_values[ti].0.clone();
    let prefix = leaves[li]
        .prefix
        .iter()
        .map(|row| row.iter().zip(&tail).map(|(a, t)| a.unwrap_or(*t)).collect())
        .collect();
    Ok(CountingSearch {
        best_welfare,
        strategy: CountingStrategy {
            kappa: horizon,
            prefix,
            tail,
        },
        candidates,
    })
}

/// Optimum over the same strategy class as [`enumerate_counting`], found
/// by finite-horizon dynamic programming on the time-dependent reward
/// `Σ_i λ_i^j R(s,a,i)` with terminal value `Σ_i λ_i^H V_i^τ` for each
/// positional tail `τ`. Scales to horizons the enumeration cannot reach.
pub fn counting_dp<T: Scalar>(mdp: &NumericMdp<T>, start: usize, horizon: usize, cap: u64) -> Result<CountingSearch<T>> {
    let tails = checked_count(mdp, cap)?;
    let results = (0..tails as usize)
        .into_par_iter()
        .map(|idx| {
            let tail = nth_positional(mdp, idx as u64);
            let mut w = vec![T::zero(); mdp.num_states()];
            for i in 0..mdp.num_principals() {
                let v = evaluate_policy(mdp, &tail, i)?;
                let scale = mdp.discounts[i].powu(horizon as u64);
                for (acc, x) in w.iter_mut().zip(v) {
                    *acc = acc.clone() + scale.clone() * x;
                }
            }
            let mut prefix = vec![Vec::new(); horizon];
            for j in (0..horizon).rev() {
                let powers: Vec<T> = mdp.discounts.iter().map(|l| l.powu(j as u64)).collect();
                let mut next = Vec::with_capacity(mdp.num_states());
                let mut row = Vec::with_capacity(mdp.num_states());
                for s in 0..mdp.num_states() {
                    let mut best: Option<(usize, T)> = None;
                    for (a, act) in mdp.actions[s].iter().enumerate() {
                        let r = act
                            .rewards
                            .iter()
                            .zip(&powers)
                            .fold(T::zero(), |acc, (r, p)| acc + r.clone() * p.clone());
                        let value = r + mdp.expectation(s, a, &w);
                        if best.as_ref().is_none_or(|(_, b)| value > *b) {
                            best = Some((a, value));
                        }
                    }
                    let (a, value) = best.expect("non-empty action set");
                    row.push(a);
                    next.push(value);
                }
                prefix[j] = row;
                w = next;
            }
            Ok((w[start].clone(), CountingStrategy {
                kappa: horizon,
                prefix,
                tail,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(T, CountingStrategy)> = None;
    for (w, cs) in results {
        if best.as_ref().is_none_or(|(b, _)| w > *b) {
            best = Some((w, cs));
        }
    }
    let (best_welfare, strategy) = best.expect("at least one tail");
    Ok(CountingSearch {
        best_welfare,
        strategy,
        candidates: tails,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_counting;
    use crate::gen::builtin::{appendix_ex4, investment};
    use crate::gen::sat::{sat_reduction, CnfFormula};
    use crate::numeric::{int, rational, Rational};

    #[test]
    fn investment_positional() {
        let m = investment().numeric::<Rational>();
        let r = enumerate_positional(&m, 0, DEFAULT_CAP, true).unwrap();
        assert_eq!(r.best_welfare, rational(27, 2));
        assert_eq!(r.strategy, vec![0, 0]);
        assert_eq!(r.table.unwrap(), vec![rational(27, 2), int(13)]);
    }

    #[test]
    fn single_action_model() {
        let m = crate::gen::badly_spaced(3)
            .unwrap()
            .numeric::<Rational>();
        let r = enumerate_positional(&m, 1, DEFAULT_CAP, false).unwrap();
        assert_eq!(r.strategy.len(), 3);
    }

    #[test]
    fn cap_is_enforced() {
        let m = investment().numeric::<Rational>();
        assert!(matches!(
            enumerate_positional(&m, 0, 1, false),
            Err(Error::CapExceeded { cap: 1, .. })
        ));
    }

    #[test]
    fn investment_counting() {
        let m = investment().numeric::<Rational>();
        let r = enumerate_counting(&m, 0, 4, DEFAULT_CAP).unwrap();
        assert_eq!(r.best_welfare, rational(127, 9));
        // a, a, then b: s0 is never revisited, so its tail action is free.
        let s0: Vec<usize> = r.strategy.prefix.iter().map(|row| row[0]).collect();
        assert_eq!(s0[..3], [0, 0, 1]);
        assert_eq!(eval_counting(&m, &r.strategy).unwrap().welfare[0], r.best_welfare);
        let dp = counting_dp(&m, 0, 4, DEFAULT_CAP).unwrap();
        assert_eq!(dp.best_welfare, r.best_welfare);
    }

    #[test]
    fn zero_horizon_counting_is_positional() {
        let m = investment().numeric::<Rational>();
        let c = enumerate_counting(&m, 0, 0, DEFAULT_CAP).unwrap();
        let p = enumerate_positional(&m, 0, DEFAULT_CAP, false).unwrap();
        assert_eq!(c.best_welfare, p.best_welfare);
    }

    #[test]
    fn example_four_counting() {
        let m = appendix_ex4().numeric::<f64>();
        let r = enumerate_counting(&m, 0, 3, DEFAULT_CAP).unwrap();
        assert!((r.best_welfare - 122.33).abs() < 0.01);
    }

    #[test]
    fn threshold_decisions() {
        let m = investment().numeric::<Rational>();
        let d = threshold_decide_positional(&m, 0, Some(&int(13)), DEFAULT_CAP).unwrap();
        assert!(d.holds);
        assert_eq!(d.witness.unwrap().0, vec![0, 0]);
        let d = threshold_decide_positional(&m, 0, Some(&int(14)), DEFAULT_CAP).unwrap();
        assert!(!d.holds);
        let d = threshold_decide_positional(&m, 0, None, DEFAULT_CAP).unwrap();
        assert!(d.holds);
    }

    #[test]
    fn unsatisfiable_reduction_fails_threshold() {
        let f = CnfFormula::new(1, vec![[1, 1, 1], [-1, -1, -1]]).unwrap();
        let red = sat_reduction(&f);
        let m = red.model.numeric::<Rational>();
        let d = threshold_decide_positional(&m, 0, Some(&red.threshold), DEFAULT_CAP).unwrap();
        assert!(!d.holds);
    }

    #[test]
    fn start_payoffs_match_full_solve() {
        let m = appendix_ex4().numeric::<Rational>();
        let policy = vec![0, 1, 1, 0, 1, 0, 0];
        let full = crate::eval::eval_positional(&m, &policy).unwrap();
        assert_eq!(start_payoffs(&m, &policy, 0).unwrap(), full.at(0));
    }
}
