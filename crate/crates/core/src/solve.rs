//! Single-principal discounted MDP solving on a restricted action set.

use crate::error::{Error, Result};
use crate::model::{ActionSets, NumericMdp};
use crate::numeric::{PolicySystem, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    PolicyIteration,
    ValueIteration,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pi" => Ok(Method::PolicyIteration),
            "vi" => Ok(Method::ValueIteration),
            _ => Err(format!("unknown method `{s}` (expected pi or vi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub method: Method,
    /// Value-iteration stopping tolerance.
    pub vi_tolerance: f64,
    pub vi_max_iterations: usize,
    pub pi_max_iterations: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::PolicyIteration,
            vi_tolerance: 1e-9,
            vi_max_iterations: 1_000_000,
            pi_max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<T> {
    pub values: Vec<T>,
    pub discount: T,
    pub principal: usize,
}

/// `q[s]` lists `(action, q(s,a))` for every permitted action of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    pub q: Vec<Vec<(usize, T)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub values: ValueVector<T>,
    pub q: QTable<T>,
    pub policy: Vec<usize>,
}

/// Solves `v(s) = max_{a ∈ allowed(s)} r_i(s,a) + λ_i Σ p v` for principal `i`.
pub fn solve_discounted<T: Scalar>(
    mdp: &NumericMdp<T>,
    allowed: &ActionSets,
    principal: usize,
    config: &SolveConfig,
) -> Result<Solution<T>> {
    for (s, acts) in allowed.iter().enumerate() {
        if acts.is_empty() {
            return Err(Error::Invariant(format!(
                "restriction leaves state `{}` without actions",
                mdp.state_names[s]
            )));
        }
    }
    let values = match config.method {
        Method::PolicyIteration => {
            let start = greedy_on_reward(mdp, allowed, principal);
            policy_iteration(mdp, allowed, principal, start, config)?.0
        }
        Method::ValueIteration if T::EXACT => {
            // Locate the optimum in floating point, then certify it exactly.
            let approx = mdp.to_float();
            let v = value_iteration(&approx, allowed, principal, config)?;
            let start = greedy(&approx, allowed, principal, &v);
            policy_iteration(mdp, allowed, principal, start, config)?.0
        }
        Method::ValueIteration => value_iteration(mdp, allowed, principal, config)?,
    };
    let q = q_table(mdp, allowed, principal, &values);
    let policy = greedy(mdp, allowed, principal, &values);
    Ok(Solution {
        values: ValueVector {
            values,
            discount: mdp.discounts[principal].clone(),
            principal,
        },
        q,
        policy,
    })
}

/// Actions whose Q-value attains the state value: exactly in exact mode,
/// within `tie_tolerance` otherwise. Never empty.
pub fn optimal_action_set<T: Scalar>(q: &QTable<T>, v: &ValueVector<T>, tie_tolerance: &T) -> ActionSets {
    q.q.iter()
        .enumerate()
        .map(|(s, row)| {
            let best = row
                .iter()
                .map(|(_, x)| x.clone())
                .reduce(T::max_of)
                .expect("non-empty action row");
            // Compare against the larger of v(s) and the row maximum so the set is never empty.
            let reference = T::max_of(best, v.values[s].clone());
            let mut set: Vec<usize> = row
                .iter()
                .filter(|(_, x)| {
                    if T::EXACT {
                        *x == reference
                    } else {
                        *x >= reference.clone() - tie_tolerance.clone()
                    }
                })
                .map(|(a, _)| *a)
                .collect();
            if set.is_empty() {
                set.push(row[0].0);
            }
            set
        })
        .collect()
}

/// Solves the linear system of a positional policy for one principal.
pub fn evaluate_policy<T: Scalar>(mdp: &NumericMdp<T>, policy: &[usize], principal: usize) -> Result<Vec<T>> {
    let system = PolicySystem {
        rows: policy
            .iter()
            .enumerate()
            .map(|(s, &a)| mdp.actions[s][a].successors.clone())
            .collect(),
        rhs: policy
            .iter()
            .enumerate()
            .map(|(s, &a)| mdp.actions[s][a].rewards[principal].clone())
            .collect(),
        discount: mdp.discounts[principal].clone(),
    };
    T::solve_policy_system(&system)
}

pub fn q_table<T: Scalar>(mdp: &NumericMdp<T>, allowed: &ActionSets, principal: usize, values: &[T]) -> QTable<T> {
    QTable {
        q: allowed
            .iter()
            .enumerate()
            .map(|(s, acts)| {
                acts.iter()
                    .map(|&a| (a, mdp.q_value(s, a, principal, values)))
                    .collect()
            })
            .collect(),
    }
}

/// Bellman residual `max_s |max_a q(s,a) - v(s)|`.
pub fn bellman_residual<T: Scalar>(mdp: &NumericMdp<T>, allowed: &ActionSets, principal: usize, values: &[T]) -> T {
    let q = q_table(mdp, allowed, principal, values);
    q.q.iter()
        .enumerate()
        .map(|(s, row)| {
            let best = row.iter().map(|(_, x)| x.clone()).reduce(T::max_of).unwrap();
            (best - values[s].clone()).abs()
        })
        .fold(T::zero(), T::max_of)
}

fn greedy_on_reward<T: Scalar>(mdp: &NumericMdp<T>, allowed: &ActionSets, principal: usize) -> Vec<usize> {
    allowed
        .iter()
        .enumerate()
        .map(|(s, acts)| argmax(acts.iter().map(|&a| (a, mdp.actions[s][a].rewards[principal].clone()))))
        .collect()
}

/// Greedy policy w.r.t. `values`; lowest action index among exact ties.
fn greedy<T: Scalar>(mdp: &NumericMdp<T>, allowed: &ActionSets, principal: usize, values: &[T]) -> Vec<usize> {
    allowed
        .iter()
        .enumerate()
        .map(|(s, acts)| argmax(acts.iter().map(|&a| (a, mdp.q_value(s, a, principal, values)))))
        .collect()
}

fn argmax<T: Scalar>(items: impl Iterator<Item = (usize, T)>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (a, x) in items {
        match &best {
            Some((_, b)) if x <= *b => {}
            _ => best = Some((a, x)),
        }
    }
    best.expect("non-empty action set").0
}

fn policy_iteration<T: Scalar>(
    mdp: &NumericMdp<T>,
    allowed: &ActionSets,
    principal: usize,
    mut policy: Vec<usize>,
    config: &SolveConfig,
) -> Result<(Vec<T>, Vec<usize>)> {
    for _ in 0..config.pi_max_iterations {
        let values = evaluate_policy(mdp, &policy, principal)?;
        let mut changed = false;
        for (s, acts) in allowed.iter().enumerate() {
            let current = mdp.q_value(s, policy[s], principal, &values);
            let margin = if T::EXACT {
                T::zero()
            } else {
                T::from_f64(1e-12) * (T::one() + current.abs())
            };
            let mut best = (policy[s], current.clone());
            for &a in acts {
                let q = mdp.q_value(s, a, principal, &values);
                if q > best.1 {
                    best = (a, q);
                }
            }
            if best.0 != policy[s] && best.1 > current + margin {
                policy[s] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok((values, policy));
        }
    }
    Err(Error::Invariant(format!(
        "policy iteration exceeded {} rounds",
        config.pi_max_iterations
    )))
}

fn value_iteration<T: Scalar>(
    mdp: &NumericMdp<T>,
    allowed: &ActionSets,
    principal: usize,
    config: &SolveConfig,
) -> Result<Vec<T>> {
    let lambda = mdp.discounts[principal].to_f64();
    let stop = config.vi_tolerance * (1.0 - lambda) / (2.0 * lambda);
    let mut v = vec![T::zero(); mdp.num_states()];
    for _ in 0..config.vi_max_iterations {
        let next: Vec<T> = allowed
            .iter()
            .enumerate()
            .map(|(s, acts)| {
                acts.iter()
                    .map(|&a| mdp.q_value(s, a, principal, &v))
                    .reduce(T::max_of)
                    .unwrap()
            })
            .collect();
        let residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
            .fold(0.0, f64::max);
        v = next;
        if residual < stop {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence {
        iterations: config.vi_max_iterations,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::builtin::investment;
    use crate::numeric::{int, rational, Rational};

    fn exact() -> NumericMdp<Rational> {
        investment().numeric()
    }

    #[test]
    fn alice_unrestricted() {
        let m = exact();
        let sol = solve_discounted(&m, &m.all_actions(), 0, &SolveConfig::default()).unwrap();
        assert_eq!(sol.values.values, vec![int(11), int(18)]);
        assert_eq!(sol.policy, vec![1, 0]);
        let set = optimal_action_set(&sol.q, &sol.values, &int(0));
        assert_eq!(set, vec![vec![1], vec![0]]);
        let q_a = &sol.q.q[0][0].1;
        assert_eq!(*q_a, rational(31, 3));
    }

    #[test]
    fn bob_unrestricted_and_restricted() {
        let m = exact();
        let sol = solve_discounted(&m, &m.all_actions(), 1, &SolveConfig::default()).unwrap();
        assert_eq!(sol.values.values[0], rational(9, 2));
        let restricted = vec![vec![1], vec![0]];
        let sol = solve_discounted(&m, &restricted, 1, &SolveConfig::default()).unwrap();
        assert_eq!(sol.values.values[0], int(2));
    }

    #[test]
    fn value_iteration_matches_in_both_modes() {
        let cfg = SolveConfig {
            method: Method::ValueIteration,
            ..SolveConfig::default()
        };
        let m = exact();
        let sol = solve_discounted(&m, &m.all_actions(), 0, &cfg).unwrap();
        assert_eq!(sol.values.values, vec![int(11), int(18)]);

        let f: NumericMdp<f64> = investment().numeric();
        let sol = solve_discounted(&f, &f.all_actions(), 0, &cfg).unwrap();
        assert!((sol.values.values[0] - 11.0).abs() < 2e-9);
        assert!(bellman_residual(&f, &f.all_actions(), 0, &sol.values.values) < 1e-9);
    }

    #[test]
    fn value_iteration_cap_is_reported() {
        let cfg = SolveConfig {
            method: Method::ValueIteration,
            vi_max_iterations: 3,
            ..SolveConfig::default()
        };
        let f: NumericMdp<f64> = investment().numeric();
        assert!(matches!(
            solve_discounted(&f, &f.all_actions(), 0, &cfg),
            Err(Error::NonConvergence { iterations: 3 })
        ));
    }

    #[test]
    fn identical_actions_are_both_optimal() {
        let m = crate::model::AsymMdpBuilder::new()
            .state("s")
            .principal("p", rational(1, 2))
            .action("s", "x", vec![int(1)], vec![("s", int(1))])
            .action("s", "y", vec![int(1)], vec![("s", int(1))])
            .build()
            .unwrap()
            .numeric::<Rational>();
        let sol = solve_discounted(&m, &m.all_actions(), 0, &SolveConfig::default()).unwrap();
        assert_eq!(optimal_action_set(&sol.q, &sol.values, &int(0)), vec![vec![0, 1]]);
    }

    #[test]
    fn float_tolerance_keeps_near_ties() {
        let q = QTable {
            q: vec![vec![(0, 1.0), (1, 1.0 - 1e-12)]],
        };
        let v = ValueVector {
            values: vec![1.0],
            discount: 0.5,
            principal: 0,
        };
        assert_eq!(optimal_action_set(&q, &v, &1e-9), vec![vec![0, 1]]);
        assert_eq!(optimal_action_set(&q, &v, &0.0), vec![vec![0]]);
    }

    #[test]
    fn empty_restriction_is_rejected() {
        let m = exact();
        assert!(solve_discounted(&m, &vec![vec![], vec![0]], 0, &SolveConfig::default()).is_err());
    }

    #[test]
    fn policy_value_matches_solution() {
        let m: NumericMdp<f64> = investment().numeric();
        let sol = solve_discounted(&m, &m.all_actions(), 1, &SolveConfig::default()).unwrap();
        let v = evaluate_policy(&m, &sol.policy, 1).unwrap();
        for (x, y) in v.iter().zip(&sol.values.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
