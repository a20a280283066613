//! Exact evaluation of positional, mixed-stationary and counting strategies.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::NumericMdp;
use crate::numeric::{PolicySystem, Rational, Scalar};
use crate::solve::evaluate_policy;
use crate::strategy::CountingStrategy;

/// Discounted payoffs for every principal and start state.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoffs<T> {
    /// `per_principal[i][s]`.
    pub per_principal: Vec<Vec<T>>,
    /// Social welfare per start state.
    pub welfare: Vec<T>,
}

impl<T: Scalar> Payoffs<T> {
    fn from_columns(per_principal: Vec<Vec<T>>, num_states: usize) -> Self {
        let welfare = (0..num_states)
            .map(|s| per_principal.iter().fold(T::zero(), |acc, v| acc + v[s].clone()))
            .collect();
        Payoffs { per_principal, welfare }
    }

    /// Per-principal payoffs from start state `s`.
    pub fn at(&self, s: usize) -> Vec<T> {
        self.per_principal.iter().map(|v| v[s].clone()).collect()
    }
}

fn check_policy<T: Scalar>(mdp: &NumericMdp<T>, policy: &[usize]) -> Result<()> {
    for (s, &a) in policy.iter().enumerate() {
        mdp.check_action(s, a)?;
    }
    Ok(())
}

pub fn eval_positional<T: Scalar>(mdp: &NumericMdp<T>, policy: &[usize]) -> Result<Payoffs<T>> {
    check_policy(mdp, policy)?;
    let columns = (0..mdp.num_principals())
        .into_par_iter()
        .map(|i| evaluate_policy(mdp, policy, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Payoffs::from_columns(columns, mdp.num_states()))
}

/// `mixed[s]` lists `(action, probability)`; validate with
/// [`crate::strategy::MixedStrategy::check`] first.
pub fn eval_stationary_mixed<T: Scalar>(mdp: &NumericMdp<T>, mixed: &[Vec<(usize, Rational)>]) -> Result<Payoffs<T>> {
    for (s, row) in mixed.iter().enumerate() {
        for (a, _) in row {
            mdp.check_action(s, *a)?;
        }
    }
    let mixed: Vec<Vec<(usize, T)>> = mixed
        .iter()
        .map(|row| row.iter().map(|(a, p)| (*a, T::from_rational(p))).collect())
        .collect();
    let rows: Vec<Vec<(usize, T)>> = mixed
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let mut dense: Vec<(usize, T)> = Vec::new();
            for (a, p) in row {
                for (t, q) in &mdp.actions[s][*a].successors {
                    let w = p.clone() * q.clone();
                    match dense.iter_mut().find(|(u, _)| u == t) {
                        Some((_, acc)) => *acc = acc.clone() + w,
                        None => dense.push((*t, w)),
                    }
                }
            }
            dense
        })
        .collect();
    let columns = (0..mdp.num_principals())
        .into_par_iter()
        .map(|i| {
            let rhs = mixed
                .iter()
                .enumerate()
                .map(|(s, row)| {
                    row.iter().fold(T::zero(), |acc, (a, p)| {
                        acc + p.clone() * mdp.actions[s][*a].rewards[i].clone()
                    })
                })
                .collect();
            T::solve_policy_system(&PolicySystem {
                rows: rows.clone(),
                rhs,
                discount: mdp.discounts[i].clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Payoffs::from_columns(columns, mdp.num_states()))
}

/// Payoffs of a counting strategy from every start state.
///
/// Layer `κ` holds the tail's positional values; each earlier layer adds
/// one step of prefix reward: `W_i(s,j) = R(s,π_j(s),i) + λ_i Σ p W_i(s',j+1)`.
pub fn eval_counting<T: Scalar>(mdp: &NumericMdp<T>, cs: &CountingStrategy) -> Result<Payoffs<T>> {
    for row in &cs.prefix {
        check_policy(mdp, row)?;
    }
    let tail = eval_positional(mdp, &cs.tail)?;
    let columns = tail
        .per_principal
        .into_par_iter()
        .enumerate()
        .map(|(i, mut w)| {
            for j in (0..cs.kappa).rev() {
                w = (0..mdp.num_states())
                    .map(|s| {
                        let a = cs.prefix[j][s];
                        mdp.actions[s][a].rewards[i].clone()
                            + mdp.discounts[i].clone() * mdp.expectation(s, a, &w)
                    })
                    .collect();
            }
            w
        })
        .collect();
    Ok(Payoffs::from_columns(columns, mdp.num_states()))
}
