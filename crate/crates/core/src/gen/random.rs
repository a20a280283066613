//! Seeded random MDPs.
//!
//! The generator is xoshiro256** seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). A bounded draw in `0..n` is
//! `(next_u64 * n) >> 64` computed in 128 bits. For each state in order,
//! and each action in order, the generator draws:
//!
//! 1. the successor count `k` uniformly from the configured range
//!    (upper end clipped to the number of states);
//! 2. `k` distinct successors by a partial Fisher-Yates shuffle of `0..|S|`;
//! 3. one integer weight in `1..=1000` per successor; probabilities are the
//!    weights divided by their sum, kept as exact rationals;
//! 4. one reward per principal, `lo + (hi - lo) * u / 20000` with `u` in `0..=20000`.
//!
//! Names are zero-padded (`s007`, `a1`, `p03`) so lexicographic order
//! matches numeric order.

use num_traits::{One, Zero};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::model::{ActionSpec, AsymMdp, Principal, StateSpec, Transition};
use crate::numeric::{int, rational, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum DiscountScheme {
    Explicit(Vec<Rational>),
    /// `λ_i = hi - i (hi - lo) / (n - 1)`.
    ArithmeticProgression { hi: Rational, lo: Rational },
}

impl DiscountScheme {
    /// Progression from 0.99 down to 0.05.
    pub fn progression() -> Self {
        DiscountScheme::ArithmeticProgression {
            hi: rational(99, 100),
            lo: rational(5, 100),
        }
    }

    pub fn discounts(&self, n: usize) -> Result<Vec<Rational>> {
        match self {
            DiscountScheme::Explicit(list) if list.len() == n => Ok(list.clone()),
            DiscountScheme::Explicit(list) => Err(Error::InfeasibleConfig(format!(
                "{} discounts given for {n} principals",
                list.len()
            ))),
            DiscountScheme::ArithmeticProgression { hi, lo } => {
                if n == 1 {
                    return Ok(vec![hi.clone()]);
                }
                let step = (hi - lo) / int(n as i64 - 1);
                Ok((0..n).map(|i| hi - &step * int(i as i64)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpConfig {
    pub num_states: usize,
    pub actions_per_state: usize,
    pub num_principals: usize,
    pub scheme: DiscountScheme,
    /// Inclusive successor-count range.
    pub successors: (usize, usize),
    /// Inclusive reward range.
    pub reward_range: (Rational, Rational),
    pub seed: u64,
}

impl RandomMdpConfig {
    pub fn new(num_states: usize, actions_per_state: usize, scheme: DiscountScheme, num_principals: usize, seed: u64) -> Self {
        RandomMdpConfig {
            num_states,
            actions_per_state,
            num_principals,
            scheme,
            successors: (1, 3),
            reward_range: (int(-10), int(10)),
            seed,
        }
    }
}

struct Draw(Xoshiro256StarStar);

impl Draw {
    fn below(&mut self, n: usize) -> usize {
        ((u128::from(self.0.next_u64()) * n as u128) >> 64) as usize
    }
}

fn width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len()
}

pub fn random_mdp(cfg: &RandomMdpConfig) -> Result<AsymMdp> {
    let n = cfg.num_states;
    if n == 0 || cfg.actions_per_state == 0 || cfg.num_principals == 0 {
        return Err(Error::InfeasibleConfig(
            "need at least one state, action and principal".into(),
        ));
    }
    let (kmin, kmax) = cfg.successors;
    if kmin == 0 || kmin > kmax {
        return Err(Error::InfeasibleConfig(format!("bad successor range {kmin}..{kmax}")));
    }
    if kmin > n {
        return Err(Error::InfeasibleConfig(format!(
            "{kmin} distinct successors requested with only {n} states"
        )));
    }
    let kmax = kmax.min(n);
    let (lo, hi) = &cfg.reward_range;
    if lo > hi {
        return Err(Error::InfeasibleConfig("empty reward range".into()));
    }
    let discounts = cfg.scheme.discounts(cfg.num_principals)?;
    let zero = Rational::zero();
    if discounts.iter().any(|d| *d <= zero || *d >= Rational::one())
        || discounts.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(Error::InfeasibleConfig(
            "discounts must lie in (0,1) and strictly descend".into(),
        ));
    }

    let mut rng = Draw(Xoshiro256StarStar::seed_from_u64(cfg.seed));
    let (sw, aw, pw) = (width(n), width(cfg.actions_per_state), width(cfg.num_principals));
    let span = hi - lo;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut states = Vec::with_capacity(n);
    for s in 0..n {
        let mut actions = Vec::with_capacity(cfg.actions_per_state);
        for a in 0..cfg.actions_per_state {
            let k = kmin + rng.below(kmax - kmin + 1);
            for i in 0..k {
                let j = i + rng.below(n - i);
                pool.swap(i, j);
            }
            let weights: Vec<i64> = (0..k).map(|_| 1 + rng.below(1000) as i64).collect();
            let total: i64 = weights.iter().sum();
            let transitions = pool[..k]
                .iter()
                .zip(&weights)
                .map(|(&to, &w)| Transition {
                    to,
                    prob: rational(w, total),
                })
                .collect();
            let rewards = (0..cfg.num_principals)
                .map(|_| lo + &span * rational(rng.below(20_001) as i64, 20_000))
                .collect();
            actions.push(ActionSpec {
                name: format!("a{a:0aw$}"),
                transitions,
                rewards,
            });
        }
        states.push(StateSpec {
            name: format!("s{s:0sw$}"),
            actions,
        });
    }
    let principals = discounts
        .into_iter()
        .enumerate()
        .map(|(i, discount)| Principal {
            name: format!("p{i:0pw$}"),
            discount,
        })
        .collect();
    Ok(AsymMdp::from_parts(states, principals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::format;
    use crate::numeric::NumericMode;

    fn cfg(seed: u64) -> RandomMdpConfig {
        RandomMdpConfig::new(30, 2, DiscountScheme::Explicit(vec![rational(9, 10), rational(3, 10)]), 2, seed)
    }

    #[test]
    fn deterministic_per_seed() {
        let a = format::to_string(&random_mdp(&cfg(7)).unwrap().into());
        let b = format::to_string(&random_mdp(&cfg(7)).unwrap().into());
        let c = format::to_string(&random_mdp(&cfg(8)).unwrap().into());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn output_is_valid() {
        let m = random_mdp(&cfg(1)).unwrap();
        assert!(m.validate(NumericMode::Exact).is_empty());
        for state in m.states() {
            for a in &state.actions {
                assert!((1..=3).contains(&a.transitions.len()));
                for r in &a.rewards {
                    assert!(*r >= int(-10) && *r <= int(10));
                }
            }
        }
    }

    #[test]
    fn progression_discounts() {
        assert_eq!(
            DiscountScheme::progression().discounts(2).unwrap(),
            vec![rational(99, 100), rational(5, 100)]
        );
        let d = DiscountScheme::progression().discounts(101).unwrap();
        assert_eq!(d[100], rational(5, 100));
        assert!(d.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn infeasible_configs() {
        let mut c = cfg(0);
        c.num_states = 1;
        c.successors = (2, 3);
        assert!(matches!(random_mdp(&c), Err(Error::InfeasibleConfig(_))));
        let mut c = cfg(0);
        c.scheme = DiscountScheme::Explicit(vec![rational(1, 2)]);
        assert!(random_mdp(&c).is_err());
        let mut c = cfg(0);
        c.scheme = DiscountScheme::Explicit(vec![rational(1, 2), rational(1, 2)]);
        assert!(random_mdp(&c).is_err());
    }

    #[test]
    fn single_state_clips_successor_range() {
        let mut c = cfg(3);
        c.num_states = 1;
        let m = random_mdp(&c).unwrap();
        assert!(m.validate(NumericMode::Exact).is_empty());
    }
}
