//! Asymmetrically-discounted MDPs: data model, validation, principal
//! merging and the discount spacing diagnostic.
//!
//! States and actions are dense indices with a separate name table.
//! Actions inside a state are kept sorted by name, so "lowest action
//! index" everywhere in the crate means "lexicographically first name".
//! All numbers are stored as exact rationals; [`AsymMdp::numeric`]
//! converts into the backend chosen for a run.

pub mod format;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{format_rational, NumericMode, Rational, Scalar};

/// Row-sum tolerance applied in float mode.
pub const FLOAT_ROW_TOLERANCE: f64 = 1e-12;

/// Per-state sets of permitted action indices, each sorted ascending.
pub type ActionSets = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub to: usize,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    pub name: String,
    pub transitions: Vec<Transition>,
    /// One reward per principal.
    pub rewards: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpec {
    pub name: String,
    pub actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub name: String,
    pub discount: Rational,
}

/// A finite MDP shared by several principals, each with its own reward
/// and discount factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsymMdp {
    states: Vec<StateSpec>,
    principals: Vec<Principal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoStates,
    NoPrincipals,
    DuplicateState(String),
    DuplicateAction { state: String, action: String },
    NoActions { state: String },
    DiscountOutOfRange { principal: String, discount: Rational },
    DiscountsNotDescending { first: String, second: String },
    BadSuccessor { state: String, action: String, index: usize },
    ProbabilityOutOfRange { state: String, action: String, to: String, prob: Rational },
    RowSum { state: String, action: String, sum: Rational },
    RewardArity { state: String, action: String, found: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoStates => write!(f, "model has no states"),
            NoPrincipals => write!(f, "model has no principals"),
            DuplicateState(s) => write!(f, "duplicate state `{s}`"),
            DuplicateAction { state, action } => {
                write!(f, "duplicate action `{action}` in state `{state}`")
            }
            NoActions { state } => write!(f, "state `{state}` has no enabled action"),
            DiscountOutOfRange { principal, discount } => write!(
                f,
                "discount of principal `{principal}` is {}, outside (0,1)",
                format_rational(discount)
            ),
            DiscountsNotDescending { first, second } => write!(
                f,
                "discounts not strictly descending (`{first}` then `{second}`)"
            ),
            BadSuccessor { state, action, index } => {
                write!(f, "({state}, {action}): successor index {index} out of range")
            }
            ProbabilityOutOfRange {
                state,
                action,
                to,
                prob,
            } => write!(
                f,
                "({state}, {action}): probability {} to `{to}` outside (0,1]",
                format_rational(prob)
            ),
            RowSum { state, action, sum } => write!(
                f,
                "({state}, {action}): probabilities sum to {}",
                format_rational(sum)
            ),
            RewardArity {
                state,
                action,
                found,
                expected,
            } => write!(
                f,
                "({state}, {action}): {found} rewards given for {expected} principals"
            ),
        }
    }
}

/// Spacing diagnostic for one consecutive pair of discounts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingPair {
    pub index: usize,
    /// `1 / (λ_i / λ_{i+1} - 1)`.
    pub spacing: Rational,
    pub reasonably_spaced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingReport {
    pub bound: Rational,
    pub pairs: Vec<SpacingPair>,
}

impl SpacingReport {
    pub fn all_spaced(&self) -> bool {
        self.pairs.iter().all(|p| p.reasonably_spaced)
    }
}

impl AsymMdp {
    /// Assembles a model, sorting actions by name and merging duplicate
    /// successors. Empty reward lists are materialized as zeros; semantic
    /// checks are left to [`AsymMdp::validate`].
    pub fn from_parts(mut states: Vec<StateSpec>, principals: Vec<Principal>) -> Self {
        let n = principals.len();
        for state in &mut states {
            state.actions.sort_by(|a, b| a.name.cmp(&b.name));
            for action in &mut state.actions {
                if action.rewards.is_empty() {
                    action.rewards = vec![Rational::zero(); n];
                }
                let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
                for t in action.transitions.drain(..) {
                    *merged.entry(t.to).or_insert_with(Rational::zero) += t.prob;
                }
                action.transitions = merged
                    .into_iter()
                    .map(|(to, prob)| Transition { to, prob })
                    .collect();
            }
        }
        AsymMdp { states, principals }
    }

    pub fn states(&self) -> &[StateSpec] {
        &self.states
    }

    pub fn principals(&self) -> &[Principal] {
        &self.principals
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_principals(&self) -> usize {
        self.principals.len()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s].name
    }

    pub fn action_name(&self, s: usize, a: usize) -> &str {
        &self.states[s].actions[a].name
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn action_index(&self, state: usize, name: &str) -> Result<usize> {
        self.states[state]
            .actions
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAction {
                state: self.states[state].name.clone(),
                action: name.to_string(),
            })
    }

    pub fn discounts(&self) -> Vec<Rational> {
        self.principals.iter().map(|p| p.discount.clone()).collect()
    }

    /// Returns a copy with the principals' discounts replaced.
    pub fn with_discounts(&self, discounts: &[Rational]) -> Result<Self> {
        if discounts.len() != self.principals.len() {
            return Err(Error::WrongArity {
                expected: self.principals.len(),
                found: discounts.len(),
            });
        }
        let mut out = self.clone();
        for (p, d) in out.principals.iter_mut().zip(discounts) {
            p.discount = d.clone();
        }
        Ok(out)
    }

    /// Returns a copy with every reward of principal `i` replaced by `f(s, a, r)`.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, usize, usize, &Rational) -> Rational) -> Self {
        let mut out = self.clone();
        for (s, state) in out.states.iter_mut().enumerate() {
            for (a, action) in state.actions.iter_mut().enumerate() {
                for (i, r) in action.rewards.iter_mut().enumerate() {
                    *r = f(s, a, i, r);
                }
            }
        }
        out
    }

    /// All invariant violations; empty means valid.
    pub fn validate(&self, mode: NumericMode) -> Vec<Violation> {
        self.check(mode, false)
    }

    pub(crate) fn ensure_valid(&self, mode: NumericMode) -> Result<()> {
        let v = self.validate(mode);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    fn check(&self, mode: NumericMode, allow_ties: bool) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.states.is_empty() {
            out.push(Violation::NoStates);
        }
        if self.principals.is_empty() {
            out.push(Violation::NoPrincipals);
        }
        let mut seen = HashSet::new();
        for s in &self.states {
            if !seen.insert(s.name.as_str()) {
                out.push(Violation::DuplicateState(s.name.clone()));
            }
        }
        for p in &self.principals {
            if !p.discount.is_positive() || p.discount >= Rational::one() {
                out.push(Violation::DiscountOutOfRange {
                    principal: p.name.clone(),
                    discount: p.discount.clone(),
                });
            }
        }
        for w in self.principals.windows(2) {
            let ok = if allow_ties {
                w[0].discount >= w[1].discount
            } else {
                w[0].discount > w[1].discount
            };
            if !ok {
                out.push(Violation::DiscountsNotDescending {
                    first: w[0].name.clone(),
                    second: w[1].name.clone(),
                });
            }
        }
        let tolerance = Rational::from_f64(FLOAT_ROW_TOLERANCE);
        for state in &self.states {
            if state.actions.is_empty() {
                out.push(Violation::NoActions {
                    state: state.name.clone(),
                });
            }
            let mut names = HashSet::new();
            for action in &state.actions {
                if !names.insert(action.name.as_str()) {
                    out.push(Violation::DuplicateAction {
                        state: state.name.clone(),
                        action: action.name.clone(),
                    });
                }
                if action.rewards.len() != self.principals.len() {
                    out.push(Violation::RewardArity {
                        state: state.name.clone(),
                        action: action.name.clone(),
                        found: action.rewards.len(),
                        expected: self.principals.len(),
                    });
                }
                let mut sum = Rational::zero();
                for t in &action.transitions {
                    let Some(target) = self.states.get(t.to) else {
                        out.push(Violation::BadSuccessor {
                            state: state.name.clone(),
                            action: action.name.clone(),
                            index: t.to,
                        });
                        continue;
                    };
                    if !t.prob.is_positive() || t.prob > Rational::one() {
                        out.push(Violation::ProbabilityOutOfRange {
                            state: state.name.clone(),
                            action: action.name.clone(),
                            to: target.name.clone(),
                            prob: t.prob.clone(),
                        });
                    }
                    sum += &t.prob;
                }
                let off = (&sum - Rational::one()).abs();
                let bad = match mode {
                    NumericMode::Exact => !off.is_zero(),
                    NumericMode::Float { .. } => off > tolerance,
                };
                if bad {
                    out.push(Violation::RowSum {
                        state: state.name.clone(),
                        action: action.name.clone(),
                        sum,
                    });
                }
            }
        }
        out
    }

    /// Replaces principals sharing a discount by a single principal whose
    /// reward is the sum of theirs; the result is ordered by strictly
    /// descending discount. Strictly descending input is returned as is.
    pub fn merge_equal_discounts(&self) -> AsymMdp {
        if self
            .principals
            .windows(2)
            .all(|w| w[0].discount > w[1].discount)
        {
            return self.clone();
        }
        // Group indices by discount, most patient first.
        let mut groups: Vec<(Rational, Vec<usize>)> = Vec::new();
        for (i, p) in self.principals.iter().enumerate() {
            match groups.iter_mut().find(|(d, _)| *d == p.discount) {
                Some((_, members)) => members.push(i),
                None => groups.push((p.discount.clone(), vec![i])),
            }
        }
        groups.sort_by(|a, b| b.0.cmp(&a.0));
        let principals = groups
            .iter()
            .map(|(d, members)| Principal {
                name: members
                    .iter()
                    .map(|&i| self.principals[i].name.as_str())
                    .collect::<Vec<_>>()
                    .join("+"),
                discount: d.clone(),
            })
            .collect();
        let states = self
            .states
            .iter()
            .map(|state| StateSpec {
                name: state.name.clone(),
                actions: state
                    .actions
                    .iter()
                    .map(|action| ActionSpec {
                        name: action.name.clone(),
                        transitions: action.transitions.clone(),
                        rewards: groups
                            .iter()
                            .map(|(_, members)| {
                                members
                                    .iter()
                                    .map(|&i| action.rewards[i].clone())
                                    .fold(Rational::zero(), |acc, r| acc + r)
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        AsymMdp { states, principals }
    }

    /// Validation that tolerates tied discounts (input to merging).
    pub fn validate_allowing_ties(&self, mode: NumericMode) -> Vec<Violation> {
        self.check(mode, true)
    }

    /// Reports `1/(λ_i/λ_{i+1} - 1)` for each consecutive pair and whether
    /// it is within `bound`.
    pub fn spacing_report(&self, bound: &Rational) -> Result<SpacingReport> {
        let mut pairs = Vec::new();
        for (i, w) in self.principals.windows(2).enumerate() {
            let (hi, lo) = (&w[0].discount, &w[1].discount);
            if hi <= lo || !lo.is_positive() {
                return Err(Error::Invalid(vec![Violation::DiscountsNotDescending {
                    first: w[0].name.clone(),
                    second: w[1].name.clone(),
                }]));
            }
            let spacing = lo / (hi - lo);
            pairs.push(SpacingPair {
                index: i,
                reasonably_spaced: &spacing <= bound,
                spacing,
            });
        }
        Ok(SpacingReport {
            bound: bound.clone(),
            pairs,
        })
    }

    /// Converts into the numeric backend `T`.
    pub fn numeric<T: Scalar>(&self) -> NumericMdp<T> {
        NumericMdp {
            state_names: self.states.iter().map(|s| s.name.clone()).collect(),
            discounts: self
                .principals
                .iter()
                .map(|p| T::from_rational(&p.discount))
                .collect(),
            actions: self
                .states
                .iter()
                .map(|state| {
                    state
                        .actions
                        .iter()
                        .map(|a| NumAction {
                            successors: a
                                .transitions
                                .iter()
                                .map(|t| (t.to, T::from_rational(&t.prob)))
                                .collect(),
                            rewards: a.rewards.iter().map(T::from_rational).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// `(state, action, rewards, [(successor, probability)])` by name.
type NamedAction = (String, String, Vec<Rational>, Vec<(String, Rational)>);

/// Name-based builder used by generators, file loading and tests.
#[derive(Debug, Default, Clone)]
pub struct AsymMdpBuilder {
    states: Vec<String>,
    principals: Vec<Principal>,
    actions: Vec<NamedAction>,
}

impl AsymMdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(mut self, name: impl Into<String>) -> Self {
        self.states.push(name.into());
        self
    }

    pub fn states<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.states.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn principal(mut self, name: impl Into<String>, discount: Rational) -> Self {
        self.principals.push(Principal {
            name: name.into(),
            discount,
        });
        self
    }

    /// Adds an action; an empty `rewards` means all zero.
    pub fn action(
        mut self,
        state: impl Into<String>,
        action: impl Into<String>,
        rewards: Vec<Rational>,
        transitions: Vec<(impl Into<String>, Rational)>,
    ) -> Self {
        self.actions.push((
            state.into(),
            action.into(),
            rewards,
            transitions
                .into_iter()
                .map(|(t, p)| (t.into(), p))
                .collect(),
        ));
        self
    }

    pub fn push_action(
        &mut self,
        state: String,
        action: String,
        rewards: Vec<Rational>,
        transitions: Vec<(String, Rational)>,
    ) {
        self.actions.push((state, action, rewards, transitions));
    }

    pub fn build(self) -> Result<AsymMdp> {
        let index: HashMap<&str, usize> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut states: Vec<StateSpec> = self
            .states
            .iter()
            .map(|name| StateSpec {
                name: name.clone(),
                actions: Vec::new(),
            })
            .collect();
        for (state, action, rewards, transitions) in self.actions {
            let s = *index
                .get(state.as_str())
                .ok_or_else(|| Error::UnknownState(state.clone()))?;
            let transitions = transitions
                .into_iter()
                .map(|(to, prob)| {
                    index
                        .get(to.as_str())
                        .map(|&to| Transition { to, prob })
                        .ok_or(Error::UnknownState(to))
                })
                .collect::<Result<Vec<_>>>()?;
            states[s].actions.push(ActionSpec {
                name: action,
                transitions,
                rewards,
            });
        }
        Ok(AsymMdp::from_parts(states, self.principals))
    }
}

#[derive(Debug, Clone)]
pub struct NumAction<T> {
    pub successors: Vec<(usize, T)>,
    pub rewards: Vec<T>,
}

/// An [`AsymMdp`] converted into a numeric backend.
#[derive(Debug, Clone)]
pub struct NumericMdp<T> {
    pub state_names: Vec<String>,
    pub discounts: Vec<T>,
    pub actions: Vec<Vec<NumAction<T>>>,
}

impl<T: Scalar> NumericMdp<T> {
    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_principals(&self) -> usize {
        self.discounts.len()
    }

    pub fn all_actions(&self) -> ActionSets {
        self.actions.iter().map(|a| (0..a.len()).collect()).collect()
    }

    /// `Σ p(s'|s,a) v(s')`.
    pub fn expectation(&self, s: usize, a: usize, values: &[T]) -> T {
        self.actions[s][a]
            .successors
            .iter()
            .fold(T::zero(), |acc, (t, p)| acc + p.clone() * values[*t].clone())
    }

    /// `R(s,a,i) + λ_i Σ p(s'|s,a) v(s')`.
    pub fn q_value(&self, s: usize, a: usize, principal: usize, values: &[T]) -> T {
        self.actions[s][a].rewards[principal].clone()
            + self.discounts[principal].clone() * self.expectation(s, a, values)
    }

    /// Binary64 copy.
    pub fn to_float(&self) -> NumericMdp<f64> {
        NumericMdp {
            state_names: self.state_names.clone(),
            discounts: self.discounts.iter().map(Scalar::to_f64).collect(),
            actions: self
                .actions
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|a| NumAction {
                            successors: a.successors.iter().map(|(t, p)| (*t, p.to_f64())).collect(),
                            rewards: a.rewards.iter().map(Scalar::to_f64).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub(crate) fn check_action(&self, s: usize, a: usize) -> Result<()> {
        if a < self.actions[s].len() {
            Ok(())
        } else {
            Err(Error::DisabledAction {
                state: self.state_names[s].clone(),
                action: a,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::builtin::investment;
    use crate::numeric::{int, rational};

    #[test]
    fn investment_is_valid() {
        assert!(investment().validate(NumericMode::Exact).is_empty());
    }

    #[test]
    fn equal_discounts_are_reported() {
        let m = investment()
            .with_discounts(&[rational(1, 3), rational(1, 3)])
            .unwrap();
        let v = m.validate(NumericMode::Exact);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("discounts not strictly descending"));
    }

    #[test]
    fn short_row_names_state_and_action() {
        let m = AsymMdpBuilder::new()
            .states(["s0", "s1"])
            .principal("alice", rational(2, 3))
            .action("s0", "a", vec![int(3)], vec![("s0", int(1))])
            .action("s0", "b", vec![int(-1)], vec![("s1", rational(9, 10))])
            .action("s1", "b", vec![int(6)], vec![("s1", int(1))])
            .build()
            .unwrap();
        let v = m.validate(NumericMode::float());
        assert_eq!(v.len(), 1);
        let msg = v[0].to_string();
        assert!(msg.contains("(s0, b)"), "{msg}");
    }

    #[test]
    fn float_mode_tolerates_tiny_row_error() {
        let m = AsymMdpBuilder::new()
            .states(["s"])
            .principal("p", rational(1, 2))
            .action(
                "s",
                "x",
                vec![],
                vec![("s", Rational::one() - rational(1, 10i64.pow(14)))],
            )
            .build()
            .unwrap();
        assert!(m.validate(NumericMode::float()).is_empty());
        assert_eq!(m.validate(NumericMode::Exact).len(), 1);
    }

    #[test]
    fn missing_rewards_become_zero() {
        let m = AsymMdpBuilder::new()
            .states(["s"])
            .principal("p", rational(1, 2))
            .principal("q", rational(1, 3))
            .action("s", "x", vec![], vec![("s", int(1))])
            .build()
            .unwrap();
        assert_eq!(m.states()[0].actions[0].rewards, vec![int(0), int(0)]);
    }

    #[test]
    fn actions_sorted_by_name() {
        let m = AsymMdpBuilder::new()
            .states(["s"])
            .principal("p", rational(1, 2))
            .action("s", "z", vec![], vec![("s", int(1))])
            .action("s", "b", vec![], vec![("s", int(1))])
            .build()
            .unwrap();
        assert_eq!(m.action_name(0, 0), "b");
        assert_eq!(m.action_name(0, 1), "z");
    }

    #[test]
    fn merging_sums_tied_principals() {
        let m = AsymMdpBuilder::new()
            .states(["s"])
            .principal("a", rational(9, 10))
            .principal("b", rational(1, 2))
            .principal("c", rational(1, 2))
            .action("s", "x", vec![int(1), int(2), int(5)], vec![("s", int(1))])
            .build()
            .unwrap();
        assert!(m.validate_allowing_ties(NumericMode::Exact).is_empty());
        let merged = m.merge_equal_discounts();
        assert_eq!(merged.num_principals(), 2);
        assert_eq!(merged.principals()[1].name, "b+c");
        assert_eq!(merged.discounts(), vec![rational(9, 10), rational(1, 2)]);
        assert_eq!(merged.states()[0].actions[0].rewards, vec![int(1), int(7)]);
        assert!(merged.validate(NumericMode::Exact).is_empty());
    }

    #[test]
    fn merging_two_equal_principals() {
        let m = AsymMdpBuilder::new()
            .states(["s"])
            .principal("a", rational(1, 2))
            .principal("b", rational(1, 2))
            .action("s", "x", vec![int(3), int(4)], vec![("s", int(1))])
            .build()
            .unwrap();
        let merged = m.merge_equal_discounts();
        assert_eq!(merged.num_principals(), 1);
        assert_eq!(merged.states()[0].actions[0].rewards, vec![int(7)]);
    }

    #[test]
    fn merging_is_identity_on_descending_input() {
        let m = investment();
        assert_eq!(m.merge_equal_discounts(), m);
    }

    #[test]
    fn spacing_values() {
        let r = investment().spacing_report(&int(10)).unwrap();
        assert_eq!(r.pairs[0].spacing, int(1));
        assert!(r.all_spaced());

        let m = investment()
            .with_discounts(&[rational(9, 10), rational(3, 10)])
            .unwrap();
        let r = m.spacing_report(&int(10)).unwrap();
        assert_eq!(r.pairs[0].spacing, rational(1, 2));
        assert!(r.pairs[0].reasonably_spaced);
    }

    #[test]
    fn spacing_requires_descending() {
        let m = investment()
            .with_discounts(&[rational(1, 3), rational(2, 3)])
            .unwrap();
        assert!(m.spacing_report(&int(10)).is_err());
    }
}
