//! Strategy types and their JSON records.
//!
//! A strategy file holds exactly one of
//! `{"positional": [{"state", "action"}]}`,
//! `{"mixed": [{"state", "probs": [{"action", "prob"}]}]}` or
//! `{"kappa", "prefix": [{"step", "state", "action"}], "tail": [{"state", "action"}], "report"?}`.

use std::path::Path;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::format::Num;
use crate::model::AsymMdp;
use crate::numeric::{NumericMode, Rational};

/// One action index per state.
pub type Positional = Vec<usize>;

/// A per-state distribution over action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    pub probs: Vec<Vec<(usize, Rational)>>,
}

impl MixedStrategy {
    pub fn point(policy: &[usize]) -> Self {
        MixedStrategy {
            probs: policy.iter().map(|&a| vec![(a, Rational::one())]).collect(),
        }
    }

    /// Checks probabilities and action indices against `model`.
    pub fn check(&self, model: &AsymMdp, mode: NumericMode) -> Result<()> {
        if self.probs.len() != model.num_states() {
            return Err(Error::Argument(format!(
                "mixed strategy covers {} states, model has {}",
                self.probs.len(),
                model.num_states()
            )));
        }
        let tolerance = Rational::new(1.into(), 1_000_000_000_000u64.into());
        for (s, row) in self.probs.iter().enumerate() {
            let state = model.state_name(s).to_string();
            let mut sum = Rational::zero();
            for (a, p) in row {
                if *a >= model.states()[s].actions.len() {
                    return Err(Error::DisabledAction { state, action: *a });
                }
                if p.is_negative() || *p > Rational::one() {
                    return Err(Error::InvalidDistribution {
                        state,
                        reason: "probability outside [0,1]".into(),
                    });
                }
                sum += p;
            }
            let off = (sum - Rational::one()).abs();
            let bad = match mode {
                NumericMode::Exact => !off.is_zero(),
                NumericMode::Float { .. } => off > tolerance,
            };
            if bad {
                return Err(Error::InvalidDistribution {
                    state,
                    reason: "probabilities do not sum to 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// Plays `prefix[j][s]` at step `j < kappa`, then `tail[s]` forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingStrategy {
    pub kappa: usize,
    pub prefix: Vec<Vec<usize>>,
    pub tail: Vec<usize>,
}

impl CountingStrategy {
    pub fn positional(tail: Positional) -> Self {
        CountingStrategy {
            kappa: 0,
            prefix: Vec::new(),
            tail,
        }
    }

    pub fn action(&self, step: usize, state: usize) -> usize {
        if step < self.kappa {
            self.prefix[step][state]
        } else {
            self.tail[state]
        }
    }

    /// Actions along the most likely path from `start` (first successor
    /// on probability ties), for `steps` steps.
    pub fn likely_path(&self, model: &AsymMdp, start: usize, steps: usize) -> Vec<(usize, usize)> {
        let mut s = start;
        let mut out = Vec::with_capacity(steps);
        for j in 0..steps {
            let a = self.action(j, s);
            out.push((s, a));
            let mut best: Option<&crate::model::Transition> = None;
            for t in &model.states()[s].actions[a].transitions {
                if best.is_none_or(|b| t.prob > b.prob) {
                    best = Some(t);
                }
            }
            s = best.expect("non-empty row").to;
        }
        out
    }

    /// Number of leading steps on the most likely path from `start` whose
    /// action differs from the tail.
    pub fn waiting_time(&self, model: &AsymMdp, start: usize) -> usize {
        self.likely_path(model, start, self.kappa)
            .iter()
            .take_while(|(s, a)| *a != self.tail[*s])
            .count()
    }

    fn check(&self, model: &AsymMdp) -> Result<()> {
        let n = model.num_states();
        if self.tail.len() != n || self.prefix.len() != self.kappa || self.prefix.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("counting strategy shape does not match model".into()));
        }
        for row in self.prefix.iter().chain(std::iter::once(&self.tail)) {
            for (s, &a) in row.iter().enumerate() {
                if a >= model.states()[s].actions.len() {
                    return Err(Error::DisabledAction {
                        state: model.state_name(s).to_string(),
                        action: a,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Positional(Positional),
    Mixed(MixedStrategy),
    Counting(CountingStrategy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateAction {
    pub state: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixCell {
    pub step: usize,
    pub state: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionProb {
    pub action: String,
    pub prob: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMix {
    pub state: String,
    pub probs: Vec<ActionProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionalRecord {
    pub positional: Vec<StateAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedRecord {
    pub mixed: Vec<StateMix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingRecord {
    pub kappa: usize,
    pub prefix: Vec<PrefixCell>,
    pub tail: Vec<StateAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyRecord {
    Positional(PositionalRecord),
    Mixed(MixedRecord),
    Counting(CountingRecord),
}

fn lookup(model: &AsymMdp, state: &str, action: &str) -> Result<(usize, usize)> {
    let s = model.state_index(state)?;
    Ok((s, model.action_index(s, action)?))
}

fn positional_from(model: &AsymMdp, cells: &[StateAction]) -> Result<Positional> {
    let mut out: Vec<Option<usize>> = vec![None; model.num_states()];
    for c in cells {
        let (s, a) = lookup(model, &c.state, &c.action)?;
        out[s] = Some(a);
    }
    out.into_iter()
        .enumerate()
        .map(|(s, a)| {
            a.ok_or_else(|| Error::Argument(format!("no action given for state `{}`", model.state_name(s))))
        })
        .collect()
}

fn cells(model: &AsymMdp, policy: &[usize]) -> Vec<StateAction> {
    policy
        .iter()
        .enumerate()
        .map(|(s, &a)| StateAction {
            state: model.state_name(s).to_string(),
            action: model.action_name(s, a).to_string(),
        })
        .collect()
}

impl StrategyRecord {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!(
                "not a positional, mixed or counting strategy record ({e})"
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::model::format::read_text(path)?)
    }

    /// Resolves names against `model`. Counting prefix cells that are not
    /// listed default to the tail action.
    pub fn resolve(&self, model: &AsymMdp, mode: NumericMode) -> Result<Strategy> {
        match self {
            StrategyRecord::Positional(r) => Ok(Strategy::Positional(positional_from(model, &r.positional)?)),
            StrategyRecord::Mixed(r) => {
                let mut probs = vec![Vec::new(); model.num_states()];
                for mix in &r.mixed {
                    let s = model.state_index(&mix.state)?;
                    for p in &mix.probs {
                        probs[s].push((model.action_index(s, &p.action)?, p.prob.0.clone()));
                    }
                }
                let m = MixedStrategy { probs };
                m.check(model, mode)?;
                Ok(Strategy::Mixed(m))
            }
            StrategyRecord::Counting(r) => {
                let tail = positional_from(model, &r.tail)?;
                let mut prefix = vec![tail.clone(); r.kappa];
                for c in &r.prefix {
                    if c.step >= r.kappa {
                        return Err(Error::Argument(format!(
                            "prefix step {} not below kappa {}",
                            c.step, r.kappa
                        )));
                    }
                    let (s, a) = lookup(model, &c.state, &c.action)?;
                    prefix[c.step][s] = a;
                }
                let cs = CountingStrategy {
                    kappa: r.kappa,
                    prefix,
                    tail,
                };
                cs.check(model)?;
                Ok(Strategy::Counting(cs))
            }
        }
    }

    pub fn positional(model: &AsymMdp, policy: &[usize]) -> Self {
        StrategyRecord::Positional(PositionalRecord {
            positional: cells(model, policy),
        })
    }

    pub fn counting(model: &AsymMdp, cs: &CountingStrategy, report: Option<serde_json::Value>) -> Self {
        let prefix = cs
            .prefix
            .iter()
            .enumerate()
            .flat_map(|(step, row)| {
                row.iter().enumerate().map(move |(s, &a)| PrefixCell {
                    step,
                    state: model.state_name(s).to_string(),
                    action: model.action_name(s, a).to_string(),
                })
            })
            .collect();
        StrategyRecord::Counting(CountingRecord {
            kappa: cs.kappa,
            prefix,
            tail: cells(model, &cs.tail),
            report,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("strategy serializes");
        s.push('\n');
        s
    }
}
