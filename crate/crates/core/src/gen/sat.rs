//! 3-CNF formulas, DIMACS input and the 3-SAT to social-welfare reduction.
//!
//! For `n` variables and `m` clauses the model has states `s0`, `top`,
//! `bot`, `C<i>`, `C<i>'` (clauses), `V<x>` (variables) and one state per
//! literal, `x<k>` and `~x<k>`. From `s0` a single action branches
//! uniformly to every `C<i>` and `V<x>`. A clause state moves to its
//! primed copy, which picks one of the clause's literals; a variable state
//! picks `x<k>` or `~x<k>`. Literal states choose `a_top` (reward -1) or
//! `a_bot` (reward +1); `top` pays +1 and `bot` pays -1 forever.
//!
//! Literals reached after two steps ("short" paths, through `V<x>`) prefer
//! `bot`; literals reached after three ("long", through a clause) prefer
//! `top`. The threshold `(m c_long + n c_short) / (m + n)` is met exactly by
//! strategies where every variable state picks a literal sent to `bot` and
//! every clause picks one sent to `top`, i.e. by satisfying assignments.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::format::{Document, Num, ReductionMeta};
use crate::model::{AsymMdp, AsymMdpBuilder};
use crate::numeric::{int, rational, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<[i64; 3]>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<[i64; 3]>) -> Result<Self> {
        for c in &clauses {
            for &l in c {
                if l == 0 || l.unsigned_abs() as usize > num_vars {
                    return Err(Error::Argument(format!(
                        "literal {l} outside 1..={num_vars}"
                    )));
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
    }

    /// Truth-table satisfiability check.
    pub fn satisfiable(&self) -> bool {
        assert!(self.num_vars < 32, "truth table too large");
        (0u32..1 << self.num_vars).any(|bits| {
            let assignment: Vec<bool> = (0..self.num_vars).map(|v| bits >> v & 1 == 1).collect();
            self.satisfied_by(&assignment)
        })
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            out.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        out
    }
}

/// Parses DIMACS CNF; every clause must have exactly three literals.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut start_line = 0;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Dimacs {
                line: line_no,
                message: "expected `p cnf <vars> <clauses>`".into(),
            };
            if header.is_some() {
                return Err(Error::Dimacs {
                    line: line_no,
                    message: "duplicate header".into(),
                });
            }
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(bad());
            }
            let v = parts[2].parse().map_err(|_| bad())?;
            let c = parts[3].parse().map_err(|_| bad())?;
            header = Some((v, c));
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(Error::Dimacs {
                line: line_no,
                message: "clause before `p cnf` header".into(),
            });
        };
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| Error::Dimacs {
                line: line_no,
                message: format!("bad literal `{tok}`"),
            })?;
            if current.is_empty() {
                start_line = line_no;
            }
            if lit == 0 {
                if current.len() != 3 {
                    return Err(Error::Dimacs {
                        line: start_line,
                        message: format!("clause has {} literals, expected 3", current.len()),
                    });
                }
                clauses.push([current[0], current[1], current[2]]);
                current.clear();
            } else {
                if lit.unsigned_abs() as usize > num_vars {
                    return Err(Error::Dimacs {
                        line: line_no,
                        message: format!("literal {lit} exceeds variable count {num_vars}"),
                    });
                }
                current.push(lit);
            }
        }
    }
    let Some((num_vars, num_clauses)) = header else {
        return Err(Error::Dimacs {
            line: last_line,
            message: "missing `p cnf` header".into(),
        });
    };
    if !current.is_empty() {
        return Err(Error::Dimacs {
            line: start_line,
            message: "clause not terminated by 0".into(),
        });
    }
    if clauses.len() != num_clauses {
        return Err(Error::Dimacs {
            line: last_line,
            message: format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        });
    }
    CnfFormula::new(num_vars, clauses)
}

fn literal_state(lit: i64) -> String {
    if lit > 0 {
        format!("x{lit}")
    } else {
        format!("~x{}", -lit)
    }
}

fn literal_action(lit: i64) -> String {
    format!("a_{}", literal_state(lit))
}

/// Welfare contributions of reaching a literal after `depth` steps and then
/// choosing `top` or `bot`, for rewards scaled by `signs` per principal.
#[derive(Debug, Clone, PartialEq)]
pub struct PathValues {
    pub short_top: Rational,
    pub short_bot: Rational,
    pub long_top: Rational,
    pub long_bot: Rational,
}

pub fn path_values(discounts: &[Rational; 2], signs: [i64; 2]) -> PathValues {
    // Literal reward at step k, sink reward from step k+1 on.
    let value = |k: u64, literal: i64, sink: i64| {
        discounts
            .iter()
            .zip(signs)
            .fold(Rational::zero(), |acc, (l, sign)| {
                let own = int(literal) * l.powu(k) + int(sink) * l.powu(k + 1) / (Rational::one() - l);
                acc + int(sign) * own
            })
    };
    PathValues {
        short_top: value(2, -1, 1),
        short_bot: value(2, 1, -1),
        long_top: value(3, -1, 1),
        long_bot: value(3, 1, -1),
    }
}

/// Reduction output.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub model: AsymMdp,
    pub threshold: Rational,
    pub formula: CnfFormula,
    pub variant: String,
}

impl Reduction {
    pub fn document(&self) -> Document {
        Document {
            model: self.model.clone(),
            reduction: Some(ReductionMeta {
                variant: self.variant.clone(),
                threshold: Num(self.threshold.clone()),
                num_vars: self.formula.num_vars,
                clauses: self.formula.clauses.clone(),
            }),
        }
    }

    pub fn decode(&self, policy: &[usize]) -> Result<Vec<bool>> {
        decode_assignment(&self.model, self.formula.num_vars, policy)
    }
}

/// Variable `k` is true iff literal state `x<k>` picks `a_top`.
pub fn decode_assignment(model: &AsymMdp, num_vars: usize, policy: &[usize]) -> Result<Vec<bool>> {
    (1..=num_vars)
        .map(|k| {
            let s = model.state_index(&literal_state(k as i64))?;
            Ok(model.action_name(s, policy[s]) == "a_top")
        })
        .collect()
}

pub const STANDARD_DISCOUNTS: (i64, i64, i64, i64) = (27, 50, 2, 5);
pub const ZERO_SUM_DISCOUNTS: (i64, i64, i64, i64) = (9, 20, 3, 10);

fn threshold_for(discounts: &[Rational; 2], signs: [i64; 2], formula: &CnfFormula) -> Result<Rational> {
    let v = path_values(discounts, signs);
    if v.short_bot <= v.short_top || v.long_top <= v.long_bot {
        return Err(Error::InfeasibleConfig(
            "discounts do not separate short and long paths".into(),
        ));
    }
    let (n, m) = (formula.num_vars as i64, formula.clauses.len() as i64);
    Ok((int(m) * v.long_top + int(n) * v.short_bot) / int(n + m))
}

fn build(formula: &CnfFormula, discounts: [Rational; 2], signs: [i64; 2]) -> AsymMdp {
    let n = formula.num_vars;
    let m = formula.clauses.len();
    let reward = |r: i64| vec![int(signs[0] * r), int(signs[1] * r)];
    let mut states = vec!["s0".to_string(), "top".into(), "bot".into()];
    states.extend((1..=m).map(|i| format!("C{i}")));
    states.extend((1..=m).map(|i| format!("C{i}'")));
    states.extend((1..=n).map(|k| format!("V{k}")));
    for k in 1..=n as i64 {
        states.push(literal_state(k));
        states.push(literal_state(-k));
    }
    let mut b = AsymMdpBuilder::new()
        .states(states)
        .principal("p0", discounts[0].clone())
        .principal("p1", discounts[1].clone());
    let branch = rational(1, (n + m) as i64);
    let targets: Vec<(String, Rational)> = (1..=m)
        .map(|i| format!("C{i}"))
        .chain((1..=n).map(|k| format!("V{k}")))
        .map(|s| (s, branch.clone()))
        .collect();
    b.push_action("s0".into(), "down".into(), reward(0), targets);
    b.push_action("top".into(), "stay".into(), reward(1), vec![("top".into(), int(1))]);
    b.push_action("bot".into(), "stay".into(), reward(-1), vec![("bot".into(), int(1))]);
    for (i, clause) in formula.clauses.iter().enumerate() {
        let c = format!("C{}", i + 1);
        let primed = format!("{c}'");
        b.push_action(c, "down".into(), reward(0), vec![(primed.clone(), int(1))]);
        let mut lits = clause.to_vec();
        lits.sort();
        lits.dedup();
        for lit in lits {
            b.push_action(primed.clone(), literal_action(lit), reward(0), vec![(literal_state(lit), int(1))]);
        }
    }
    for k in 1..=n as i64 {
        for lit in [k, -k] {
            b.push_action(format!("V{k}"), literal_action(lit), reward(0), vec![(literal_state(lit), int(1))]);
            b.push_action(literal_state(lit), "a_top".into(), reward(-1), vec![("top".into(), int(1))]);
            b.push_action(literal_state(lit), "a_bot".into(), reward(1), vec![("bot".into(), int(1))]);
        }
    }
    b.build().expect("reduction is well-formed")
}

fn pair((a, b, c, d): (i64, i64, i64, i64)) -> [Rational; 2] {
    [rational(a, b), rational(c, d)]
}

/// Builds the reduction model (identical rewards, discounts 0.54 and 0.4)
/// and its welfare threshold.
pub fn sat_reduction(formula: &CnfFormula) -> Reduction {
    let discounts = pair(STANDARD_DISCOUNTS);
    Reduction {
        threshold: threshold_for(&discounts, [1, 1], formula).expect("standard discounts separate paths"),
        model: build(formula, discounts, [1, 1]),
        formula: formula.clone(),
        variant: "standard".into(),
    }
}

/// Zero-sum version (experimental): principal 0 receives the negated
/// rewards, principal 1 the original ones, with discounts 0.45 and 0.3 so
/// that short and long paths still prefer opposite sinks.
pub fn zero_sum_variant(reduction: &Reduction) -> Result<Reduction> {
    let arity = reduction.model.num_principals();
    if arity != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            found: arity,
        });
    }
    let discounts = pair(ZERO_SUM_DISCOUNTS);
    let model = reduction
        .model
        .map_rewards(|_, _, i, r| if i == 0 { -r.clone() } else { r.clone() })
        .with_discounts(&discounts)?;
    Ok(Reduction {
        threshold: threshold_for(&discounts, [-1, 1], &reduction.formula)?,
        model,
        formula: reduction.formula.clone(),
        variant: "zero-sum".into(),
    })
}
