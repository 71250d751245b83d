//! Canonical interaction models and their expansion into dense tensors.
//!
//! Value order is the dominance order: index 0 is the least ("absent")
//! state and the last index dominates. For the binary gates index 1 is
//! "present"; for `bool` gates index 1 is "true".

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cpt, Variable, NORMALIZATION_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    NoisyOr,
    NoisyAnd,
    NoisyMax,
    NoisyMin,
    Bool,
}

impl GateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GateKind::NoisyOr => "noisy_or",
            GateKind::NoisyAnd => "noisy_and",
            GateKind::NoisyMax => "noisy_max",
            GateKind::NoisyMin => "noisy_min",
            GateKind::Bool => "bool",
        }
    }
}

/// Parameters of a canonical gate, indexed by parent position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateSpec {
    /// `P(absent | u) = (1 - leak) * prod_{i: u_i present} (1 - c_i)`.
    NoisyOr { strengths: Vec<f64>, leak: f64 },
    /// De Morgan dual: each absent parent independently breaks the effect
    /// with probability `c_i`; `leak` is the chance of a spontaneous break.
    NoisyAnd { strengths: Vec<f64>, leak: f64 },
    /// Each parent in state `s` draws a candidate from `tables[i][s]`; the
    /// child is the dominance-maximum of all candidates and the leak draw.
    NoisyMax {
        tables: Vec<Vec<Vec<f64>>>,
        leak: Option<Vec<f64>>,
    },
    /// As `NoisyMax` with the minimum.
    NoisyMin {
        tables: Vec<Vec<Vec<f64>>>,
        leak: Option<Vec<f64>>,
    },
    /// Deterministic: child is "true" (index 1) exactly when the expression holds.
    Bool { expr: BoolExpr },
}

/// Boolean expression over parent value tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolExpr {
    Const(bool),
    Is { node: String, value: String },
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn is<N: Into<String>, V: Into<String>>(node: N, value: V) -> Self {
        BoolExpr::Is {
            node: node.into(),
            value: value.into(),
        }
    }

    /// Every `(node, value)` test appearing in the expression.
    pub fn atoms(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Is { node, value } => out.push((node, value)),
            BoolExpr::Not(e) => e.collect_atoms(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    /// Evaluates with `lookup(node, value)` answering each atomic test.
    pub fn eval<F: Fn(&str, &str) -> bool + Copy>(&self, lookup: F) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Is { node, value } => lookup(node, value),
            BoolExpr::Not(e) => !e.eval(lookup),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(lookup)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(lookup)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(_) => 1,
            BoolExpr::And(_) => 2,
            BoolExpr::Not(_) => 3,
            _ => 4,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let paren = self.precedence() < ctx;
        if paren {
            f.write_str("(")?;
        }
        match self {
            BoolExpr::Const(b) => write!(f, "{b}")?,
            BoolExpr::Is { node, value } => write!(f, "{node} = {value}")?,
            BoolExpr::Not(e) => {
                f.write_str("!")?;
                e.write_prec(f, 3)?;
            }
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                let (sep, child_ctx) = if matches!(self, BoolExpr::And(_)) {
                    (" & ", 3)
                } else {
                    (" | ", 2)
                };
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    e.write_prec(f, child_ctx)?;
                }
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

fn arity(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ArityMismatch {
            context: context.to_string(),
            expected,
            found,
        })
    }
}

fn check_strength(what: &str, c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::UnnormalizedParameter(format!("{what} {c} outside [0, 1]")))
    }
}

fn check_dist(what: &str, dist: &[f64], card: usize) -> Result<()> {
    arity(what, card, dist.len())?;
    let sum: f64 = dist.iter().sum();
    if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::UnnormalizedParameter(format!("{what} {dist:?} is not a distribution")));
    }
    Ok(())
}

/// `F(k) = sum_{j<=k} dist[j]`.
pub(crate) fn cdf(dist: &[f64]) -> Vec<f64> {
    dist.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

impl GateSpec {
    pub fn kind(&self) -> GateKind {
        match self {
            GateSpec::NoisyOr { .. } => GateKind::NoisyOr,
            GateSpec::NoisyAnd { .. } => GateKind::NoisyAnd,
            GateSpec::NoisyMax { .. } => GateKind::NoisyMax,
            GateSpec::NoisyMin { .. } => GateKind::NoisyMin,
            GateSpec::Bool { .. } => GateKind::Bool,
        }
    }

    /// Checks the parameters against the parent and child variables.
    pub fn check(&self, parents: &[&Variable], child: &Variable) -> Result<()> {
        let kind = self.kind().keyword();
        match self {
            GateSpec::NoisyOr { strengths, leak } | GateSpec::NoisyAnd { strengths, leak } => {
                arity(&format!("{kind} parameters"), parents.len(), strengths.len())?;
                for v in parents.iter().copied().chain([child]) {
                    arity(&format!("{kind} variable `{}` (binary only)", v.name), 2, v.cardinality())?;
                }
                strengths.iter().try_for_each(|&c| check_strength("strength", c))?;
                check_strength("leak", *leak)
            }
            GateSpec::NoisyMax { tables, leak } | GateSpec::NoisyMin { tables, leak } => {
                arity(&format!("{kind} parameters"), parents.len(), tables.len())?;
                for (table, parent) in tables.iter().zip(parents) {
                    arity(&format!("{kind} rows for `{}`", parent.name), parent.cardinality(), table.len())?;
                    for row in table {
                        check_dist(&format!("{kind} row for `{}`", parent.name), row, child.cardinality())?;
                    }
                }
                match leak {
                    Some(l) => check_dist(&format!("{kind} leak"), l, child.cardinality()),
                    None => Ok(()),
                }
            }
            GateSpec::Bool { expr } => {
                arity(&format!("bool child `{}` (binary only)", child.name), 2, child.cardinality())?;
                for (node, value) in expr.atoms() {
                    let var = parents.iter().find(|p| p.name == node).ok_or_else(|| {
                        Error::UnresolvedReference {
                            name: node.to_string(),
                            context: format!("bool gate of `{}`", child.name),
                            span: None,
                        }
                    })?;
                    if var.value_index(value).is_none() {
                        return Err(Error::UnknownValue {
                            node: node.to_string(),
                            value: value.to_string(),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// `P(child = state | parents = parent_states)` from the gate's closed form.
    pub fn probability(&self, parents: &[&Variable], child: &Variable, parent_states: &[usize], state: usize) -> f64 {
        match self {
            GateSpec::NoisyOr { strengths, leak } => {
                let absent = parent_states
                    .iter()
                    .zip(strengths)
                    .filter(|(&s, _)| s == 1)
                    .fold(1.0 - leak, |acc, (_, c)| acc * (1.0 - c));
                if state == 0 {
                    absent
                } else {
                    1.0 - absent
                }
            }
            GateSpec::NoisyAnd { strengths, leak } => {
                let present = parent_states
                    .iter()
                    .zip(strengths)
                    .filter(|(&s, _)| s == 0)
                    .fold(1.0 - leak, |acc, (_, c)| acc * (1.0 - c));
                if state == 1 {
                    present
                } else {
                    1.0 - present
                }
            }
            GateSpec::NoisyMax { tables, leak } => {
                let k = child.cardinality();
                let below = |level: usize| -> f64 {
                    let lk = leak.as_ref().map_or(1.0, |l| l[..=level].iter().sum());
                    tables
                        .iter()
                        .zip(parent_states)
                        .fold(lk, |acc, (t, &s)| acc * t[s][..=level].iter().sum::<f64>())
                };
                let hi = below(state);
                let lo = if state == 0 { 0.0 } else { below(state - 1) };
                debug_assert!(state < k);
                (hi - lo).max(0.0)
            }
            GateSpec::NoisyMin { tables, leak } => {
                let k = child.cardinality();
                let above = |level: usize| -> f64 {
                    let lk = leak.as_ref().map_or(1.0, |l| l[level..].iter().sum());
                    tables
                        .iter()
                        .zip(parent_states)
                        .fold(lk, |acc, (t, &s)| acc * t[s][level..].iter().sum::<f64>())
                };
                let hi = above(state);
                let lo = if state + 1 == k { 0.0 } else { above(state + 1) };
                (hi - lo).max(0.0)
            }
            GateSpec::Bool { expr } => {
                let holds = expr.eval(|node, value| {
                    parents
                        .iter()
                        .zip(parent_states)
                        .find(|(p, _)| p.name == node)
                        .is_some_and(|(p, &s)| p.values[s] == value)
                });
                if (state == 1) == holds {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Expands a gate into its full conditional probability tensor.
pub fn expand_gate(gate: &GateSpec, parents: &[&Variable], child: &Variable) -> Result<Cpt> {
    gate.check(parents, child)?;
    let parent_cards: Vec<usize> = parents.iter().map(|p| p.cardinality()).collect();
    let rows: usize = parent_cards.iter().product();
    let k = child.cardinality();
    let mut data = Vec::with_capacity(rows * k);
    let mut states = vec![0usize; parents.len()];
    for _ in 0..rows {
        for x in 0..k {
            data.push(gate.probability(parents, child, &states, x));
        }
        for axis in (0..states.len()).rev() {
            states[axis] += 1;
            if states[axis] < parent_cards[axis] {
                break;
            }
            states[axis] = 0;
        }
    }
    let mut shape = parent_cards;
    shape.push(k);
    Cpt::new(shape, data)
}
