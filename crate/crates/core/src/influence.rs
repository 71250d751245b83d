//! Influence diagrams: conversion to a belief network with a normalized
//! binary value node, and decision-tree rollout with branch and bound.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compiler::{aggregate, DEFAULT_MAX_CLUSTER_STATES};
use crate::engine::{Session, SessionOptions};
use crate::error::{Error, Result};
use crate::model::{validate, BeliefNetwork, Cpt, Evidence, Finding, Quantification, Variable};

/// Default cap on decision-tree leaves.
pub const DEFAULT_MAX_LEAVES: u64 = 1_000_000;

/// Values of the converted value node; index 1 is the "hit" outcome.
pub const VALUE_STATES: [&str; 2] = ["miss", "hit"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceNode {
    pub variable: Variable,
    /// Chance or decision nodes, by name.
    pub parents: Vec<String>,
    pub quantification: Quantification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub name: String,
    pub alternatives: Vec<String>,
    /// Nodes observed before this decision is made.
    #[serde(default)]
    pub informed_by: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNode {
    pub name: String,
    pub parents: Vec<String>,
    /// Utilities over the parents' joint states, row-major, first parent most significant.
    pub table: Vec<f64>,
}

/// Decisions are made in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceDiagram {
    pub name: String,
    pub chance: Vec<ChanceNode>,
    pub decisions: Vec<DecisionNode>,
    pub value: ValueNode,
}

/// `utility = offset + range * P(hit)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityScale {
    pub offset: f64,
    pub range: f64,
}

impl UtilityScale {
    pub fn to_utility(&self, scaled: f64) -> f64 {
        self.offset + self.range * scaled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub decision: String,
    /// Observed chance values and earlier decisions at the time of choice.
    pub information: BTreeMap<String, String>,
    pub action: String,
    /// Conditional expected utility of the chosen action, original units.
    pub expected_utility: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutStats {
    /// Leaves evaluated.
    pub paths_expanded: u64,
    /// Alternative subtrees skipped by the bound.
    pub paths_pruned: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub diagram: String,
    pub expected_utility: f64,
    /// Entries for every information state reachable under the policy.
    pub policy: Vec<PolicyEntry>,
    pub stats: RolloutStats,
    /// Set when the utility table is constant and no rollout was done.
    #[serde(default)]
    pub degenerate: bool,
}

impl PolicyResult {
    /// Action taken at the first information state recorded for `decision`.
    pub fn action(&self, decision: &str) -> Option<&str> {
        self.policy
            .iter()
            .find(|e| e.decision == decision)
            .map(|e| e.action.as_str())
    }
}

/// A policy to evaluate without maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Same alternative regardless of observations.
    Fixed(BTreeMap<String, String>),
    /// Per information state, as returned by [`solve`].
    Table(Vec<PolicyEntry>),
    /// Every alternative with equal probability.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub prune: bool,
    pub max_leaves: u64,
    pub max_cluster_states: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            prune: true,
            max_leaves: DEFAULT_MAX_LEAVES,
            max_cluster_states: DEFAULT_MAX_CLUSTER_STATES,
        }
    }
}

enum Kind {
    Chance(usize),
    Decision(usize),
}

impl InfluenceDiagram {
    fn kind_of(&self, name: &str) -> Option<Kind> {
        if let Some(i) = self.chance.iter().position(|c| c.variable.name == name) {
            return Some(Kind::Chance(i));
        }
        self.decisions.iter().position(|d| d.name == name).map(Kind::Decision)
    }

    fn card_of(&self, name: &str) -> Option<usize> {
        match self.kind_of(name)? {
            Kind::Chance(i) => Some(self.chance[i].variable.cardinality()),
            Kind::Decision(i) => Some(self.decisions[i].alternatives.len()),
        }
    }

    /// Information sets with no-forgetting applied: each decision also sees
    /// everything earlier decisions saw, and the earlier decisions themselves.
    pub fn information_sets(&self) -> Vec<Vec<String>> {
        let mut out = Vec::with_capacity(self.decisions.len());
        let mut acc: Vec<String> = Vec::new();
        for (k, d) in self.decisions.iter().enumerate() {
            if k > 0 {
                let prev = self.decisions[k - 1].name.clone();
                if !acc.contains(&prev) {
                    acc.push(prev);
                }
            }
            for o in &d.informed_by {
                if !acc.contains(o) {
                    acc.push(o.clone());
                }
            }
            out.push(acc.clone());
        }
        out
    }

    fn structure_errors(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        let all = self
            .chance
            .iter()
            .map(|c| c.variable.name.as_str())
            .chain(self.decisions.iter().map(|d| d.name.as_str()))
            .chain(std::iter::once(self.value.name.as_str()));
        for n in all {
            if !names.insert(n) {
                return Err(Error::DuplicateName {
                    name: n.to_string(),
                    span: None,
                });
            }
        }
        let resolve = |name: &str, context: String| {
            self.kind_of(name).map(|_| ()).ok_or_else(|| Error::UnresolvedReference {
                name: name.to_string(),
                context,
                span: None,
            })
        };
        for c in &self.chance {
            for p in &c.parents {
                resolve(p, format!("parents of `{}`", c.variable.name))?;
            }
        }
        for d in &self.decisions {
            if d.alternatives.len() < 2 {
                return Err(Error::Invalid(format!("decision `{}` needs at least 2 alternatives", d.name)));
            }
            for o in &d.informed_by {
                resolve(o, format!("information set of `{}`", d.name))?;
            }
        }
        for p in &self.value.parents {
            resolve(p, format!("parents of `{}`", self.value.name))?;
        }
        let expected: usize = self.value.parents.iter().map(|p| self.card_of(p).unwrap_or(1)).product();
        if self.value.table.len() != expected {
            return Err(Error::ArityMismatch {
                context: format!("utility table of `{}`", self.value.name),
                expected,
                found: self.value.table.len(),
            });
        }
        if self.value.table.iter().any(|u| !u.is_finite()) {
            return Err(Error::Invalid("utilities must be finite".into()));
        }
        // the causal arcs plus the no-forgetting information arcs must be acyclic
        let idx: BTreeMap<&str, usize> = self
            .chance
            .iter()
            .map(|c| c.variable.name.as_str())
            .chain(self.decisions.iter().map(|d| d.name.as_str()))
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect();
        let n = idx.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, c) in self.chance.iter().enumerate() {
            preds[i] = c.parents.iter().map(|p| idx[p.as_str()]).collect();
        }
        for (k, info) in self.information_sets().into_iter().enumerate() {
            preds[self.chance.len() + k] = info.iter().map(|p| idx[p.as_str()]).collect();
        }
        if order_from_preds(&preds).is_none() {
            return Err(Error::Invalid(format!(
                "diagram `{}` is cyclic once information arcs are included",
                self.name
            )));
        }
        Ok(())
    }

    /// Checks structure and converts; the converted network is validated too.
    pub fn validate(&self) -> Result<()> {
        match self.to_belief_network() {
            Ok(_) | Err(Error::DegenerateUtility(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Converts to a belief network: decisions become uniform roots and the
    /// value node a binary node with `P(hit | parents) = (U - min) / (max - min)`.
    pub fn to_belief_network(&self) -> Result<(BeliefNetwork, UtilityScale)> {
        self.structure_errors()?;
        let lo = self.value.table.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.value.table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return Err(Error::DegenerateUtility(lo));
        }
        let scale = UtilityScale {
            offset: lo,
            range: hi - lo,
        };
        let mut net = BeliefNetwork::new(self.name.clone());
        for d in &self.decisions {
            let labels: Vec<&str> = d.alternatives.iter().map(String::as_str).collect();
            let k = labels.len();
            net.add_node(Variable::new(d.name.clone(), &labels), &[], Quantification::Prior(vec![1.0 / k as f64; k]))?;
        }
        let preds: Vec<Vec<usize>> = self
            .chance
            .iter()
            .map(|c| {
                c.parents
                    .iter()
                    .filter_map(|p| self.chance.iter().position(|o| &o.variable.name == p))
                    .collect()
            })
            .collect();
        let order = order_from_preds(&preds).ok_or_else(|| Error::Invalid("chance nodes are cyclic".into()))?;
        for i in order {
            let c = &self.chance[i];
            let parents: Vec<&str> = c.parents.iter().map(String::as_str).collect();
            net.add_node(c.variable.clone(), &parents, c.quantification.clone())?;
        }
        let rows: Vec<Vec<f64>> = self
            .value
            .table
            .iter()
            .map(|u| {
                let s = (u - lo) / scale.range;
                vec![1.0 - s, s]
            })
            .collect();
        let parents: Vec<&str> = self.value.parents.iter().map(String::as_str).collect();
        let cards: Vec<usize> = self.value.parents.iter().map(|p| self.card_of(p).unwrap_or(1)).collect();
        let quant = if parents.is_empty() {
            Quantification::Prior(rows[0].clone())
        } else {
            Quantification::Cpt(Cpt::from_rows(&cards, &rows)?)
        };
        net.add_node(Variable::new(self.value.name.clone(), &VALUE_STATES), &parents, quant)?;
        let diags = validate(&net);
        if !diags.is_empty() {
            return Err(Error::Compile(diags));
        }
        Ok((net, scale))
    }

    /// Chance nodes first observed before each decision (evidence excluded).
    fn observation_schedule(&self, evidence: &Evidence) -> Vec<Vec<String>> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        self.information_sets()
            .into_iter()
            .map(|info| {
                info.into_iter()
                    .filter(|n| matches!(self.kind_of(n), Some(Kind::Chance(_))))
                    .filter(|n| evidence.get(n).is_none())
                    .filter(|n| seen.insert(n.clone()))
                    .collect()
            })
            .collect()
    }

    fn leaf_count(&self, schedule: &[Vec<String>]) -> u128 {
        let mut count: u128 = 1;
        for (d, obs) in self.decisions.iter().zip(schedule) {
            for o in obs {
                count = count.saturating_mul(self.card_of(o).unwrap_or(1) as u128);
            }
            count = count.saturating_mul(d.alternatives.len() as u128);
        }
        count
    }
}

/// Kahn order preferring lower indices; `None` on a cycle.
fn order_from_preds(preds: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = preds.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !placed[i] && preds[i].iter().all(|&p| placed[p]))?;
        placed[next] = true;
        order.push(next);
    }
    Some(order)
}

struct Rollout<'a> {
    diagram: &'a InfluenceDiagram,
    schedule: Vec<Vec<String>>,
    value: String,
    prune: bool,
    stats: RolloutStats,
}

enum Chooser<'p> {
    Maximize,
    Follow(&'p Policy),
}

/// Expected scaled utility of a subtree plus the policy entries on it.
struct Outcome {
    value: f64,
    entries: Vec<PolicyEntry>,
}

impl Rollout<'_> {
    fn leaf(&mut self, session: &Session) -> Result<f64> {
        self.stats.paths_expanded += 1;
        Ok(session.belief(&self.value)?[1])
    }

    /// Branches on the pending observations of stage `k`, then decides.
    fn observe(
        &mut self,
        session: &Session,
        k: usize,
        pending: &[String],
        info: &mut BTreeMap<String, String>,
        chooser: &Chooser<'_>,
        scale: UtilityScale,
    ) -> Result<Outcome> {
        let Some((var, rest)) = pending.split_first() else {
            return self.decide(session, k, info, chooser, scale);
        };
        let labels = match self.diagram.kind_of(var) {
            Some(Kind::Chance(i)) => self.diagram.chance[i].variable.values.clone(),
            _ => unreachable!("only chance nodes are scheduled"),
        };
        let belief = session.belief(var)?;
        let mut total = 0.0;
        let mut entries = Vec::new();
        for (x, p) in belief.into_iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let mut branch = session.clone();
            branch.assert_evidence(var, Finding::Instantiated(labels[x].clone()))?;
            info.insert(var.clone(), labels[x].clone());
            let sub = self.observe(&branch, k, rest, info, chooser, scale)?;
            info.remove(var);
            total += p * sub.value;
            entries.extend(sub.entries);
        }
        Ok(Outcome { value: total, entries })
    }

    fn decide(
        &mut self,
        session: &Session,
        k: usize,
        info: &mut BTreeMap<String, String>,
        chooser: &Chooser<'_>,
        scale: UtilityScale,
    ) -> Result<Outcome> {
        if k == self.diagram.decisions.len() {
            return Ok(Outcome {
                value: self.leaf(session)?,
                entries: Vec::new(),
            });
        }
        let decision = &self.diagram.decisions[k];
        let weights: Vec<f64> = match chooser {
            Chooser::Maximize => vec![0.0; decision.alternatives.len()],
            Chooser::Follow(policy) => policy_weights(policy, decision, info)?,
        };
        let mut best: Option<(usize, Outcome)> = None;
        let mut mixed = 0.0;
        let mut mixed_entries = Vec::new();
        let mut any = false;
        for (a, alt) in decision.alternatives.iter().enumerate() {
            if let Chooser::Follow(_) = chooser {
                if weights[a] == 0.0 {
                    continue;
                }
            }
            if let (Chooser::Maximize, true, Some((_, b))) = (chooser, self.prune, &best) {
                // optimistic bound: the whole conditional mass reaching the top utility
                if 1.0 <= b.value {
                    self.stats.paths_pruned += 1;
                    continue;
                }
            }
            let mut branch = session.clone();
            match branch.assert_evidence(&decision.name, Finding::Instantiated(alt.clone())) {
                Ok(_) => {}
                Err(Error::InconsistentEvidence) => continue,
                Err(e) => return Err(e),
            }
            any = true;
            info.insert(decision.name.clone(), alt.clone());
            let pending = self.schedule.get(k + 1).cloned().unwrap_or_default();
            let sub = self.observe(&branch, k + 1, &pending, info, chooser, scale)?;
            info.remove(&decision.name);
            match chooser {
                Chooser::Maximize => {
                    if best.as_ref().is_none_or(|(_, b)| sub.value > b.value) {
                        best = Some((a, sub));
                    }
                }
                Chooser::Follow(_) => {
                    mixed += weights[a] * sub.value;
                    mixed_entries.extend(sub.entries);
                }
            }
        }
        if !any {
            return Err(Error::InconsistentEvidence);
        }
        match chooser {
            Chooser::Maximize => {
                let (a, sub) = best.expect("at least one alternative evaluated");
                let mut entries = vec![PolicyEntry {
                    decision: decision.name.clone(),
                    information: info.clone(),
                    action: decision.alternatives[a].clone(),
                    expected_utility: scale.to_utility(sub.value),
                }];
                entries.extend(sub.entries);
                Ok(Outcome {
                    value: sub.value,
                    entries,
                })
            }
            Chooser::Follow(_) => Ok(Outcome {
                value: mixed,
                entries: mixed_entries,
            }),
        }
    }
}

fn policy_weights(policy: &Policy, decision: &DecisionNode, info: &BTreeMap<String, String>) -> Result<Vec<f64>> {
    let k = decision.alternatives.len();
    let pick = |alt: &str| -> Result<Vec<f64>> {
        let a = decision
            .alternatives
            .iter()
            .position(|x| x == alt)
            .ok_or_else(|| Error::UnknownValue {
                node: decision.name.clone(),
                value: alt.to_string(),
            })?;
        let mut w = vec![0.0; k];
        w[a] = 1.0;
        Ok(w)
    };
    match policy {
        Policy::Uniform => Ok(vec![1.0 / k as f64; k]),
        Policy::Fixed(map) => {
            let alt = map
                .get(&decision.name)
                .ok_or_else(|| Error::Invalid(format!("policy has no action for `{}`", decision.name)))?;
            pick(alt)
        }
        Policy::Table(entries) => {
            let entry = entries
                .iter()
                .find(|e| e.decision == decision.name && &e.information == info)
                .ok_or_else(|| {
                    Error::Invalid(format!("policy has no entry for `{}` in state {:?}", decision.name, info))
                })?;
            pick(&entry.action)
        }
    }
}

fn prepare(diagram: &InfluenceDiagram, evidence: &Evidence, options: &SolveOptions) -> Result<(Session, UtilityScale)> {
    let (net, scale) = diagram.to_belief_network()?;
    for (node, _) in evidence.iter() {
        if diagram.decisions.iter().any(|d| &d.name == node) {
            return Err(Error::InvalidFinding {
                node: node.clone(),
                reason: "decisions cannot carry evidence".into(),
            });
        }
    }
    let compiled = aggregate(&net, options.max_cluster_states)?;
    let mut session = Session::new(Arc::new(compiled), SessionOptions::default());
    for (node, finding) in evidence.iter() {
        session.assert_evidence(node, finding.clone())?;
    }
    Ok((session, scale))
}

fn constant_utility(diagram: &InfluenceDiagram) -> Result<Option<f64>> {
    match diagram.to_belief_network() {
        Err(Error::DegenerateUtility(u)) => Ok(Some(u)),
        Err(e) => Err(e),
        Ok(_) => Ok(None),
    }
}

/// Finds the policy maximizing expected utility given the evidence.
pub fn solve(diagram: &InfluenceDiagram, evidence: &Evidence, options: &SolveOptions) -> Result<PolicyResult> {
    if let Some(u) = constant_utility(diagram)? {
        return Ok(PolicyResult {
            diagram: diagram.name.clone(),
            expected_utility: u,
            policy: Vec::new(),
            stats: RolloutStats::default(),
            degenerate: true,
        });
    }
    let (session, scale) = prepare(diagram, evidence, options)?;
    let schedule = diagram.observation_schedule(evidence);
    let count = diagram.leaf_count(&schedule);
    if count > options.max_leaves as u128 {
        return Err(Error::TooManyPaths {
            count,
            cap: options.max_leaves,
        });
    }
    let mut rollout = Rollout {
        diagram,
        value: diagram.value.name.clone(),
        prune: options.prune,
        stats: RolloutStats::default(),
        schedule,
    };
    let first = rollout.schedule.first().cloned().unwrap_or_default();
    let outcome = rollout.observe(&session, 0, &first, &mut BTreeMap::new(), &Chooser::Maximize, scale)?;
    Ok(PolicyResult {
        diagram: diagram.name.clone(),
        expected_utility: scale.to_utility(outcome.value),
        policy: outcome.entries,
        stats: rollout.stats,
        degenerate: false,
    })
}

/// Expected utility of a given policy, original units.
pub fn evaluate_policy(diagram: &InfluenceDiagram, policy: &Policy, evidence: &Evidence) -> Result<f64> {
    if let Some(u) = constant_utility(diagram)? {
        return Ok(u);
    }
    let options = SolveOptions {
        prune: false,
        ..SolveOptions::default()
    };
    let (session, scale) = prepare(diagram, evidence, &options)?;
    let mut rollout = Rollout {
        diagram,
        value: diagram.value.name.clone(),
        prune: false,
        stats: RolloutStats::default(),
        schedule: diagram.observation_schedule(evidence),
    };
    let first = rollout.schedule.first().cloned().unwrap_or_default();
    let outcome = rollout.observe(&session, 0, &first, &mut BTreeMap::new(), &Chooser::Follow(policy), scale)?;
    Ok(scale.to_utility(outcome.value))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// D in {d1,d2}; C in {c1,c2} with P(c1) = 0.6, unobserved; U(d1,c1)=10, U(d1,c2)=0, U(d2,.)=5.
    pub fn one_shot() -> InfluenceDiagram {
        InfluenceDiagram {
            name: "one_shot".into(),
            chance: vec![ChanceNode {
                variable: Variable::new("C", &["c1", "c2"]),
                parents: vec![],
                quantification: Quantification::Prior(vec![0.6, 0.4]),
            }],
            decisions: vec![DecisionNode {
                name: "D".into(),
                alternatives: vec!["d1".into(), "d2".into()],
                informed_by: vec![],
            }],
            value: ValueNode {
                name: "U".into(),
                parents: vec!["D".into(), "C".into()],
                table: vec![10.0, 0.0, 5.0, 5.0],
            },
        }
    }
}
