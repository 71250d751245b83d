//! Domain types shared by every module: variables, conditional probability
//! tensors, belief networks, evidence and belief tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::GateSpec;

/// Tolerance for every normalization check.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A discrete variable with an ordered list of value labels.
///
/// The order is significant: canonical gates treat the first value as the
/// least (absent) state and the last value as the most dominant one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: S, values: &[&str]) -> Self {
        Variable {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// Dense conditional probability tensor `P(x | u1..un)`.
///
/// Axis order is the parents in declaration order followed by the child;
/// storage is row-major so each child distribution is a contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Cpt {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != data.len() {
            return Err(Error::CorruptTensor(format!(
                "shape {:?} needs {} entries, found {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Cpt { shape, data })
    }

    /// Parentless table.
    pub fn prior(dist: Vec<f64>) -> Self {
        Cpt {
            shape: vec![dist.len()],
            data: dist,
        }
    }

    /// One row per parent configuration, first parent most significant.
    pub fn from_rows(parent_cards: &[usize], rows: &[Vec<f64>]) -> Result<Self> {
        let child = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut shape = parent_cards.to_vec();
        shape.push(child);
        if rows.iter().any(|r| r.len() != child) {
            return Err(Error::CorruptTensor("ragged CPT rows".into()));
        }
        Cpt::new(shape, rows.concat())
    }

    /// Shape and data agree; false only for tensors read from a damaged file.
    pub(crate) fn is_consistent(&self) -> bool {
        !self.shape.is_empty() && self.shape.iter().product::<usize>() == self.data.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn child_card(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.shape[..self.shape.len() - 1]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.child_card())
    }

    /// Flat row index of a parent configuration.
    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        parent_states
            .iter()
            .zip(self.parent_cards())
            .fold(0, |acc, (&s, &card)| acc * card + s)
    }

    pub fn get(&self, parent_states: &[usize], child: usize) -> f64 {
        self.data[self.row_index(parent_states) * self.child_card() + child]
    }
}

/// How a node is quantified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantification {
    Prior(Vec<f64>),
    Cpt(Cpt),
    Gate(GateSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub variable: Variable,
    /// Indices into the owning network's node list, in declaration order.
    pub parents: Vec<usize>,
    pub quantification: Quantification,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.variable.name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefNetwork {
    pub name: String,
    pub nodes: Vec<Node>,
}

impl BeliefNetwork {
    pub fn new<S: Into<String>>(name: S) -> Self {
        BeliefNetwork {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    /// Appends a node whose parents are given by name. Parents must already exist.
    pub fn add_node(
        &mut self,
        variable: Variable,
        parents: &[&str],
        quantification: Quantification,
    ) -> Result<usize> {
        let parents = parents
            .iter()
            .map(|p| self.index_of(p).ok_or_else(|| Error::UnknownNode(p.to_string())))
            .collect::<Result<Vec<_>>>()?;
        self.nodes.push(Node {
            variable,
            parents,
            quantification,
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name() == name)
    }

    pub fn node(&self, name: &str) -> Result<&Node> {
        self.index_of(name)
            .map(|i| &self.nodes[i])
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn cards(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.variable.cardinality()).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                if p < self.nodes.len() {
                    children[p].push(i);
                }
            }
        }
        children
    }

    /// `P(x_i = state | parents)` read from whichever quantification the node carries.
    pub fn local_probability(&self, i: usize, states: &[usize]) -> f64 {
        let node = &self.nodes[i];
        let child = states[i];
        match &node.quantification {
            Quantification::Prior(p) => p[child],
            Quantification::Cpt(cpt) => {
                let parent_states: Vec<usize> = node.parents.iter().map(|&p| states[p]).collect();
                cpt.get(&parent_states, child)
            }
            Quantification::Gate(gate) => {
                let parent_states: Vec<usize> = node.parents.iter().map(|&p| states[p]).collect();
                let parent_vars: Vec<&Variable> =
                    node.parents.iter().map(|&p| &self.nodes[p].variable).collect();
                gate.probability(&parent_vars, &node.variable, &parent_states, child)
            }
        }
    }

    /// Joint product of local probabilities and per-node evidence weights.
    pub fn joint_score(&self, states: &[usize], weights: &[Option<Vec<f64>>]) -> f64 {
        let mut p = 1.0;
        for i in 0..self.nodes.len() {
            p *= self.local_probability(i, states);
            if let Some(w) = &weights[i] {
                p *= w[states[i]];
            }
        }
        p
    }

    /// Topological order, or `None` when the parent relation is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let children = self.children();
        let mut indegree: Vec<usize> = self
            .nodes
            .iter()
            .map(|node| node.parents.iter().filter(|&&p| p < n).count())
            .collect();
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    Cycle,
    BadRowSum,
    ArityMismatch,
    DuplicateName,
    BadVariable,
    UnresolvedReference,
    DuplicateParent,
    UnnormalizedParameter,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::Cycle => "cycle",
            DiagnosticKind::BadRowSum => "bad-row-sum",
            DiagnosticKind::ArityMismatch => "arity-mismatch",
            DiagnosticKind::DuplicateName => "duplicate-name",
            DiagnosticKind::BadVariable => "bad-variable",
            DiagnosticKind::UnresolvedReference => "unresolved-reference",
            DiagnosticKind::DuplicateParent => "duplicate-parent",
            DiagnosticKind::UnnormalizedParameter => "unnormalized-parameter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub node: String,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    fn new(node: &str, kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Diagnostic {
            node: node.to_string(),
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at `{}`: {}", self.kind.as_str(), self.node, self.message)
    }
}

fn check_distribution(dist: &[f64]) -> Option<String> {
    if let Some(bad) = dist.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Some(format!("entry {bad} outside [0, 1]"));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Some(format!("row {dist:?} sums to {sum}"));
    }
    None
}

/// Checks every structural and numeric invariant of a network. An empty
/// result means the network is valid.
pub fn validate(network: &BeliefNetwork) -> Vec<Diagnostic> {
    use DiagnosticKind::*;
    let mut diags = Vec::new();
    let n = network.nodes.len();

    let mut seen = HashSet::new();
    for node in &network.nodes {
        if !seen.insert(node.name()) {
            diags.push(Diagnostic::new(node.name(), DuplicateName, "name declared twice"));
        }
    }

    for node in &network.nodes {
        let name = node.name();
        let var = &node.variable;
        if var.values.len() < 2 {
            diags.push(Diagnostic::new(name, BadVariable, "variable needs at least 2 values"));
        }
        let labels: HashSet<&String> = var.values.iter().collect();
        if labels.len() != var.values.len() {
            diags.push(Diagnostic::new(name, BadVariable, "value labels must be unique"));
        }
        if let Some(&p) = node.parents.iter().find(|&&p| p >= n) {
            diags.push(Diagnostic::new(name, UnresolvedReference, format!("parent index {p} out of range")));
            continue;
        }
        let distinct: HashSet<usize> = node.parents.iter().copied().collect();
        if distinct.len() != node.parents.len() {
            diags.push(Diagnostic::new(name, DuplicateParent, "a parent is listed twice"));
        }
        let parent_cards: Vec<usize> =
            node.parents.iter().map(|&p| network.nodes[p].variable.cardinality()).collect();
        match &node.quantification {
            Quantification::Prior(dist) => {
                if !node.parents.is_empty() {
                    diags.push(Diagnostic::new(name, ArityMismatch, "prior given for a node with parents"));
                } else if dist.len() != var.cardinality() {
                    diags.push(Diagnostic::new(
                        name,
                        ArityMismatch,
                        format!("prior has {} entries for {} values", dist.len(), var.cardinality()),
                    ));
                } else if let Some(msg) = check_distribution(dist) {
                    diags.push(Diagnostic::new(name, BadRowSum, msg));
                }
            }
            Quantification::Cpt(cpt) => {
                let mut expected = parent_cards.clone();
                expected.push(var.cardinality());
                if cpt.shape() != expected.as_slice() {
                    diags.push(Diagnostic::new(
                        name,
                        ArityMismatch,
                        format!("table shape {:?}, expected {:?}", cpt.shape(), expected),
                    ));
                } else if let Some(msg) = cpt.rows().find_map(check_distribution) {
                    diags.push(Diagnostic::new(name, BadRowSum, msg));
                }
            }
            Quantification::Gate(gate) => {
                let parent_vars: Vec<&Variable> =
                    node.parents.iter().map(|&p| &network.nodes[p].variable).collect();
                if let Err(e) = gate.check(&parent_vars, var) {
                    let kind = match e {
                        Error::UnnormalizedParameter(_) => UnnormalizedParameter,
                        _ => ArityMismatch,
                    };
                    diags.push(Diagnostic::new(name, kind, e.to_string()));
                }
            }
        }
    }

    // One diagnostic per back edge of a depth-first walk along child edges.
    let children = network.children();
    let mut color = vec![0u8; n];
    let mut stack_path: Vec<usize> = Vec::new();
    fn visit(
        v: usize,
        children: &[Vec<usize>],
        color: &mut [u8],
        path: &mut Vec<usize>,
        network: &BeliefNetwork,
        diags: &mut Vec<Diagnostic>,
    ) {
        color[v] = 1;
        path.push(v);
        for &c in &children[v] {
            match color[c] {
                0 => visit(c, children, color, path, network, diags),
                1 => {
                    let start = path.iter().position(|&x| x == c).unwrap_or(0);
                    let names: Vec<&str> = path[start..].iter().map(|&i| network.nodes[i].name()).collect();
                    diags.push(Diagnostic::new(
                        network.nodes[c].name(),
                        DiagnosticKind::Cycle,
                        format!("directed cycle {}", names.join(" -> ")),
                    ));
                }
                _ => {}
            }
        }
        path.pop();
        color[v] = 2;
    }
    for v in 0..n {
        if color[v] == 0 {
            visit(v, &children, &mut color, &mut stack_path, network, &mut diags);
        }
    }
    diags
}

/// Unnormalized likelihood weights over a variable's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LikelihoodVector {
    weights: Vec<f64>,
}

impl LikelihoodVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invalid("likelihood weights must be finite and nonnegative".into()));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Invalid("likelihood weights are all zero".into()));
        }
        Ok(LikelihoodVector { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_vacuous(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finding {
    Instantiated(String),
    Virtual(LikelihoodVector),
}

impl Finding {
    pub fn value<S: Into<String>>(label: S) -> Self {
        Finding::Instantiated(label.into())
    }

    pub fn likelihood(weights: Vec<f64>) -> Result<Self> {
        Ok(Finding::Virtual(LikelihoodVector::new(weights)?))
    }

    pub fn is_instantiation(&self) -> bool {
        matches!(self, Finding::Instantiated(_))
    }

    /// Weight vector over the variable's values; validates labels and lengths.
    pub fn weights(&self, node: &str, variable: &Variable) -> Result<Vec<f64>> {
        match self {
            Finding::Instantiated(label) => {
                let idx = variable.value_index(label).ok_or_else(|| Error::UnknownValue {
                    node: node.to_string(),
                    value: label.clone(),
                })?;
                let mut w = vec![0.0; variable.cardinality()];
                w[idx] = 1.0;
                Ok(w)
            }
            Finding::Virtual(lv) => {
                if lv.weights().len() != variable.cardinality() {
                    return Err(Error::InvalidFinding {
                        node: node.to_string(),
                        reason: format!(
                            "likelihood has {} weights for {} values",
                            lv.weights().len(),
                            variable.cardinality()
                        ),
                    });
                }
                Ok(lv.weights().to_vec())
            }
        }
    }
}

/// At most one finding per node, keyed by node name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    findings: BTreeMap<String, Finding>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with<S: Into<String>>(mut self, node: S, finding: Finding) -> Self {
        self.insert(node, finding);
        self
    }

    /// Records a finding, replacing any earlier one for the same node.
    pub fn insert<S: Into<String>>(&mut self, node: S, finding: Finding) {
        self.findings.insert(node.into(), finding);
    }

    pub fn remove(&mut self, node: &str) -> Option<Finding> {
        self.findings.remove(node)
    }

    pub fn get(&self, node: &str) -> Option<&Finding> {
        self.findings.get(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Finding)> {
        self.findings.iter()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// Per-node weight vectors (`None` where there is no finding).
    pub fn resolve(&self, network: &BeliefNetwork) -> Result<Vec<Option<Vec<f64>>>> {
        let mut out = vec![None; network.nodes.len()];
        for (name, finding) in &self.findings {
            let i = network.index_of(name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
            out[i] = Some(finding.weights(name, &network.nodes[i].variable)?);
        }
        Ok(out)
    }
}

impl<S: Into<String>> FromIterator<(S, Finding)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (S, Finding)>>(iter: I) -> Self {
        let mut ev = Evidence::new();
        for (k, f) in iter {
            ev.insert(k, f);
        }
        ev
    }
}

/// Normalized beliefs per node name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefTable {
    pub beliefs: BTreeMap<String, Vec<f64>>,
}

impl BeliefTable {
    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.beliefs.get(node).map(Vec::as_slice)
    }

    /// Largest absolute entry-wise difference over the nodes both tables share.
    pub fn max_abs_diff(&self, other: &BeliefTable) -> f64 {
        self.beliefs
            .iter()
            .filter_map(|(k, a)| other.beliefs.get(k).map(|b| (a, b)))
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// A most probable explanation: one value per node and its joint score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub assignment: BTreeMap<String, String>,
    /// Joint product of the assignment, times any virtual-evidence weights.
    pub probability: f64,
}

impl Explanation {
    pub(crate) fn from_states(network: &BeliefNetwork, states: &[usize], probability: f64) -> Self {
        let assignment = network
            .nodes
            .iter()
            .zip(states)
            .map(|(n, &s)| (n.name().to_string(), n.variable.values[s].clone()))
            .collect();
        Explanation {
            assignment,
            probability,
        }
    }

    /// Value indices in the network's node order.
    pub fn states(&self, network: &BeliefNetwork) -> Result<Vec<usize>> {
        network
            .nodes
            .iter()
            .map(|n| {
                let label = self
                    .assignment
                    .get(n.name())
                    .ok_or_else(|| Error::UnknownNode(n.name().to_string()))?;
                n.variable.value_index(label).ok_or_else(|| Error::UnknownValue {
                    node: n.name().to_string(),
                    value: label.clone(),
                })
            })
            .collect()
    }
}

/// Depth-first walk over every full assignment in lexicographic order of
/// value indices (first declared node most significant). Each local factor
/// is multiplied in as soon as the node and all its parents are assigned, so
/// zero-mass prefixes are skipped wholesale.
struct JointWalk<'a> {
    network: &'a BeliefNetwork,
    weights: Vec<Option<Vec<f64>>>,
    cards: Vec<usize>,
    ready_at: Vec<Vec<usize>>,
}

impl<'a> JointWalk<'a> {
    fn new(network: &'a BeliefNetwork, evidence: &Evidence) -> Result<Self> {
        let diags = validate(network);
        if !diags.is_empty() {
            return Err(Error::Compile(diags));
        }
        let weights = evidence.resolve(network)?;
        let n = network.nodes.len();
        let mut ready_at = vec![Vec::new(); n];
        for (i, node) in network.nodes.iter().enumerate() {
            let last = node.parents.iter().copied().chain([i]).max().unwrap_or(i);
            ready_at[last].push(i);
        }
        Ok(JointWalk {
            network,
            weights,
            cards: network.cards(),
            ready_at,
        })
    }

    /// Per-node query mass by nested summation with `first` summed outermost:
    /// `m(x) = f(x) * sum_rest(...)`. With no evidence the inner sums of
    /// normalized rows come out as exactly 1, so a root's prior is returned
    /// unchanged.
    fn nested_marginal(&self, first: usize) -> Vec<f64> {
        let n = self.cards.len();
        let order: Vec<usize> = std::iter::once(first).chain((0..n).filter(|&i| i != first)).collect();
        let mut pos = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        let mut ready = vec![Vec::new(); n];
        for (i, node) in self.network.nodes.iter().enumerate() {
            let last = node.parents.iter().chain([&i]).map(|&v| pos[v]).max().unwrap_or(pos[i]);
            ready[last].push(i);
        }
        let mut states = vec![0; n];
        let mut out = vec![0.0; self.cards[first]];
        for (s, slot) in out.iter_mut().enumerate() {
            states[first] = s;
            *slot = self.factor(0, &order, &ready, &states) * self.inner_sum(1, &order, &ready, &mut states);
        }
        out
    }

    fn factor(&self, depth: usize, order: &[usize], ready: &[Vec<usize>], states: &[usize]) -> f64 {
        let v = order[depth];
        let mut p = 1.0;
        if let Some(w) = &self.weights[v] {
            p *= w[states[v]];
        }
        for &i in &ready[depth] {
            p *= self.network.local_probability(i, states);
        }
        p
    }

    fn inner_sum(&self, depth: usize, order: &[usize], ready: &[Vec<usize>], states: &mut Vec<usize>) -> f64 {
        if depth == order.len() {
            return 1.0;
        }
        let v = order[depth];
        let mut total = 0.0;
        for s in 0..self.cards[v] {
            states[v] = s;
            let f = self.factor(depth, order, ready, states);
            if f > 0.0 {
                total += f * self.inner_sum(depth + 1, order, ready, states);
            }
        }
        total
    }

    fn walk<F: FnMut(&[usize], f64)>(&self, visit: &mut F) {
        let mut states = vec![0; self.cards.len()];
        self.descend(0, 1.0, &mut states, visit);
    }

    fn descend<F: FnMut(&[usize], f64)>(&self, depth: usize, mass: f64, states: &mut Vec<usize>, visit: &mut F) {
        if depth == self.cards.len() {
            visit(states, mass);
            return;
        }
        for s in 0..self.cards[depth] {
            states[depth] = s;
            let mut p = mass;
            if let Some(w) = &self.weights[depth] {
                p *= w[s];
            }
            for &i in &self.ready_at[depth] {
                p *= self.network.local_probability(i, states);
            }
            if p > 0.0 {
                self.descend(depth + 1, p, states, visit);
            }
        }
    }
}

/// Exact posterior marginals of every node by brute-force summation of the joint.
///
/// Exponential in the number of nodes; this is the reference the rest of the
/// crate is tested against.
pub fn joint_marginals(network: &BeliefNetwork, evidence: &Evidence) -> Result<BeliefTable> {
    let walk = JointWalk::new(network, evidence)?;
    let mut acc: Vec<Vec<f64>> = walk.cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut total = 0.0;
    walk.walk(&mut |states, p| {
        total += p;
        for (a, &s) in acc.iter_mut().zip(states) {
            a[s] += p;
        }
    });
    if total <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    let beliefs = network
        .nodes
        .iter()
        .zip(acc)
        .map(|(n, a)| (n.name().to_string(), a.iter().map(|x| x / total).collect()))
        .collect();
    Ok(BeliefTable { beliefs })
}

/// `P(query | evidence)` by full joint enumeration.
pub fn joint_enumerate(network: &BeliefNetwork, evidence: &Evidence, query: &str) -> Result<Vec<f64>> {
    let q = network.index_of(query).ok_or_else(|| Error::UnknownNode(query.to_string()))?;
    let walk = JointWalk::new(network, evidence)?;
    let acc = walk.nested_marginal(q);
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    if total == 1.0 {
        return Ok(acc);
    }
    Ok(acc.into_iter().map(|x| x / total).collect())
}

/// Most probable full assignment by exhaustive search. Ties go to the
/// lexicographically smallest vector of value indices.
pub fn joint_mpe(network: &BeliefNetwork, evidence: &Evidence) -> Result<Explanation> {
    let walk = JointWalk::new(network, evidence)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    walk.walk(&mut |states, p| {
        if best.as_ref().is_none_or(|(_, b)| p > *b) {
            best = Some((states.to_vec(), p));
        }
    });
    let (states, _) = best.ok_or(Error::InconsistentEvidence)?;
    let score = network.joint_score(&states, &walk.weights);
    Ok(Explanation::from_states(network, &states, score))
}

/// Probability that a predicate over a full assignment holds given the evidence.
pub fn joint_probability_where<F>(network: &BeliefNetwork, evidence: &Evidence, mut predicate: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> bool,
{
    let walk = JointWalk::new(network, evidence)?;
    let (mut hit, mut total) = (0.0, 0.0);
    walk.walk(&mut |states, p| {
        total += p;
        if predicate(states) {
            hit += p;
        }
    });
    if total <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    Ok(hit / total)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A -> B, P(A=t)=0.3, P(B=t|A=t)=0.9, P(B=t|A=f)=0.2.
    pub fn chain2() -> BeliefNetwork {
        let mut net = BeliefNetwork::new("chain2");
        net.add_node(Variable::new("A", &["t", "f"]), &[], Quantification::Prior(vec![0.3, 0.7]))
            .unwrap();
        let cpt = Cpt::from_rows(&[2], &[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        net.add_node(Variable::new("B", &["t", "f"]), &["A"], Quantification::Cpt(cpt))
            .unwrap();
        net
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::chain2;
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn chain2_is_valid() {
        assert!(validate(&chain2()).is_empty());
    }

    #[test]
    fn back_edge_is_a_cycle() {
        let mut net = chain2();
        net.nodes[0].parents = vec![1];
        net.nodes[0].quantification =
            Quantification::Cpt(Cpt::from_rows(&[2], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap());
        let diags = validate(&net);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].kind, DiagnosticKind::Cycle);
    }

    #[test]
    fn overfull_row_is_flagged() {
        let mut net = chain2();
        net.nodes[1].quantification =
            Quantification::Cpt(Cpt::from_rows(&[2], &[vec![0.9, 0.2], vec![0.2, 0.8]]).unwrap());
        let diags = validate(&net);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::BadRowSum);
        assert_eq!(diags[0].node, "B");
    }

    #[test]
    fn duplicate_names_and_arity() {
        let mut net = chain2();
        net.nodes[1].variable.name = "A".into();
        net.nodes[1].quantification = Quantification::Prior(vec![0.5, 0.5]);
        let kinds: Vec<_> = validate(&net).into_iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::DuplicateName));
        assert!(kinds.contains(&DiagnosticKind::ArityMismatch));
    }

    #[test]
    fn enumerate_chain2() {
        let net = chain2();
        let none = Evidence::new();
        assert_eq!(joint_enumerate(&net, &none, "A").unwrap(), vec![0.3, 0.7]);
        assert!(close(&joint_enumerate(&net, &none, "B").unwrap(), &[0.41, 0.59], 1e-12));
        let b_true = Evidence::new().with("B", Finding::value("t"));
        let a = joint_enumerate(&net, &b_true, "A").unwrap();
        assert!(close(&a, &[0.27 / 0.41, 0.14 / 0.41], 1e-12));
        assert!((a[0] - 0.6585).abs() < 1e-4);
    }

    #[test]
    fn enumerate_rejects_impossible_evidence() {
        let mut net = chain2();
        net.nodes[0].quantification = Quantification::Prior(vec![1.0, 0.0]);
        net.nodes[1].quantification =
            Quantification::Cpt(Cpt::from_rows(&[2], &[vec![1.0, 0.0], vec![0.2, 0.8]]).unwrap());
        let ev = Evidence::new().with("B", Finding::value("f"));
        assert_eq!(joint_enumerate(&net, &ev, "A"), Err(Error::InconsistentEvidence));
        assert_eq!(joint_mpe(&net, &ev), Err(Error::InconsistentEvidence));
    }

    #[test]
    fn mpe_chain2() {
        let net = chain2();
        let ev = Evidence::new().with("B", Finding::value("t"));
        let m = joint_mpe(&net, &ev).unwrap();
        assert_eq!(m.assignment["A"], "t");
        assert_eq!(m.assignment["B"], "t");
        assert!((m.probability - 0.27).abs() < 1e-15);

        let m = joint_mpe(&net, &Evidence::new()).unwrap();
        assert_eq!((m.assignment["A"].as_str(), m.assignment["B"].as_str()), ("f", "f"));
        assert!((m.probability - 0.56).abs() < 1e-15);

        let ev = Evidence::new().with("A", Finding::value("f")).with("B", Finding::value("t"));
        let m = joint_mpe(&net, &ev).unwrap();
        assert_eq!((m.assignment["A"].as_str(), m.assignment["B"].as_str()), ("f", "t"));
        assert!((m.probability - 0.14).abs() < 1e-15);
    }

    #[test]
    fn mpe_ties_go_to_lowest_indices() {
        let mut net = BeliefNetwork::new("flat");
        net.add_node(Variable::new("X", &["a", "b"]), &[], Quantification::Prior(vec![0.5, 0.5]))
            .unwrap();
        let m = joint_mpe(&net, &Evidence::new()).unwrap();
        assert_eq!(m.assignment["X"], "a");
    }

    #[test]
    fn mpe_score_is_the_joint_product() {
        let net = chain2();
        let m = joint_mpe(&net, &Evidence::new()).unwrap();
        let states = m.states(&net).unwrap();
        assert_eq!(m.probability, net.joint_score(&states, &vec![None; 2]));
        assert!(m.probability <= 1.0);
    }

    #[test]
    fn finding_validation() {
        let net = chain2();
        let ev = Evidence::new().with("B", Finding::value("z"));
        assert!(matches!(ev.resolve(&net), Err(Error::UnknownValue { .. })));
        let ev = Evidence::new().with("B", Finding::likelihood(vec![1.0, 2.0, 3.0]).unwrap());
        assert!(matches!(ev.resolve(&net), Err(Error::InvalidFinding { .. })));
        assert!(Finding::likelihood(vec![0.0, 0.0]).is_err());
        assert!(Finding::likelihood(vec![-1.0, 2.0]).is_err());
    }
}
