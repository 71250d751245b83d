use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fastpath::node_messages;
use super::tensor::{lambda_contract, pi_contract, Semiring};
use crate::compiler::{CompiledModel, CompiledNetwork};
use crate::error::{Error, Result};
use crate::gate::BoolExpr;
use crate::model::{BeliefTable, Evidence, Explanation, Finding};

/// Beliefs that moved by more than this are reported in a delta.
pub const DELTA_THRESHOLD: f64 = 1e-12;

/// Order in which pending node activations are processed while settling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Fifo,
    Lifo,
    /// Seeded random pick from the pending set.
    Random(u64),
    /// Synchronous sweeps: every pending node computes its messages in
    /// parallel from the same snapshot, then all writes are applied.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub schedule: Schedule,
    /// Use closed-form messages on gate-tagged nodes.
    pub fast_path: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            schedule: Schedule::Fifo,
            fast_path: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettleStats {
    pub activations: usize,
    /// Synchronous sweeps; only counted under [`Schedule::Concurrent`].
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    parent: usize,
    child: usize,
}

#[derive(Debug)]
struct Topology {
    edges: Vec<Edge>,
    parent_edges: Vec<Vec<usize>>,
    child_edges: Vec<Vec<usize>>,
}

impl Topology {
    fn new(net: &CompiledNetwork) -> Self {
        let n = net.nodes.len();
        let mut edges = Vec::new();
        let mut parent_edges = vec![Vec::new(); n];
        let mut child_edges = vec![Vec::new(); n];
        for (c, node) in net.nodes.iter().enumerate() {
            for &p in &node.parents {
                parent_edges[c].push(edges.len());
                child_edges[p].push(edges.len());
                edges.push(Edge { parent: p, child: c });
            }
        }
        Topology {
            edges,
            parent_edges,
            child_edges,
        }
    }
}

/// Per-edge π and λ message slots plus per-node π, λ and BEL.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageStore {
    /// Parent → child, over the parent's values.
    pub pi_messages: Vec<Vec<f64>>,
    /// Child → parent, over the parent's values.
    pub lambda_messages: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    /// Normalized `lambda * pi`; all zeros when the evidence is inconsistent.
    pub belief: Vec<Vec<f64>>,
    /// `sum(lambda * pi)` before normalization.
    pub mass: Vec<f64>,
}

struct NodeUpdate {
    node: usize,
    pi: Vec<f64>,
    lambda: Vec<f64>,
    to_children: Vec<(usize, Vec<f64>)>,
    to_parents: Vec<(usize, Vec<f64>)>,
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    v
}

/// One changed node in a belief delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefChange {
    pub node: String,
    pub old: Vec<f64>,
    pub new: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefDelta {
    pub changes: Vec<BeliefChange>,
}

impl BeliefDelta {
    fn between(old: &BeliefTable, new: &BeliefTable) -> Self {
        let changes = new
            .beliefs
            .iter()
            .filter_map(|(node, b)| {
                let a = old.beliefs.get(node)?;
                let moved = a.iter().zip(b).any(|(x, y)| (x - y).abs() > DELTA_THRESHOLD);
                moved.then(|| BeliefChange {
                    node: node.clone(),
                    old: a.clone(),
                    new: b.clone(),
                })
            })
            .collect();
        BeliefDelta { changes }
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }
}

/// Distance used by the impact measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactMetric {
    /// Sum of squared differences over the target's values.
    #[default]
    SquaredError,
    /// Sum of absolute differences.
    AbsoluteError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub target: String,
    /// Uninstantiated nodes by descending impact.
    pub ranking: Vec<(String, f64)>,
}

/// Mutable inference state over one compiled network.
#[derive(Clone)]
pub struct Session {
    network: Arc<CompiledNetwork>,
    topology: Arc<Topology>,
    options: SessionOptions,
    ring: Semiring,
    /// Findings in assertion order, keyed by original node.
    findings: Vec<(usize, Finding)>,
    /// Evidence weights per original node.
    weights: Vec<Option<Vec<f64>>>,
    /// Evidence λ per compiled node.
    local: Vec<Vec<f64>>,
    store: MessageStore,
    dirty: VecDeque<usize>,
    queued: Vec<bool>,
    rng: ChaCha8Rng,
    revision: u64,
    last_settle: SettleStats,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("network", &self.network.name)
            .field("findings", &self.findings)
            .field("revision", &self.revision)
            .finish()
    }
}

impl Session {
    /// Opens a settled session on a named network of a compiled model.
    pub fn open(model: &CompiledModel, network: &str) -> Result<Self> {
        Self::open_with(model, network, SessionOptions::default())
    }

    pub fn open_with(model: &CompiledModel, network: &str, options: SessionOptions) -> Result<Self> {
        let net = model.network(network)?;
        Ok(Self::new(Arc::clone(net), options))
    }

    /// Settled session with no evidence.
    pub fn new(network: Arc<CompiledNetwork>, options: SessionOptions) -> Self {
        let mut s = Self::unsettled(network, options, Semiring::SumProduct);
        s.settle();
        s
    }

    fn unsettled(network: Arc<CompiledNetwork>, options: SessionOptions, ring: Semiring) -> Self {
        let topology = Arc::new(Topology::new(&network));
        let cards: Vec<usize> = network.nodes.iter().map(|n| n.card()).collect();
        let n = cards.len();
        let edge_vec = |e: &Edge, fill: f64| vec![fill; cards[e.parent]];
        let store = MessageStore {
            pi_messages: topology.edges.iter().map(|e| normalize(edge_vec(e, 1.0))).collect(),
            lambda_messages: topology.edges.iter().map(|e| edge_vec(e, 1.0)).collect(),
            pi: cards.iter().map(|&c| vec![1.0; c]).collect(),
            lambda: cards.iter().map(|&c| vec![1.0; c]).collect(),
            belief: cards.iter().map(|&c| vec![1.0 / c as f64; c]).collect(),
            mass: vec![1.0; n],
        };
        let seed = match options.schedule {
            Schedule::Random(seed) => seed,
            _ => 0,
        };
        Session {
            weights: vec![None; network.original.nodes.len()],
            local: cards.iter().map(|&c| vec![1.0; c]).collect(),
            network,
            topology,
            options,
            ring,
            findings: Vec::new(),
            store,
            dirty: (0..n).collect(),
            queued: vec![true; n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            revision: 0,
            last_settle: SettleStats::default(),
        }
    }

    pub fn network(&self) -> &CompiledNetwork {
        &self.network
    }

    pub fn options(&self) -> SessionOptions {
        self.options
    }

    /// Monotone counter of committed mutations.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn settle_stats(&self) -> SettleStats {
        self.last_settle
    }

    pub fn message_store(&self) -> &MessageStore {
        &self.store
    }

    pub fn is_settled(&self) -> bool {
        self.dirty.is_empty()
    }

    /// Current evidence set.
    pub fn evidence(&self) -> Evidence {
        self.findings
            .iter()
            .map(|(o, f)| (self.network.original.nodes[*o].name().to_string(), f.clone()))
            .collect()
    }

    /// Findings in the order they were asserted.
    pub fn findings(&self) -> Vec<(String, Finding)> {
        self.findings
            .iter()
            .map(|(o, f)| (self.network.original.nodes[*o].name().to_string(), f.clone()))
            .collect()
    }

    fn enqueue(&mut self, node: usize) {
        if !self.queued[node] {
            self.queued[node] = true;
            self.dirty.push_back(node);
        }
    }

    fn compute(&self, c: usize) -> NodeUpdate {
        let node = &self.network.nodes[c];
        let topo = &self.topology;
        let store = &self.store;
        let incoming: Vec<Vec<f64>> = topo.parent_edges[c].iter().map(|&e| store.pi_messages[e].clone()).collect();

        let child_edges = &topo.child_edges[c];
        let local = &self.local[c];
        let k = local.len();
        // prefix/suffix products of children's λ messages, so each outgoing π
        // message excludes its recipient without division
        let m = child_edges.len();
        let mut prefix = vec![vec![1.0; k]; m + 1];
        for (j, &e) in child_edges.iter().enumerate() {
            prefix[j + 1] = prefix[j].iter().zip(&store.lambda_messages[e]).map(|(a, b)| a * b).collect();
        }
        let mut suffix = vec![vec![1.0; k]; m + 1];
        for j in (0..m).rev() {
            let e = child_edges[j];
            suffix[j] = suffix[j + 1].iter().zip(&store.lambda_messages[e]).map(|(a, b)| a * b).collect();
        }
        let lambda: Vec<f64> = prefix[m].iter().zip(local).map(|(a, b)| a * b).collect();

        let (pi, to_parent_raw) = match self.ring {
            Semiring::SumProduct => {
                let gate = if self.options.fast_path {
                    node.fast_path.as_ref()
                } else {
                    None
                };
                let msgs = node_messages(&node.tensor, gate, &incoming, &lambda);
                (msgs.pi, msgs.lambda_to_parents)
            }
            Semiring::MaxProduct => {
                let refs: Vec<&[f64]> = incoming.iter().map(Vec::as_slice).collect();
                let pi = pi_contract(&node.tensor, &refs, self.ring);
                let to_parents = (0..refs.len())
                    .map(|i| lambda_contract(&node.tensor, &refs, &lambda, i, self.ring))
                    .collect();
                (pi, to_parents)
            }
        };

        let to_children = child_edges
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                let msg: Vec<f64> = (0..k).map(|x| pi[x] * local[x] * prefix[j][x] * suffix[j + 1][x]).collect();
                (e, normalize(msg))
            })
            .collect();
        let to_parents = topo.parent_edges[c]
            .iter()
            .zip(to_parent_raw)
            .map(|(&e, msg)| (e, normalize(msg)))
            .collect();
        NodeUpdate {
            node: c,
            pi,
            lambda,
            to_children,
            to_parents,
        }
    }

    fn apply(&mut self, update: NodeUpdate, wake: &mut Vec<usize>) {
        let c = update.node;
        let raw: Vec<f64> = update.lambda.iter().zip(&update.pi).map(|(l, p)| l * p).collect();
        let mass: f64 = raw.iter().sum();
        self.store.mass[c] = mass;
        self.store.belief[c] = if mass > 0.0 && mass.is_finite() {
            raw.iter().map(|x| x / mass).collect()
        } else {
            vec![0.0; raw.len()]
        };
        self.store.pi[c] = update.pi;
        self.store.lambda[c] = update.lambda;
        for (e, msg) in update.to_children {
            if self.store.pi_messages[e] != msg {
                self.store.pi_messages[e] = msg;
                wake.push(self.topology.edges[e].child);
            }
        }
        for (e, msg) in update.to_parents {
            if self.store.lambda_messages[e] != msg {
                self.store.lambda_messages[e] = msg;
                wake.push(self.topology.edges[e].parent);
            }
        }
    }

    /// Processes pending activations until every message is at its fixpoint.
    pub fn settle(&mut self) -> SettleStats {
        let mut stats = SettleStats::default();
        let mut wake = Vec::new();
        match self.options.schedule {
            Schedule::Concurrent => {
                while !self.dirty.is_empty() {
                    let mut batch: Vec<usize> = self.dirty.drain(..).collect();
                    batch.sort_unstable();
                    for &c in &batch {
                        self.queued[c] = false;
                    }
                    let updates: Vec<NodeUpdate> = batch.par_iter().map(|&c| self.compute(c)).collect();
                    stats.activations += updates.len();
                    stats.sweeps += 1;
                    for u in updates {
                        self.apply(u, &mut wake);
                    }
                    for c in wake.drain(..) {
                        self.enqueue(c);
                    }
                }
            }
            schedule => {
                while !self.dirty.is_empty() {
                    let c = match schedule {
                        Schedule::Lifo => self.dirty.pop_back(),
                        Schedule::Random(_) => {
                            let i = self.rng.gen_range(0..self.dirty.len());
                            self.dirty.swap_remove_back(i)
                        }
                        _ => self.dirty.pop_front(),
                    }
                    .expect("non-empty queue");
                    self.queued[c] = false;
                    let update = self.compute(c);
                    stats.activations += 1;
                    self.apply(update, &mut wake);
                    for w in wake.drain(..) {
                        self.enqueue(w);
                    }
                }
            }
        }
        self.last_settle = stats;
        stats
    }

    fn consistent(&self) -> bool {
        self.store.mass.iter().all(|&m| m > 0.0 && m.is_finite())
    }

    fn recompute_local(&mut self, c: usize) {
        let node = &self.network.nodes[c];
        let mut local = vec![1.0; node.card()];
        if node.members.iter().any(|&m| self.weights[m].is_some()) {
            for (state, slot) in local.iter_mut().enumerate() {
                let values = node.decode(state);
                for (&m, &v) in node.members.iter().zip(&values) {
                    if let Some(w) = &self.weights[m] {
                        *slot *= w[v];
                    }
                }
            }
        }
        self.local[c] = local;
    }

    fn set_finding(&mut self, o: usize, finding: Option<(Finding, Vec<f64>)>) {
        match finding {
            Some((f, w)) => {
                self.weights[o] = Some(normalize(w));
                match self.findings.iter_mut().find(|(i, _)| *i == o) {
                    Some(slot) => slot.1 = f,
                    None => self.findings.push((o, f)),
                }
            }
            None => {
                self.weights[o] = None;
                self.findings.retain(|(i, _)| *i != o);
            }
        }
        let c = self.network.aggregation.placement[o].node;
        self.recompute_local(c);
        self.enqueue(c);
    }

    /// Records a finding and propagates it. Instantiation is absorbing: a
    /// second, different finding on an instantiated node is refused, while a
    /// virtual finding is replaced by whatever is asserted next.
    pub fn assert_evidence(&mut self, node: &str, finding: Finding) -> Result<BeliefDelta> {
        let o = self.network.original_index(node)?;
        let weights = finding.weights(node, &self.network.original.nodes[o].variable)?;
        if let Some((_, existing)) = self.findings.iter().find(|(i, _)| *i == o) {
            if existing.is_instantiation() {
                return if *existing == finding {
                    Ok(BeliefDelta::default())
                } else {
                    Err(Error::ConflictingInstantiation(node.to_string()))
                };
            }
        }
        let before = self.beliefs();
        let backup = self.clone();
        self.set_finding(o, Some((finding, weights)));
        self.settle();
        if !self.consistent() {
            *self = backup;
            return Err(Error::InconsistentEvidence);
        }
        self.revision += 1;
        Ok(BeliefDelta::between(&before, &self.beliefs()))
    }

    /// Removes a finding by replaying the remaining ones on a fresh session.
    pub fn retract_evidence(&mut self, node: &str) -> Result<BeliefDelta> {
        let o = self.network.original_index(node)?;
        if !self.findings.iter().any(|(i, _)| *i == o) {
            return Err(Error::NoSuchFinding(node.to_string()));
        }
        let before = self.beliefs();
        let mut fresh = Session::new(Arc::clone(&self.network), self.options);
        for (i, f) in self.findings.iter().filter(|(i, _)| *i != o) {
            let name = self.network.original.nodes[*i].name();
            fresh.assert_evidence(name, f.clone())?;
        }
        fresh.revision = self.revision + 1;
        *self = fresh;
        Ok(BeliefDelta::between(&before, &self.beliefs()))
    }

    /// Applies findings to a copy and returns its beliefs; this session is untouched.
    pub fn whatif(&self, findings: &[(String, Finding)]) -> Result<BeliefTable> {
        let mut copy = self.clone();
        for (node, f) in findings {
            copy.assert_evidence(node, f.clone())?;
        }
        Ok(copy.beliefs())
    }

    fn original_belief(&self, o: usize) -> Vec<f64> {
        let place = self.network.aggregation.placement[o];
        let node = &self.network.nodes[place.node];
        let bel = &self.store.belief[place.node];
        if !node.is_compound() {
            return bel.clone();
        }
        let mut out = vec![0.0; node.member_cards[place.axis]];
        for (state, p) in bel.iter().enumerate() {
            out[node.decode(state)[place.axis]] += p;
        }
        out
    }

    /// Settled beliefs of every original node.
    pub fn beliefs(&self) -> BeliefTable {
        let beliefs = self
            .network
            .original
            .nodes
            .iter()
            .enumerate()
            .map(|(o, n)| (n.name().to_string(), self.original_belief(o)))
            .collect();
        BeliefTable { beliefs }
    }

    pub fn belief(&self, node: &str) -> Result<Vec<f64>> {
        Ok(self.original_belief(self.network.original_index(node)?))
    }

    /// Beliefs of the runtime nodes (compound nodes over joint states).
    pub fn compiled_beliefs(&self) -> &[Vec<f64>] {
        &self.store.belief
    }

    fn is_instantiated(&self, o: usize) -> bool {
        self.findings.iter().any(|(i, f)| *i == o && f.is_instantiation())
    }

    /// Most probable explanation by max-product propagation. Nodes are
    /// committed one at a time to the lowest-index maximizer of their
    /// max-marginal, each commitment propagated before the next, so the
    /// result is a consistent global maximizer even when ties occur.
    pub fn mpe(&self) -> Result<Explanation> {
        let mut s = Session::unsettled(Arc::clone(&self.network), self.options, Semiring::MaxProduct);
        s.weights = self.weights.clone();
        s.findings = self.findings.clone();
        for c in 0..s.network.nodes.len() {
            s.recompute_local(c);
        }
        s.settle();
        if !s.consistent() {
            return Err(Error::InconsistentEvidence);
        }
        let mut states = vec![0usize; s.network.nodes.len()];
        #[allow(clippy::needless_range_loop)]
        for c in 0..s.network.nodes.len() {
            let raw: Vec<f64> = s.store.lambda[c].iter().zip(&s.store.pi[c]).map(|(l, p)| l * p).collect();
            let best = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pick = raw.iter().position(|&x| x == best).unwrap_or(0);
            states[c] = pick;
            for (x, slot) in s.local[c].iter_mut().enumerate() {
                if x != pick {
                    *slot = 0.0;
                }
            }
            s.enqueue(c);
            s.settle();
        }
        let mut original = vec![0usize; self.network.original.nodes.len()];
        for (node, &state) in self.network.nodes.iter().zip(&states) {
            for (&m, v) in node.members.iter().zip(node.decode(state)) {
                original[m] = v;
            }
        }
        let raw_weights: Vec<Option<Vec<f64>>> = {
            let mut w = vec![None; self.network.original.nodes.len()];
            for (o, f) in &self.findings {
                let var = &self.network.original.nodes[*o].variable;
                w[*o] = Some(f.weights(var.name.as_str(), var)?);
            }
            w
        };
        let p = self.network.original.joint_score(&original, &raw_weights);
        Ok(Explanation::from_states(&self.network.original, &original, p))
    }

    /// Expected change in the target's beliefs from observing each
    /// uninstantiated node, ranked by descending score.
    pub fn impact(&self, target: &str) -> Result<ImpactReport> {
        self.impact_with(target, ImpactMetric::SquaredError)
    }

    pub fn impact_with(&self, target: &str, metric: ImpactMetric) -> Result<ImpactReport> {
        let t = self.network.original_index(target)?;
        let base = self.original_belief(t);
        let mut ranking = Vec::new();
        for (o, node) in self.network.original.nodes.iter().enumerate() {
            if o == t || self.is_instantiated(o) {
                continue;
            }
            let px = self.original_belief(o);
            let mut score = 0.0;
            for (x, &p) in px.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut probe = self.clone();
                let label = node.variable.values[x].clone();
                match probe.assert_evidence(node.name(), Finding::Instantiated(label)) {
                    Ok(_) => {}
                    Err(Error::InconsistentEvidence) => continue,
                    Err(e) => return Err(e),
                }
                let after = probe.original_belief(t);
                let dist: f64 = after
                    .iter()
                    .zip(&base)
                    .map(|(a, b)| match metric {
                        ImpactMetric::SquaredError => (a - b) * (a - b),
                        ImpactMetric::AbsoluteError => (a - b).abs(),
                    })
                    .sum();
                score += p * dist;
            }
            ranking.push((node.name().to_string(), score));
        }
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(ImpactReport {
            target: target.to_string(),
            ranking,
        })
    }

    /// Probability that a Boolean expression over node values holds given the
    /// current evidence, by chaining conditional beliefs over the variables
    /// the expression mentions.
    pub fn probability_of(&self, expr: &BoolExpr) -> Result<f64> {
        let mut vars: Vec<usize> = Vec::new();
        for (node, value) in expr.atoms() {
            let o = self.network.original_index(node)?;
            if self.network.original.nodes[o].variable.value_index(value).is_none() {
                return Err(Error::UnknownValue {
                    node: node.to_string(),
                    value: value.to_string(),
                });
            }
            if !vars.contains(&o) {
                vars.push(o);
            }
        }
        let mut assigned = Vec::new();
        self.chain_probability(expr, &vars, &mut assigned)
    }

    fn chain_probability(&self, expr: &BoolExpr, vars: &[usize], assigned: &mut Vec<(usize, usize)>) -> Result<f64> {
        let Some((&o, rest)) = vars.split_first() else {
            let nodes = &self.network.original.nodes;
            let holds = expr.eval(|node, value| {
                assigned
                    .iter()
                    .any(|&(i, v)| nodes[i].name() == node && nodes[i].variable.values[v] == value)
            });
            return Ok(if holds { 1.0 } else { 0.0 });
        };
        let node = &self.network.original.nodes[o];
        let mut total = 0.0;
        for (x, p) in self.original_belief(o).into_iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let mut branch = self.clone();
            match branch.assert_evidence(node.name(), Finding::Instantiated(node.variable.values[x].clone())) {
                Ok(_) => {}
                Err(Error::InconsistentEvidence) => continue,
                Err(e) => return Err(e),
            }
            assigned.push((o, x));
            total += p * branch.chain_probability(expr, rest, assigned)?;
            assigned.pop();
        }
        Ok(total)
    }
}
