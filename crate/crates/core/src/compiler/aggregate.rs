//! Node aggregation: merge loop nodes into compound nodes until the skeleton
//! is a forest.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::loops::{fundamental_cycles, is_forest};
use crate::error::{Error, Result};
use crate::gate::GateKind;
use crate::gate::GateSpec;
use crate::model::{validate, BeliefNetwork, Cpt, Quantification};

pub const DEFAULT_MAX_CLUSTER_STATES: usize = 4096;

/// Where an original node lives in the compiled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub node: usize,
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregationMap {
    /// Compound node name → original member names, in axis order.
    pub compounds: BTreeMap<String, Vec<String>>,
    /// Indexed by original node.
    pub placement: Vec<Placement>,
}

impl AggregationMap {
    pub fn is_identity(&self) -> bool {
        self.compounds.is_empty()
    }
}

/// A node of the singly connected runtime network. Compound nodes range over
/// the Cartesian product of their members' values, first member most
/// significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledNode {
    pub name: String,
    pub members: Vec<usize>,
    pub member_cards: Vec<usize>,
    pub parents: Vec<usize>,
    pub tensor: Cpt,
    /// Canonical gate whose closed-form messages may replace the tensor path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_path: Option<GateSpec>,
}

impl CompiledNode {
    pub fn card(&self) -> usize {
        self.tensor.child_card()
    }

    pub(crate) fn card_product(&self) -> usize {
        self.member_cards.iter().product()
    }

    pub fn is_compound(&self) -> bool {
        self.members.len() > 1
    }

    /// Member value indices of a compound state.
    pub fn decode(&self, mut state: usize) -> Vec<usize> {
        let mut out = vec![0; self.member_cards.len()];
        for (slot, &card) in out.iter_mut().zip(&self.member_cards).rev() {
            *slot = state % card;
            state /= card;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledNetwork {
    pub name: String,
    /// The source network (gates kept in closed form).
    pub original: BeliefNetwork,
    pub nodes: Vec<CompiledNode>,
    pub aggregation: AggregationMap,
}

impl CompiledNetwork {
    pub fn compound_count(&self) -> usize {
        self.aggregation.compounds.len()
    }

    /// The compiled skeleton has `|E| = |V| - components`.
    pub fn is_forest(&self) -> bool {
        let edges = self
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.parents.iter().map(move |&p| (p, i)));
        is_forest(self.nodes.len(), edges)
    }

    pub fn original_index(&self, name: &str) -> Result<usize> {
        self.original.index_of(name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }
}

struct ClusterGraph {
    /// cluster → set of parent clusters
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

fn cluster_graph(network: &BeliefNetwork, clusters: &[BTreeSet<usize>], cluster_of: &[usize]) -> ClusterGraph {
    let k = clusters.len();
    let mut parents = vec![BTreeSet::new(); k];
    let mut children = vec![BTreeSet::new(); k];
    for (i, node) in network.nodes.iter().enumerate() {
        for &p in &node.parents {
            let (cp, ci) = (cluster_of[p], cluster_of[i]);
            if cp != ci {
                parents[ci].insert(cp);
                children[cp].insert(ci);
            }
        }
    }
    ClusterGraph { parents, children }
}

fn reachable(start: &BTreeSet<usize>, next: &[BTreeSet<usize>]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = start.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &w in &next[v] {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Chooses which nodes of a cycle to merge: every node except a set of
/// pairwise non-adjacent cycle sources/sinks, plus anything on a directed
/// path between the merged nodes so the result stays acyclic.
fn merge_set(cycle: &[usize], graph: &ClusterGraph) -> BTreeSet<usize> {
    let k = cycle.len();
    let points_to = |a: usize, b: usize| graph.children[a].contains(&b);
    let mut keep_out = vec![false; k];
    for i in 0..k {
        let prev = cycle[(i + k - 1) % k];
        let next = cycle[(i + 1) % k];
        let v = cycle[i];
        let source = points_to(v, prev) && points_to(v, next);
        let sink = points_to(prev, v) && points_to(next, v);
        let free = !keep_out[(i + k - 1) % k] && !(i == k - 1 && keep_out[0]);
        if (source || sink) && free {
            keep_out[i] = true;
        }
    }
    let merged: BTreeSet<usize> = cycle
        .iter()
        .zip(&keep_out)
        .filter(|(_, &out)| !out)
        .map(|(&v, _)| v)
        .collect();
    let below = reachable(&merged, &graph.children);
    let above = reachable(&merged, &graph.parents);
    merged.iter().copied().chain(below.intersection(&above).copied()).collect()
}

/// Renders a network singly connected by merging loop nodes into compound
/// nodes. The shortest fundamental cycle is broken first; each merge strictly
/// lowers the skeleton's cycle count.
pub fn aggregate(network: &BeliefNetwork, max_cluster_states: usize) -> Result<CompiledNetwork> {
    let diags = validate(network);
    if !diags.is_empty() {
        return Err(Error::Compile(diags));
    }
    let n = network.nodes.len();
    let cards = network.cards();
    let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut cluster_of: Vec<usize> = (0..n).collect();

    loop {
        let graph = cluster_graph(network, &clusters, &cluster_of);
        let adj: Vec<BTreeSet<usize>> = (0..clusters.len())
            .map(|c| graph.parents[c].union(&graph.children[c]).copied().collect())
            .collect();
        let cycles = fundamental_cycles(&adj);
        let Some(cycle) = cycles.iter().min_by_key(|c| c.len()) else {
            break;
        };
        let merge = merge_set(cycle, &graph);
        let members: BTreeSet<usize> = merge.iter().flat_map(|&c| clusters[c].iter().copied()).collect();
        let states = members.iter().try_fold(1usize, |acc, &m| acc.checked_mul(cards[m]));
        if states.is_none_or(|s| s > max_cluster_states) {
            return Err(Error::ClusterTooLarge {
                members: members.iter().map(|&m| network.nodes[m].name().to_string()).collect(),
                states: states.unwrap_or(usize::MAX),
                limit: max_cluster_states,
            });
        }
        // rebuild the cluster list with the merged set in place of its parts
        let mut next: Vec<BTreeSet<usize>> = clusters
            .iter()
            .enumerate()
            .filter(|(c, _)| !merge.contains(c))
            .map(|(_, s)| s.clone())
            .collect();
        next.push(members);
        next.sort_by_key(|s| *s.iter().next().expect("non-empty cluster"));
        clusters = next;
        for (c, set) in clusters.iter().enumerate() {
            for &m in set {
                cluster_of[m] = c;
            }
        }
    }

    build(network, &clusters, &cluster_of)
}

fn build(network: &BeliefNetwork, clusters: &[BTreeSet<usize>], cluster_of: &[usize]) -> Result<CompiledNetwork> {
    let cards = network.cards();
    let n = network.nodes.len();
    let mut placement = vec![Placement { node: 0, axis: 0 }; n];
    let mut compounds = BTreeMap::new();
    let mut layouts: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = Vec::new();

    for (c, set) in clusters.iter().enumerate() {
        let members: Vec<usize> = set.iter().copied().collect();
        for (axis, &m) in members.iter().enumerate() {
            placement[m] = Placement { node: c, axis };
        }
        let mut parents = Vec::new();
        for &m in &members {
            for &p in &network.nodes[m].parents {
                let pc = cluster_of[p];
                if pc != c && !parents.contains(&pc) {
                    parents.push(pc);
                }
            }
        }
        let member_cards: Vec<usize> = members.iter().map(|&m| cards[m]).collect();
        if members.len() > 1 {
            compounds.insert(
                compound_name(network, &members),
                members.iter().map(|&m| network.nodes[m].name().to_string()).collect(),
            );
        }
        layouts.push((members, member_cards, parents));
    }

    let mut nodes = Vec::with_capacity(clusters.len());
    for (members, member_cards, parents) in &layouts {
        let own: usize = member_cards.iter().product();
        let parent_cards: Vec<usize> = parents
            .iter()
            .map(|&p| layouts[p].1.iter().product::<usize>())
            .collect();
        let rows: usize = parent_cards.iter().product();
        let mut data = Vec::with_capacity(rows * own);
        let mut states = vec![0usize; n];
        let mut cfg = vec![0usize; parents.len()];
        for _ in 0..rows {
            for (&p, &s) in parents.iter().zip(&cfg) {
                write_cluster_state(&layouts[p].0, &layouts[p].1, s, &mut states);
            }
            for x in 0..own {
                write_cluster_state(members, member_cards, x, &mut states);
                let p: f64 = members.iter().map(|&m| network.local_probability(m, &states)).product();
                data.push(p);
            }
            for axis in (0..cfg.len()).rev() {
                cfg[axis] += 1;
                if cfg[axis] < parent_cards[axis] {
                    break;
                }
                cfg[axis] = 0;
            }
        }
        let mut shape = parent_cards.clone();
        shape.push(own);
        let tensor = Cpt::new(shape, data)?;

        let fast_path = match members.as_slice() {
            [m] => match &network.nodes[*m].quantification {
                Quantification::Gate(gate)
                    if gate.kind() != GateKind::Bool
                        && network.nodes[*m].parents.len() == parents.len()
                        && parents.iter().all(|&p| layouts[p].0.len() == 1) =>
                {
                    Some(gate.clone())
                }
                _ => None,
            },
            _ => None,
        };
        let name = if members.len() == 1 {
            network.nodes[members[0]].name().to_string()
        } else {
            compound_name(network, members)
        };
        nodes.push(CompiledNode {
            name,
            members: members.clone(),
            member_cards: member_cards.clone(),
            parents: parents.clone(),
            tensor,
            fast_path,
        });
    }

    Ok(CompiledNetwork {
        name: network.name.clone(),
        original: network.clone(),
        nodes,
        aggregation: AggregationMap { compounds, placement },
    })
}

fn compound_name(network: &BeliefNetwork, members: &[usize]) -> String {
    let names: Vec<&str> = members.iter().map(|&m| network.nodes[m].name()).collect();
    format!("{{{}}}", names.join(","))
}

fn write_cluster_state(members: &[usize], cards: &[usize], mut state: usize, out: &mut [usize]) {
    for (&m, &card) in members.iter().zip(cards).rev() {
        out[m] = state % card;
        state /= card;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Variable, fixtures::chain2};

    pub(crate) fn diamond() -> BeliefNetwork {
        let mut net = BeliefNetwork::new("diamond");
        let b = |n: &str| Variable::new(n, &["f", "t"]);
        net.add_node(b("A"), &[], Quantification::Prior(vec![0.6, 0.4])).unwrap();
        let ab = Cpt::from_rows(&[2], &[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        net.add_node(b("B"), &["A"], Quantification::Cpt(ab)).unwrap();
        let ac = Cpt::from_rows(&[2], &[vec![0.9, 0.1], vec![0.4, 0.6]]).unwrap();
        net.add_node(b("C"), &["A"], Quantification::Cpt(ac)).unwrap();
        let d = Cpt::from_rows(
            &[2, 2],
            &[vec![0.99, 0.01], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.05, 0.95]],
        )
        .unwrap();
        net.add_node(b("D"), &["B", "C"], Quantification::Cpt(d)).unwrap();
        net
    }

    #[test]
    fn diamond_merges_middle_pair() {
        let compiled = aggregate(&diamond(), DEFAULT_MAX_CLUSTER_STATES).unwrap();
        assert_eq!(compiled.nodes.len(), 3);
        assert_eq!(compiled.compound_count(), 1);
        assert_eq!(compiled.aggregation.compounds["{B,C}"], vec!["B", "C"]);
        let bc = &compiled.nodes[1];
        assert_eq!(bc.card(), 4);
        assert_eq!(bc.parents, vec![0]);
        assert_eq!(compiled.nodes[2].parents, vec![1]);
        assert!(compiled.is_forest());
    }

    #[test]
    fn polytree_is_left_alone() {
        let net = chain2();
        let compiled = aggregate(&net, DEFAULT_MAX_CLUSTER_STATES).unwrap();
        assert!(compiled.aggregation.is_identity());
        for (orig, node) in net.nodes.iter().zip(&compiled.nodes) {
            assert_eq!(node.name, orig.name());
            assert_eq!(node.parents, orig.parents);
        }
        match &net.nodes[1].quantification {
            Quantification::Cpt(cpt) => assert_eq!(&compiled.nodes[1].tensor, cpt),
            _ => unreachable!(),
        }
    }

    #[test]
    fn oversized_cluster_is_refused() {
        let err = aggregate(&diamond(), 3).unwrap_err();
        assert_eq!(err.kind(), "cluster-too-large");
    }

    #[test]
    fn compound_decode_is_row_major() {
        let compiled = aggregate(&diamond(), DEFAULT_MAX_CLUSTER_STATES).unwrap();
        let bc = &compiled.nodes[1];
        assert_eq!(bc.decode(0), vec![0, 0]);
        assert_eq!(bc.decode(1), vec![0, 1]);
        assert_eq!(bc.decode(2), vec![1, 0]);
        assert_eq!(bc.decode(3), vec![1, 1]);
    }
}
