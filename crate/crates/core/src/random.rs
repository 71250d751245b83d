//! Seeded generators of random models, for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::compiler::detect_loops;
use crate::gate::GateSpec;
use crate::influence::{ChanceNode, DecisionNode, InfluenceDiagram, ValueNode};
use crate::model::{BeliefNetwork, Cpt, Evidence, Finding, LikelihoodVector, Node, Quantification, Variable};
use crate::taxonomy::Taxonomy;

/// Shape limits for generated networks.
#[derive(Debug, Clone, Copy)]
pub struct NetworkShape {
    pub max_nodes: usize,
    pub max_values: usize,
    pub max_parents: usize,
    /// Upper bound on the product of all cardinalities.
    pub max_joint_states: usize,
    /// Chance that a table entry is forced to zero.
    pub zero_rate: f64,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            max_nodes: 12,
            max_values: 4,
            max_parents: 3,
            max_joint_states: 1 << 18,
            zero_rate: 0.05,
        }
    }
}

/// Random distribution over `k` values; entries may be zero but never all.
pub fn distribution<R: Rng>(rng: &mut R, k: usize, zero_rate: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..k)
            .map(|_| if rng.gen_bool(zero_rate) { 0.0 } else { rng.gen_range(0.01..1.0) })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 {
            return raw.into_iter().map(|x| x / sum).collect();
        }
    }
}

fn cards_within<R: Rng>(rng: &mut R, n: usize, shape: &NetworkShape) -> Vec<usize> {
    let mut cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=shape.max_values.max(2))).collect();
    while cards.iter().product::<usize>() > shape.max_joint_states {
        let i = rng.gen_range(0..n);
        if cards[i] > 2 {
            cards[i] -= 1;
        } else if cards.iter().all(|&c| c == 2) {
            break;
        }
    }
    cards
}

fn quantify<R: Rng>(rng: &mut R, parents: &[Vec<usize>], cards: &[usize], shape: &NetworkShape) -> BeliefNetwork {
    let mut net = BeliefNetwork::new("random");
    for (i, ps) in parents.iter().enumerate() {
        let values: Vec<String> = (0..cards[i]).map(|v| format!("v{v}")).collect();
        let quantification = if ps.is_empty() {
            Quantification::Prior(distribution(rng, cards[i], shape.zero_rate))
        } else {
            let pc: Vec<usize> = ps.iter().map(|&p| cards[p]).collect();
            let rows: Vec<Vec<f64>> = (0..pc.iter().product::<usize>())
                .map(|_| distribution(rng, cards[i], shape.zero_rate))
                .collect();
            Quantification::Cpt(Cpt::from_rows(&pc, &rows).expect("consistent rows"))
        };
        net.nodes.push(Node {
            variable: Variable {
                name: format!("N{i}"),
                values,
            },
            parents: ps.clone(),
            quantification,
        });
    }
    net
}

/// Random singly connected network (possibly a forest). Edge directions are
/// random, so nodes may have several parents.
pub fn polytree<R: Rng>(rng: &mut R, shape: &NetworkShape) -> BeliefNetwork {
    let n = rng.gen_range(1..=shape.max_nodes);
    let cards = cards_within(rng, n, shape);
    // attach each node to an earlier one; direction picked at random
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        if rng.gen_bool(0.1) {
            continue;
        }
        let j = rng.gen_range(0..i);
        let down = rng.gen_bool(0.5);
        if (down || parents[j].len() >= shape.max_parents) && parents[i].len() < shape.max_parents {
            parents[i].push(j);
        } else if parents[j].len() < shape.max_parents {
            parents[j].push(i);
        }
    }
    // declaration order must put parents first
    let order = topological(&parents);
    let mut rank = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        rank[v] = k;
    }
    let mut reordered = vec![Vec::new(); n];
    let mut reordered_cards = vec![0; n];
    for v in 0..n {
        reordered[rank[v]] = parents[v].iter().map(|&p| rank[p]).collect();
        reordered_cards[rank[v]] = cards[v];
    }
    quantify(rng, &reordered, &reordered_cards, shape)
}

fn topological(parents: &[Vec<usize>]) -> Vec<usize> {
    let n = parents.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .find(|&i| !placed[i] && parents[i].iter().all(|&p| placed[p]))
            .expect("acyclic by construction");
        placed[next] = true;
        order.push(next);
    }
    order
}

/// Random network whose skeleton has at least one undirected cycle.
pub fn multiply_connected<R: Rng>(rng: &mut R, shape: &NetworkShape) -> BeliefNetwork {
    loop {
        let n = rng.gen_range(3..=shape.max_nodes.max(3));
        let cards = cards_within(rng, n, shape);
        let parents: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut ps: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.4)).collect();
                ps.shuffle(rng);
                ps.truncate(shape.max_parents);
                ps.sort_unstable();
                ps
            })
            .collect();
        let net = quantify(rng, &parents, &cards, shape);
        if !detect_loops(&net).is_empty() {
            return net;
        }
    }
}

/// Up to `max_findings` findings on distinct nodes; about a third virtual.
pub fn evidence<R: Rng>(rng: &mut R, net: &BeliefNetwork, max_findings: usize) -> Evidence {
    let mut nodes: Vec<usize> = (0..net.nodes.len()).collect();
    nodes.shuffle(rng);
    let k = rng.gen_range(0..=max_findings.min(nodes.len()));
    let mut ev = Evidence::new();
    for &i in &nodes[..k] {
        let var = &net.nodes[i].variable;
        let finding = if rng.gen_bool(0.33) {
            let w: Vec<f64> = (0..var.cardinality()).map(|_| rng.gen_range(0.0..3.0)).collect();
            match LikelihoodVector::new(w) {
                Ok(lv) => Finding::Virtual(lv),
                Err(_) => Finding::Instantiated(var.values[0].clone()),
            }
        } else {
            Finding::Instantiated(var.values[rng.gen_range(0..var.cardinality())].clone())
        };
        ev.insert(var.name.clone(), finding);
    }
    ev
}

/// A canonical gate of the given kind with `n_parents` parents. Or/And use
/// binary variables; Max/Min draw parent and child cardinalities up to 4.
pub fn gate<R: Rng>(rng: &mut R, kind: crate::gate::GateKind, n_parents: usize) -> (GateSpec, Vec<Variable>, Variable) {
    use crate::gate::GateKind::*;
    let var = |name: String, k: usize| Variable {
        name,
        values: (0..k).map(|v| format!("v{v}")).collect(),
    };
    match kind {
        NoisyOr | NoisyAnd => {
            let parents = (0..n_parents).map(|i| var(format!("U{i}"), 2)).collect();
            let strengths = (0..n_parents).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let leak = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.2) } else { 0.0 };
            let spec = if kind == NoisyOr {
                GateSpec::NoisyOr { strengths, leak }
            } else {
                GateSpec::NoisyAnd { strengths, leak }
            };
            (spec, parents, var("X".into(), 2))
        }
        NoisyMax | NoisyMin => {
            let child_card = rng.gen_range(2..=4);
            let parents: Vec<Variable> = (0..n_parents).map(|i| var(format!("U{i}"), rng.gen_range(2..=3))).collect();
            let tables = parents
                .iter()
                .map(|p| (0..p.cardinality()).map(|_| distribution(rng, child_card, 0.1)).collect())
                .collect();
            let leak = rng.gen_bool(0.5).then(|| distribution(rng, child_card, 0.0));
            let spec = if kind == NoisyMax {
                GateSpec::NoisyMax { tables, leak }
            } else {
                GateSpec::NoisyMin { tables, leak }
            };
            (spec, parents, var("X".into(), child_card))
        }
        Bool => panic!("boolean gates have no random parameters"),
    }
}

/// Random influence diagram: up to 3 decisions with up to 3 alternatives and
/// up to 5 chance nodes. Items are laid out in time order; a decision can
/// observe any chance node declared before it.
pub fn diagram<R: Rng>(rng: &mut R) -> InfluenceDiagram {
    let n_dec = rng.gen_range(1..=3);
    let n_chance = rng.gen_range(1..=5);
    let mut items: Vec<bool> = std::iter::repeat_n(true, n_dec)
        .chain(std::iter::repeat_n(false, n_chance))
        .collect();
    items.shuffle(rng);
    let mut chance: Vec<ChanceNode> = Vec::new();
    let mut decisions: Vec<DecisionNode> = Vec::new();
    // (name, cardinality) of every item so far
    let mut earlier: Vec<(String, usize)> = Vec::new();
    for is_decision in items {
        if is_decision {
            let name = format!("D{}", decisions.len());
            let k = rng.gen_range(2..=3);
            let informed_by = chance
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|c| c.variable.name.clone())
                .collect();
            decisions.push(DecisionNode {
                name: name.clone(),
                alternatives: (0..k).map(|a| format!("a{a}")).collect(),
                informed_by,
            });
            earlier.push((name, k));
        } else {
            let name = format!("C{}", chance.len());
            let k = rng.gen_range(2..=3);
            let mut parents: Vec<(String, usize)> = earlier.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
            parents.truncate(2);
            let quantification = if parents.is_empty() {
                Quantification::Prior(distribution(rng, k, 0.05))
            } else {
                let pc: Vec<usize> = parents.iter().map(|p| p.1).collect();
                let rows: Vec<Vec<f64>> = (0..pc.iter().product::<usize>()).map(|_| distribution(rng, k, 0.05)).collect();
                Quantification::Cpt(Cpt::from_rows(&pc, &rows).expect("consistent rows"))
            };
            chance.push(ChanceNode {
                variable: Variable {
                    name: name.clone(),
                    values: (0..k).map(|v| format!("x{v}")).collect(),
                },
                parents: parents.into_iter().map(|p| p.0).collect(),
                quantification,
            });
            earlier.push((name, k));
        }
    }
    let mut value_parents: Vec<(String, usize)> = earlier.clone();
    value_parents.shuffle(rng);
    value_parents.truncate(rng.gen_range(1..=3));
    let states: usize = value_parents.iter().map(|p| p.1).product();
    let table: Vec<f64> = (0..states).map(|_| rng.gen_range(-20..=20) as f64 / 2.0).collect();
    InfluenceDiagram {
        name: "random".into(),
        chance,
        decisions,
        value: ValueNode {
            name: "U".into(),
            parents: value_parents.into_iter().map(|p| p.0).collect(),
            table,
        },
    }
}

/// Random taxonomy with overlapping classes.
pub fn taxonomy<R: Rng>(rng: &mut R) -> Taxonomy {
    let n = rng.gen_range(3..=8);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let prior = distribution(rng, n, 0.0);
    let sum: f64 = prior.iter().sum();
    let prior = if (sum - 1.0).abs() > 1e-12 { None } else { Some(prior) };
    let mut t = Taxonomy::new("random", &refs, prior).expect("valid taxonomy");
    let k = rng.gen_range(1..=6);
    for c in 0..k {
        let members: Vec<&str> = refs.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let members = if members.is_empty() { vec![refs[c % n]] } else { members };
        t.add_class(&format!("K{c}"), &members, None).expect("fresh class name");
    }
    t
}
