//! Declarations to domain objects.

use std::collections::HashMap;

use super::ast::*;
use crate::error::{Error, Result};
use crate::gate::{GateKind, GateSpec};
use crate::influence::{ChanceNode, DecisionNode, InfluenceDiagram, ValueNode};
use crate::model::{BeliefNetwork, Cpt, Node, Quantification, Variable};
use crate::taxonomy::{Binding, Taxonomy};

/// Domain objects of an expanded model set.
#[derive(Debug, Clone, PartialEq)]
pub struct Lowered {
    pub networks: Vec<BeliefNetwork>,
    pub taxonomies: Vec<Taxonomy>,
    pub diagrams: Vec<InfluenceDiagram>,
}

fn unresolved(name: &str, context: String, loc: Loc) -> Error {
    Error::UnresolvedReference {
        name: name.to_string(),
        context,
        span: loc.0,
    }
}

fn gate_names(gate: &GateDecl) -> Vec<&str> {
    match gate {
        GateDecl::Canonical { params, .. } => params.iter().map(|(n, _)| n.as_str()).collect(),
        GateDecl::Bool(e) => e.atoms().into_iter().map(|(n, _)| n).collect(),
    }
}

fn check_node(node: &NodeDecl, known: &dyn Fn(&str) -> bool, owner: &str) -> Result<()> {
    for p in &node.parents {
        if !known(p) {
            return Err(unresolved(p, format!("parents of `{}` in `{owner}`", node.name), node.loc));
        }
    }
    if let QuantDecl::Gate(g) = &node.quant {
        for n in gate_names(g) {
            if !node.parents.iter().any(|p| p == n) {
                return Err(unresolved(n, format!("gate of `{}` (not a parent)", node.name), node.loc));
            }
        }
    }
    Ok(())
}

/// Every name used in an expanded set refers to a declaration.
pub fn check_references(models: &ModelSet) -> Result<()> {
    for net in models.networks.values() {
        let known = |n: &str| net.nodes.iter().any(|d| d.name == n);
        for node in &net.nodes {
            check_node(node, &known, &net.name)?;
        }
    }
    for tax in models.taxonomies.values() {
        for class in &tax.classes {
            for m in &class.members {
                if !tax.singletons.contains(m) {
                    return Err(unresolved(m, format!("class `{}`", class.name), class.loc));
                }
            }
            if let Some(b) = &class.binding {
                let ctx = format!("binding of class `{}`", class.name);
                let net = models
                    .networks
                    .get(&b.network)
                    .ok_or_else(|| unresolved(&b.network, ctx.clone(), class.loc))?;
                let node = net
                    .nodes
                    .iter()
                    .find(|n| n.name == b.node)
                    .ok_or_else(|| unresolved(&b.node, ctx.clone(), class.loc))?;
                if !node.values.contains(&b.confirm) {
                    return Err(unresolved(&b.confirm, ctx, class.loc));
                }
            }
        }
    }
    for d in models.diagrams.values() {
        let known = |n: &str| d.chance.iter().any(|c| c.name == n) || d.decisions.iter().any(|x| x.name == n);
        for node in &d.chance {
            check_node(node, &known, &d.name)?;
        }
        for dec in &d.decisions {
            for o in &dec.informed_by {
                if !known(o) {
                    return Err(unresolved(o, format!("information set of `{}`", dec.name), dec.loc));
                }
            }
        }
        if let Some(v) = &d.value {
            for p in &v.parents {
                if !known(p) {
                    return Err(unresolved(p, format!("parents of `{}`", v.name), v.loc));
                }
            }
        }
    }
    Ok(())
}

fn scalar(kind: GateKind, name: &str, p: &GateParam) -> Result<f64> {
    match p {
        GateParam::Scalar(x) => Ok(*x),
        _ => Err(Error::Invalid(format!("{} parameter `{name}` must be a number", kind.keyword()))),
    }
}

fn lower_gate(node: &NodeDecl, gate: &GateDecl) -> Result<GateSpec> {
    let (kind, params, leak) = match gate {
        GateDecl::Bool(e) => return Ok(GateSpec::Bool { expr: e.clone() }),
        GateDecl::Canonical { kind, params, leak } => (*kind, params, leak),
    };
    if params.len() != node.parents.len() {
        return Err(Error::ArityMismatch {
            context: format!("{} parameters of `{}`", kind.keyword(), node.name),
            expected: node.parents.len(),
            found: params.len(),
        });
    }
    let ordered = node
        .parents
        .iter()
        .map(|p| {
            params
                .iter()
                .find(|(n, _)| n == p)
                .map(|(_, v)| v)
                .ok_or_else(|| unresolved(p, format!("{} parameters of `{}`", kind.keyword(), node.name), node.loc))
        })
        .collect::<Result<Vec<_>>>()?;
    match kind {
        GateKind::NoisyOr | GateKind::NoisyAnd => {
            let strengths = ordered
                .iter()
                .zip(&node.parents)
                .map(|(v, n)| scalar(kind, n, v))
                .collect::<Result<Vec<_>>>()?;
            let leak = leak.as_ref().map(|l| scalar(kind, "leak", l)).transpose()?.unwrap_or(0.0);
            Ok(if kind == GateKind::NoisyOr {
                GateSpec::NoisyOr { strengths, leak }
            } else {
                GateSpec::NoisyAnd { strengths, leak }
            })
        }
        GateKind::NoisyMax | GateKind::NoisyMin => {
            let tables = ordered
                .iter()
                .zip(&node.parents)
                .map(|(v, n)| match v {
                    GateParam::Table(t) => Ok(t.clone()),
                    GateParam::Vector(row) => Ok(vec![row.clone()]),
                    GateParam::Scalar(_) => Err(Error::Invalid(format!(
                        "{} parameter `{n}` must be a table of rows",
                        kind.keyword()
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            let leak = match leak {
                None => None,
                Some(GateParam::Vector(v)) => Some(v.clone()),
                Some(GateParam::Table(t)) if t.len() == 1 => Some(t[0].clone()),
                Some(_) => return Err(Error::Invalid(format!("{} leak must be a list", kind.keyword()))),
            };
            Ok(if kind == GateKind::NoisyMax {
                GateSpec::NoisyMax { tables, leak }
            } else {
                GateSpec::NoisyMin { tables, leak }
            })
        }
        GateKind::Bool => unreachable!("handled above"),
    }
}

fn lower_quant(node: &NodeDecl, parent_cards: &[usize]) -> Result<Quantification> {
    match &node.quant {
        QuantDecl::Prior(p) => Ok(Quantification::Prior(p.clone())),
        QuantDecl::Cpt(rows) => {
            if parent_cards.is_empty() && rows.len() == 1 {
                return Ok(Quantification::Prior(rows[0].clone()));
            }
            let width = rows[0].len();
            if rows.iter().any(|r| r.len() != width) {
                return Err(Error::ArityMismatch {
                    context: format!("rows of the table of `{}`", node.name),
                    expected: width,
                    found: rows.iter().map(Vec::len).find(|&l| l != width).unwrap_or(0),
                });
            }
            // a wrong row count still yields a table so validation can report its shape
            let expected: usize = parent_cards.iter().product();
            let cards: Vec<usize> = if rows.len() == expected { parent_cards.to_vec() } else { vec![rows.len()] };
            Ok(Quantification::Cpt(Cpt::from_rows(&cards, rows)?))
        }
        QuantDecl::Gate(g) => Ok(Quantification::Gate(lower_gate(node, g)?)),
    }
}

fn variable(node: &NodeDecl) -> Variable {
    Variable {
        name: node.name.clone(),
        values: node.values.clone(),
    }
}

pub fn lower_network(decl: &NetworkDecl) -> Result<BeliefNetwork> {
    let index: HashMap<&str, usize> = decl.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let mut net = BeliefNetwork::new(decl.name.clone());
    for node in &decl.nodes {
        let parents = node
            .parents
            .iter()
            .map(|p| {
                index
                    .get(p.as_str())
                    .copied()
                    .ok_or_else(|| unresolved(p, format!("parents of `{}`", node.name), node.loc))
            })
            .collect::<Result<Vec<_>>>()?;
        let cards: Vec<usize> = parents.iter().map(|&p| decl.nodes[p].values.len()).collect();
        net.nodes.push(Node {
            variable: variable(node),
            parents,
            quantification: lower_quant(node, &cards)?,
        });
    }
    Ok(net)
}

pub fn lower_taxonomy(decl: &TaxonomyDecl) -> Result<Taxonomy> {
    let singletons: Vec<&str> = decl.singletons.iter().map(String::as_str).collect();
    let mut t = Taxonomy::new(decl.name.clone(), &singletons, decl.prior.clone())?;
    for c in &decl.classes {
        let members: Vec<&str> = c.members.iter().map(String::as_str).collect();
        let binding = c.binding.as_ref().map(|b| Binding {
            network: b.network.clone(),
            node: b.node.clone(),
            confirm: b.confirm.clone(),
        });
        t.add_class(&c.name, &members, binding)?;
    }
    Ok(t)
}

pub fn lower_diagram(decl: &DiagramDecl) -> Result<InfluenceDiagram> {
    let card = |name: &str| -> Option<usize> {
        decl.chance
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.len())
            .or_else(|| decl.decisions.iter().find(|d| d.name == name).map(|d| d.alternatives.len()))
    };
    let chance = decl
        .chance
        .iter()
        .map(|c| {
            let cards: Vec<usize> = c.parents.iter().map(|p| card(p).unwrap_or(1)).collect();
            Ok(ChanceNode {
                variable: variable(c),
                parents: c.parents.clone(),
                quantification: lower_quant(c, &cards)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decisions = decl
        .decisions
        .iter()
        .map(|d| DecisionNode {
            name: d.name.clone(),
            alternatives: d.alternatives.clone(),
            informed_by: d.informed_by.clone(),
        })
        .collect();
    let v = decl.value.as_ref().ok_or_else(|| Error::Semantic {
        span: decl.loc.0.unwrap_or_default(),
        message: format!("diagram `{}` needs a value node", decl.name),
    })?;
    Ok(InfluenceDiagram {
        name: decl.name.clone(),
        chance,
        decisions,
        value: ValueNode {
            name: v.name.clone(),
            parents: v.parents.clone(),
            table: v.table.concat(),
        },
    })
}

/// Lowers an expanded set; fails if templates remain.
pub fn lower(models: &ModelSet) -> Result<Lowered> {
    if !models.is_expanded() {
        return Err(Error::Invalid("templates must be expanded before lowering".into()));
    }
    check_references(models)?;
    Ok(Lowered {
        networks: models.networks.values().map(lower_network).collect::<Result<_>>()?,
        taxonomies: models.taxonomies.values().map(lower_taxonomy).collect::<Result<_>>()?,
        diagrams: models.diagrams.values().map(lower_diagram).collect::<Result<_>>()?,
    })
}
