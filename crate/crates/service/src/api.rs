//! Request and response shapes shared by the CLI and the HTTP service.

use std::collections::BTreeMap;

use bart::classifier::ControllerConfig;
use bart::{CompiledModel, Error, Evidence, Finding};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// A finding as it appears in request bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingBody {
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<Vec<f64>>,
}

impl FindingBody {
    pub fn finding(&self) -> bart::Result<Finding> {
        match (&self.value, &self.likelihood) {
            (Some(v), None) => Ok(Finding::value(v.clone())),
            (None, Some(w)) => Finding::likelihood(w.clone()).map_err(|e| Error::InvalidFinding {
                node: self.node.clone(),
                reason: e.to_string(),
            }),
            _ => Err(Error::InvalidFinding {
                node: self.node.clone(),
                reason: "give exactly one of `value` and `likelihood`".into(),
            }),
        }
    }
}

pub fn findings(bodies: &[FindingBody]) -> bart::Result<Vec<(String, Finding)>> {
    bodies.iter().map(|b| Ok((b.node.clone(), b.finding()?))).collect()
}

pub fn evidence(bodies: &[FindingBody]) -> bart::Result<Evidence> {
    let mut ev = Evidence::new();
    for (node, f) in findings(bodies)? {
        ev.insert(node, f);
    }
    Ok(ev)
}

/// Parses `a=v,b~0.2/0.8`: `=` instantiates, `~` gives likelihood weights.
pub fn parse_evidence_spec(spec: &str) -> Result<Vec<FindingBody>, String> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            if let Some((node, value)) = item.split_once('=') {
                Ok(FindingBody {
                    node: node.trim().to_string(),
                    value: Some(value.trim().to_string()),
                    likelihood: None,
                })
            } else if let Some((node, weights)) = item.split_once('~') {
                let w = weights
                    .split('/')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad weight `{x}` in `{item}`")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FindingBody {
                    node: node.trim().to_string(),
                    value: None,
                    likelihood: Some(w),
                })
            } else {
                Err(format!("evidence `{item}` is neither `node=value` nor `node~w1/w2/...`"))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    Network,
    Classifier,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(rename = "model-kind", alias = "kind", alias = "model_kind")]
    pub kind: SessionKind,
    pub name: String,
    #[serde(default)]
    pub tau_establish: Option<f64>,
    #[serde(default)]
    pub tau_reject: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl CreateSession {
    pub fn config(&self) -> ControllerConfig {
        let d = ControllerConfig::default();
        ControllerConfig {
            tau_establish: self.tau_establish.unwrap_or(d.tau_establish),
            tau_reject: self.tau_reject.unwrap_or(d.tau_reject),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIf {
    pub findings: Vec<FindingBody>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    #[serde(default)]
    pub evidence: Vec<FindingBody>,
    #[serde(default = "yes")]
    pub prune: bool,
}

fn yes() -> bool {
    true
}

/// Whether an error comes from the input (exit 2) or from inference (exit 3).
pub fn is_runtime(e: &Error) -> bool {
    matches!(
        e,
        Error::InconsistentEvidence
            | Error::ConflictingInstantiation(_)
            | Error::NoSuchFinding(_)
            | Error::DegenerateUtility(_)
            | Error::TooManyPaths { .. }
            | Error::AllMassDestroyed(_)
            | Error::UnboundClass(_)
            | Error::StepLimitExceeded(_)
    )
}

/// `{"error": kind, "message": text}` plus the span when there is one.
pub fn error_body(e: &Error) -> Value {
    let mut body = json!({ "error": e.kind(), "message": e.to_string() });
    if let Some(span) = e.span() {
        body["span"] = json!(span);
    }
    if let Error::Compile(diagnostics) = e {
        body["diagnostics"] = json!(diagnostics);
    }
    body
}

/// Names and structure of everything in a compiled model.
pub fn model_summary(model: &CompiledModel) -> Value {
    let networks: Vec<Value> = model
        .networks
        .iter()
        .map(|n| {
            let nodes: Vec<Value> = n
                .original
                .nodes
                .iter()
                .map(|node| {
                    let parents: Vec<&str> = node.parents.iter().map(|&p| n.original.nodes[p].name()).collect();
                    json!({ "name": node.name(), "values": node.variable.values, "parents": parents })
                })
                .collect();
            json!({ "name": n.name, "nodes": nodes, "compounds": n.aggregation.compounds })
        })
        .collect();
    let taxonomies: Vec<Value> = model
        .taxonomies
        .iter()
        .map(|t| {
            let classes: BTreeMap<&String, Value> = t
                .classes
                .iter()
                .map(|(name, c)| {
                    let members: Vec<&str> = c.members.iter().map(|&i| t.singletons[i].as_str()).collect();
                    (name, json!({ "members": members, "binding": c.binding }))
                })
                .collect();
            json!({ "name": t.name, "singletons": t.singletons, "classes": classes })
        })
        .collect();
    let diagrams: Vec<Value> = model
        .diagrams
        .iter()
        .map(|d| {
            let decisions: Vec<Value> =
                d.decisions.iter().map(|x| json!({ "name": x.name, "alternatives": x.alternatives })).collect();
            json!({ "name": d.name, "decisions": decisions })
        })
        .collect();
    json!({
        "source_hash": model.source_hash,
        "networks": networks,
        "taxonomies": taxonomies,
        "diagrams": diagrams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_specs() {
        let ev = parse_evidence_spec("B=t, C~0.2/0.8").unwrap();
        assert_eq!(ev[0].value.as_deref(), Some("t"));
        assert_eq!(ev[1].likelihood.as_deref(), Some(&[0.2, 0.8][..]));
        assert!(parse_evidence_spec("B").is_err());
        assert!(parse_evidence_spec("B~x/1").is_err());
        assert!(parse_evidence_spec("").unwrap().is_empty());
    }

    #[test]
    fn finding_bodies_need_one_form() {
        let both = FindingBody {
            node: "A".into(),
            value: Some("t".into()),
            likelihood: Some(vec![1.0, 1.0]),
        };
        assert_eq!(both.finding().unwrap_err().kind(), "invalid-finding");
        let zero = FindingBody {
            node: "A".into(),
            value: None,
            likelihood: Some(vec![0.0, 0.0]),
        };
        assert_eq!(zero.finding().unwrap_err().kind(), "invalid-finding");
    }
}
