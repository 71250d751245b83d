use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SourceSpan;
use crate::gate::{BoolExpr, GateKind};

/// Source location attached to a declaration. Ignored by equality so that
/// re-parsed text compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Loc(pub Option<SourceSpan>);

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Top-level declarations, each kind sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub networks: BTreeMap<String, NetworkDecl>,
    pub taxonomies: BTreeMap<String, TaxonomyDecl>,
    pub diagrams: BTreeMap<String, DiagramDecl>,
    pub templates: BTreeMap<String, TemplateDecl>,
    /// Sorted by target network, then prefix.
    pub uses: Vec<UseDecl>,
}

impl ModelSet {
    pub fn is_expanded(&self) -> bool {
        self.templates.is_empty() && self.uses.is_empty()
    }

    pub(crate) fn sort_uses(&mut self) {
        self.uses.sort_by(|a, b| {
            (a.network.as_deref(), &a.prefix, &a.template).cmp(&(b.network.as_deref(), &b.prefix, &b.template))
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDecl {
    pub name: String,
    pub nodes: Vec<NodeDecl>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDecl {
    pub name: String,
    pub values: Vec<String>,
    pub parents: Vec<String>,
    pub quant: QuantDecl,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantDecl {
    Prior(Vec<f64>),
    Cpt(Vec<Vec<f64>>),
    Gate(GateDecl),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateParam {
    Scalar(f64),
    Vector(Vec<f64>),
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecl {
    /// Parameters keyed by parent name, in written order.
    Canonical {
        kind: GateKind,
        params: Vec<(String, GateParam)>,
        leak: Option<GateParam>,
    },
    Bool(BoolExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyDecl {
    pub name: String,
    pub singletons: Vec<String>,
    pub prior: Option<Vec<f64>>,
    pub classes: Vec<ClassDecl>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub members: Vec<String>,
    pub binding: Option<BindingDecl>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingDecl {
    pub network: String,
    pub node: String,
    pub confirm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramDecl {
    pub name: String,
    pub chance: Vec<NodeDecl>,
    pub decisions: Vec<DecisionDecl>,
    pub value: Option<ValueDecl>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDecl {
    pub name: String,
    pub alternatives: Vec<String>,
    pub informed_by: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDecl {
    pub name: String,
    pub parents: Vec<String>,
    /// Rows over all parents but the last; columns over the last parent.
    pub table: Vec<Vec<f64>>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateDecl {
    pub name: String,
    pub formals: Vec<String>,
    pub body: Vec<TemplateItem>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateItem {
    Node(NodeDecl),
    Use(UseDecl),
}

/// `use T(args) as prefix [in network];` The target network is absent for
/// uses nested inside a template body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseDecl {
    pub template: String,
    pub args: Vec<String>,
    pub prefix: String,
    pub network: Option<String>,
    pub loc: Loc,
}
