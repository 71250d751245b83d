//! Template instantiation: `use T(args) as p` becomes T's body with formals
//! replaced by the arguments and internal names prefixed `p.`.

use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use crate::error::{Error, Result};
use crate::gate::BoolExpr;

fn rename(map: &BTreeMap<String, String>, name: &str) -> String {
    map.get(name).cloned().unwrap_or_else(|| name.to_string())
}

fn rename_expr(map: &BTreeMap<String, String>, e: &BoolExpr) -> BoolExpr {
    match e {
        BoolExpr::Const(b) => BoolExpr::Const(*b),
        BoolExpr::Is { node, value } => BoolExpr::Is {
            node: rename(map, node),
            value: value.clone(),
        },
        BoolExpr::Not(inner) => BoolExpr::Not(Box::new(rename_expr(map, inner))),
        BoolExpr::And(es) => BoolExpr::And(es.iter().map(|e| rename_expr(map, e)).collect()),
        BoolExpr::Or(es) => BoolExpr::Or(es.iter().map(|e| rename_expr(map, e)).collect()),
    }
}

fn rename_node(map: &BTreeMap<String, String>, node: &NodeDecl) -> NodeDecl {
    let quant = match &node.quant {
        QuantDecl::Gate(GateDecl::Canonical { kind, params, leak }) => QuantDecl::Gate(GateDecl::Canonical {
            kind: *kind,
            params: params.iter().map(|(n, p)| (rename(map, n), p.clone())).collect(),
            leak: leak.clone(),
        }),
        QuantDecl::Gate(GateDecl::Bool(e)) => QuantDecl::Gate(GateDecl::Bool(rename_expr(map, e))),
        q => q.clone(),
    };
    NodeDecl {
        name: rename(map, &node.name),
        values: node.values.clone(),
        parents: node.parents.iter().map(|p| rename(map, p)).collect(),
        quant,
        loc: node.loc,
    }
}

fn check_acyclic(templates: &BTreeMap<String, TemplateDecl>) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn visit(name: &str, templates: &BTreeMap<String, TemplateDecl>, marks: &mut BTreeMap<String, Mark>) -> Result<()> {
        match marks.get(name).copied().unwrap_or(Mark::Fresh) {
            Mark::Done => return Ok(()),
            Mark::Active => return Err(Error::TemplateCycle(name.to_string())),
            Mark::Fresh => {}
        }
        marks.insert(name.to_string(), Mark::Active);
        for item in &templates[name].body {
            if let TemplateItem::Use(u) = item {
                if !templates.contains_key(&u.template) {
                    return Err(Error::UnresolvedReference {
                        name: u.template.clone(),
                        context: format!("template `{name}`"),
                        span: u.loc.0,
                    });
                }
                visit(&u.template, templates, marks)?;
            }
        }
        marks.insert(name.to_string(), Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for name in templates.keys() {
        visit(name, templates, &mut marks)?;
    }
    Ok(())
}

fn instantiate(
    templates: &BTreeMap<String, TemplateDecl>,
    use_decl: &UseDecl,
    args: &[String],
    prefix: &str,
    out: &mut Vec<NodeDecl>,
) -> Result<()> {
    let t = templates.get(&use_decl.template).ok_or_else(|| Error::UnresolvedReference {
        name: use_decl.template.clone(),
        context: format!("use as `{prefix}`"),
        span: use_decl.loc.0,
    })?;
    if args.len() != t.formals.len() {
        return Err(Error::ArityMismatch {
            context: format!("use of template `{}` as `{prefix}`", t.name),
            expected: t.formals.len(),
            found: args.len(),
        });
    }
    let mut map: BTreeMap<String, String> = t.formals.iter().cloned().zip(args.iter().cloned()).collect();
    for item in &t.body {
        if let TemplateItem::Node(n) = item {
            map.insert(n.name.clone(), format!("{prefix}.{}", n.name));
        }
    }
    for item in &t.body {
        match item {
            TemplateItem::Node(n) => out.push(rename_node(&map, n)),
            TemplateItem::Use(u) => {
                let inner_args: Vec<String> = u.args.iter().map(|a| rename(&map, a)).collect();
                instantiate(templates, u, &inner_args, &format!("{prefix}.{}", u.prefix), out)?;
            }
        }
    }
    Ok(())
}

/// Replaces every template use with its instantiated body. The result has
/// no templates or uses, so expansion is idempotent.
pub fn expand_templates(models: &ModelSet) -> Result<ModelSet> {
    check_acyclic(&models.templates)?;
    let mut out = ModelSet {
        networks: models.networks.clone(),
        taxonomies: models.taxonomies.clone(),
        diagrams: models.diagrams.clone(),
        templates: BTreeMap::new(),
        uses: Vec::new(),
    };
    for u in &models.uses {
        let target = u.network.as_deref().unwrap_or_default();
        let mut nodes = Vec::new();
        instantiate(&models.templates, u, &u.args, &u.prefix, &mut nodes)?;
        let net = out.networks.get_mut(target).ok_or_else(|| Error::UnresolvedReference {
            name: target.to_string(),
            context: format!("use of template `{}`", u.template),
            span: u.loc.0,
        })?;
        let mut names: HashSet<String> = net.nodes.iter().map(|n| n.name.clone()).collect();
        for n in nodes {
            if !names.insert(n.name.clone()) {
                return Err(Error::DuplicateName {
                    name: n.name,
                    span: u.loc.0,
                });
            }
            net.nodes.push(n);
        }
    }
    Ok(out)
}
