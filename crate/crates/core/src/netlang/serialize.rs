//! Canonical text form. Declarations come out sorted, indentation is fixed
//! and numbers use at most 12 significant digits whenever that reproduces
//! the stored value exactly.

use std::fmt::Write;

use super::ast::*;

/// Shortest text for `x` that parses back to the same value, preferring a
/// 12-significant-digit rounding.
pub fn format_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let v = if rounded == x { rounded } else { x };
    let s = format!("{v}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn numbers(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(", ")
}

fn idents(xs: &[String]) -> String {
    xs.join(", ")
}

fn table(rows: &[Vec<f64>]) -> String {
    let body = rows.iter().map(|r| numbers(r)).collect::<Vec<_>>().join("; ");
    format!("{{{body}}}")
}

fn param(p: &GateParam) -> String {
    match p {
        GateParam::Scalar(x) => format_number(*x),
        GateParam::Vector(v) => format!("[{}]", numbers(v)),
        GateParam::Table(t) => table(t),
    }
}

fn node(out: &mut String, n: &NodeDecl, indent: &str) {
    let _ = writeln!(out, "{indent}node {} {{", n.name);
    let _ = writeln!(out, "{indent}  values: [{}];", idents(&n.values));
    if !n.parents.is_empty() {
        let _ = writeln!(out, "{indent}  parents: [{}];", idents(&n.parents));
    }
    let q = match &n.quant {
        QuantDecl::Prior(p) => format!("prior: [{}];", numbers(p)),
        QuantDecl::Cpt(rows) => format!("cpt: {};", table(rows)),
        QuantDecl::Gate(GateDecl::Bool(e)) => format!("model: bool({e});"),
        QuantDecl::Gate(GateDecl::Canonical { kind, params, leak }) => {
            let mut items: Vec<String> = params.iter().map(|(n, p)| format!("{n}: {}", param(p))).collect();
            if let Some(l) = leak {
                items.push(format!("leak: {}", param(l)));
            }
            format!("model: {}({});", kind.keyword(), items.join(", "))
        }
    };
    let _ = writeln!(out, "{indent}  {q}");
    let _ = writeln!(out, "{indent}}}");
}

fn use_line(u: &UseDecl) -> String {
    let target = u.network.as_ref().map(|n| format!(" in {n}")).unwrap_or_default();
    format!("use {}({}) as {}{target};", u.template, idents(&u.args), u.prefix)
}

/// Canonical text; templates and uses are printed, not expanded.
pub fn serialize(models: &ModelSet) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for t in models.templates.values() {
        let mut s = format!("template {}({}) {{\n", t.name, idents(&t.formals));
        for item in &t.body {
            match item {
                TemplateItem::Node(n) => node(&mut s, n, "  "),
                TemplateItem::Use(u) => {
                    let _ = writeln!(s, "  {}", use_line(u));
                }
            }
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    for net in models.networks.values() {
        let mut s = format!("network {} {{\n", net.name);
        for n in &net.nodes {
            node(&mut s, n, "  ");
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    if !models.uses.is_empty() {
        let lines: Vec<String> = models.uses.iter().map(|u| use_line(u) + "\n").collect();
        blocks.push(lines.concat());
    }
    for t in models.taxonomies.values() {
        let mut s = format!("taxonomy {} {{\n  singletons: [{}];\n", t.name, idents(&t.singletons));
        if let Some(p) = &t.prior {
            let _ = writeln!(s, "  prior: [{}];", numbers(p));
        }
        for c in &t.classes {
            let via = c
                .binding
                .as_ref()
                .map(|b| format!(" via {} : {} = {}", b.network, b.node, b.confirm))
                .unwrap_or_default();
            let _ = writeln!(s, "  class {} = [{}]{via};", c.name, idents(&c.members));
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    for d in models.diagrams.values() {
        let mut s = format!("diagram {} {{\n", d.name);
        for n in &d.chance {
            node(&mut s, n, "  ");
        }
        for dec in &d.decisions {
            let _ = writeln!(s, "  decision {} {{", dec.name);
            let _ = writeln!(s, "    alternatives: [{}];", idents(&dec.alternatives));
            if !dec.informed_by.is_empty() {
                let _ = writeln!(s, "    informed_by: [{}];", idents(&dec.informed_by));
            }
            s.push_str("  }\n");
        }
        if let Some(v) = &d.value {
            let _ = writeln!(s, "  value {} {{", v.name);
            let _ = writeln!(s, "    parents: [{}];", idents(&v.parents));
            let _ = writeln!(s, "    table: {};", table(&v.table));
            s.push_str("  }\n");
        }
        s.push_str("}\n");
        blocks.push(s);
    }
    blocks.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_short_and_exact() {
        assert_eq!(format_number(0.9), "0.9");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1 + 0.2), "0.30000000000000004");
        for x in [1.0 / 3.0, 1e-300, 123456.789, 2.5e-7] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }
}
