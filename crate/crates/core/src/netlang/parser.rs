//! Lexer and recursive-descent parser for `.bart` text.

use std::collections::HashSet;

use super::ast::*;
use crate::error::{Error, Result, SourceSpan};
use crate::gate::{BoolExpr, GateKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Punct(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(x) => format!("number {x}"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

const PUNCT: &[char] = &['{', '}', '[', ']', '(', ')', ';', ',', ':', '=', '&', '|', '!'];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let span_at = |start: usize, end: usize, line: usize, cs: usize, ce: usize| SourceSpan {
        line,
        col_start: cs,
        col_end: ce,
        start,
        end,
    };
    let byte = |i: usize| chars.get(i).map_or(text.len(), |c| c.0);
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let next_is_digit = |k: usize| chars.get(k).is_some_and(|c| c.1.is_ascii_digit());
        let tok = if is_ident_start(c) {
            while i < chars.len() && is_ident_char(chars[i].1) {
                i += 1;
            }
            Tok::Ident(text[byte(start)..byte(i)].to_string())
        } else if c.is_ascii_digit() || (c == '-' && (next_is_digit(i + 1) || (chars.get(i + 1).is_some_and(|c| c.1 == '.') && next_is_digit(i + 2)))) || (c == '.' && next_is_digit(i + 1)) {
            i += 1;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut k = i + 1;
                if k < chars.len() && matches!(chars[k].1, '+' | '-') {
                    k += 1;
                }
                if next_is_digit(k) {
                    i = k;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw = &text[byte(start)..byte(i)];
            let span = span_at(byte(start), byte(i), line, col, col + (i - start));
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Tok::Number(x),
                _ => {
                    return Err(Error::Syntax {
                        span,
                        message: format!("malformed number `{raw}`"),
                        expected: vec!["number".into()],
                    })
                }
            }
        } else if PUNCT.contains(&c) {
            i += 1;
            Tok::Punct(c)
        } else {
            let span = span_at(byte(i), byte(i + 1), line, col, col + 1);
            return Err(Error::Syntax {
                span,
                message: format!("unexpected character {c:?}"),
                expected: Vec::new(),
            });
        };
        let width = i - start;
        out.push(Token {
            tok,
            span: span_at(byte(start), byte(i), line, col, col + width),
        });
        col += width;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: span_at(text.len(), text.len(), line, col, col),
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn semantic(span: SourceSpan, message: impl Into<String>) -> Error {
    Error::Semantic {
        span,
        message: message.into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Error {
        let found = self.peek().describe();
        Error::Syntax {
            span: self.span(),
            message: format!("unexpected {found}"),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn punct(&mut self, c: char) -> Result<()> {
        if self.is_punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    /// `kw :`
    fn field(&mut self, kw: &str) -> Result<()> {
        self.keyword(kw)?;
        self.punct(':')
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match *self.peek() {
            Tok::Number(x) => {
                self.bump();
                Ok(x)
            }
            _ => Err(self.error(&["number"])),
        }
    }

    /// `open item {, item} close`, possibly empty.
    fn list<T>(&mut self, open: char, close: char, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.punct(open)?;
        let mut out = Vec::new();
        if self.is_punct(close) {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.is_punct(',') {
                self.bump();
            } else if self.is_punct(close) {
                self.bump();
                return Ok(out);
            } else {
                return Err(self.error(&["`,`", &format!("`{close}`")]));
            }
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>> {
        self.list('[', ']', Self::ident)
    }

    fn number_list(&mut self) -> Result<Vec<f64>> {
        self.list('[', ']', Self::number)
    }

    /// `{ a, b; c, d }`
    fn table(&mut self) -> Result<Vec<Vec<f64>>> {
        self.punct('{')?;
        let mut rows = vec![Vec::new()];
        loop {
            rows.last_mut().expect("at least one row").push(self.number()?);
            if self.is_punct(',') {
                self.bump();
            } else if self.is_punct(';') {
                self.bump();
                rows.push(Vec::new());
            } else if self.is_punct('}') {
                self.bump();
                return Ok(rows);
            } else {
                return Err(self.error(&["`,`", "`;`", "`}`"]));
            }
        }
    }

    fn modelset(&mut self) -> Result<ModelSet> {
        let mut set = ModelSet::default();
        let mut names: HashSet<String> = HashSet::new();
        let mut claim = |name: &str, span: SourceSpan| {
            if names.insert(name.to_string()) {
                Ok(())
            } else {
                Err(Error::DuplicateName {
                    name: name.to_string(),
                    span: Some(span),
                })
            }
        };
        loop {
            let span = self.span();
            match self.peek().clone() {
                Tok::Eof => return Ok(set),
                Tok::Ident(kw) if kw == "network" => {
                    let n = self.network()?;
                    claim(&n.name, span)?;
                    set.networks.insert(n.name.clone(), n);
                }
                Tok::Ident(kw) if kw == "taxonomy" => {
                    let t = self.taxonomy()?;
                    claim(&t.name, span)?;
                    set.taxonomies.insert(t.name.clone(), t);
                }
                Tok::Ident(kw) if kw == "diagram" => {
                    let d = self.diagram()?;
                    claim(&d.name, span)?;
                    set.diagrams.insert(d.name.clone(), d);
                }
                Tok::Ident(kw) if kw == "template" => {
                    let t = self.template()?;
                    claim(&t.name, span)?;
                    set.templates.insert(t.name.clone(), t);
                }
                Tok::Ident(kw) if kw == "use" => {
                    let u = self.use_decl(true)?;
                    set.uses.push(u);
                }
                _ => return Err(self.error(&["`network`", "`taxonomy`", "`diagram`", "`template`", "`use`"])),
            }
        }
    }

    fn block_end(&mut self) -> Result<()> {
        self.punct('}')?;
        // a trailing `;` after a block is tolerated
        if self.is_punct(';') {
            self.bump();
        }
        Ok(())
    }

    fn network(&mut self) -> Result<NetworkDecl> {
        let start = self.span();
        self.keyword("network")?;
        let name = self.ident()?;
        self.punct('{')?;
        let mut nodes = Vec::new();
        let mut seen = HashSet::new();
        while !self.is_punct('}') {
            if !self.is_keyword("node") {
                return Err(self.error(&["`node`", "`}`"]));
            }
            let span = self.span();
            let node = self.node()?;
            if !seen.insert(node.name.clone()) {
                return Err(Error::DuplicateName {
                    name: node.name,
                    span: Some(span),
                });
            }
            nodes.push(node);
        }
        self.block_end()?;
        Ok(NetworkDecl {
            name,
            nodes,
            loc: Loc(Some(start)),
        })
    }

    fn values(&mut self, owner: &str, span: SourceSpan) -> Result<Vec<String>> {
        let values = self.ident_list()?;
        if values.len() < 2 {
            return Err(semantic(span, format!("variable `{owner}` needs >= 2 values")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = values.iter().find(|v| !seen.insert(v.as_str())) {
            return Err(semantic(span, format!("variable `{owner}` repeats value `{dup}`")));
        }
        Ok(values)
    }

    fn node(&mut self) -> Result<NodeDecl> {
        let start = self.span();
        self.keyword("node")?;
        let name = self.ident()?;
        self.punct('{')?;
        self.field("values")?;
        let values = self.values(&name, start)?;
        self.punct(';')?;
        let mut parents = Vec::new();
        if self.is_keyword("parents") {
            self.field("parents")?;
            parents = self.ident_list()?;
            self.punct(';')?;
        }
        let quant = if self.is_keyword("prior") {
            self.field("prior")?;
            QuantDecl::Prior(self.number_list()?)
        } else if self.is_keyword("cpt") {
            self.field("cpt")?;
            QuantDecl::Cpt(self.table()?)
        } else if self.is_keyword("model") {
            self.field("model")?;
            QuantDecl::Gate(self.gate()?)
        } else {
            let mut expected = vec!["`prior`", "`cpt`", "`model`"];
            if parents.is_empty() {
                expected.insert(0, "`parents`");
            }
            return Err(self.error(&expected));
        };
        self.punct(';')?;
        self.block_end()?;
        Ok(NodeDecl {
            name,
            values,
            parents,
            quant,
            loc: Loc(Some(start)),
        })
    }

    fn gate(&mut self) -> Result<GateDecl> {
        let kind = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "noisy_or" => GateKind::NoisyOr,
                "noisy_and" => GateKind::NoisyAnd,
                "noisy_max" => GateKind::NoisyMax,
                "noisy_min" => GateKind::NoisyMin,
                "bool" => GateKind::Bool,
                _ => return Err(self.error(&["gate kind"])),
            },
            _ => return Err(self.error(&["gate kind"])),
        };
        self.bump();
        if kind == GateKind::Bool {
            self.punct('(')?;
            let expr = self.bool_or()?;
            self.punct(')')?;
            return Ok(GateDecl::Bool(expr));
        }
        let mut leak = None;
        let mut params = Vec::new();
        let items = self.list('(', ')', |p| {
            let span = p.span();
            let name = p.ident()?;
            p.punct(':')?;
            let value = match p.peek() {
                Tok::Number(_) => GateParam::Scalar(p.number()?),
                Tok::Punct('[') => GateParam::Vector(p.number_list()?),
                Tok::Punct('{') => GateParam::Table(p.table()?),
                _ => return Err(p.error(&["number", "`[`", "`{`"])),
            };
            Ok((span, name, value))
        })?;
        for (span, name, value) in items {
            if name == "leak" {
                if leak.is_some() {
                    return Err(Error::DuplicateName {
                        name,
                        span: Some(span),
                    });
                }
                leak = Some(value);
            } else {
                if params.iter().any(|(n, _)| *n == name) {
                    return Err(Error::DuplicateName {
                        name,
                        span: Some(span),
                    });
                }
                params.push((name, value));
            }
        }
        Ok(GateDecl::Canonical { kind, params, leak })
    }

    fn bool_or(&mut self) -> Result<BoolExpr> {
        let mut items = vec![self.bool_and()?];
        while self.is_punct('|') {
            self.bump();
            items.push(self.bool_and()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("one item") } else { BoolExpr::Or(items) })
    }

    fn bool_and(&mut self) -> Result<BoolExpr> {
        let mut items = vec![self.bool_unary()?];
        while self.is_punct('&') {
            self.bump();
            items.push(self.bool_unary()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("one item") } else { BoolExpr::And(items) })
    }

    fn bool_unary(&mut self) -> Result<BoolExpr> {
        if self.is_punct('!') {
            self.bump();
            return Ok(BoolExpr::Not(Box::new(self.bool_unary()?)));
        }
        if self.is_punct('(') {
            self.bump();
            let e = self.bool_or()?;
            self.punct(')')?;
            return Ok(e);
        }
        if *self.peek_at(1) != Tok::Punct('=') && (self.is_keyword("true") || self.is_keyword("false")) {
            let b = self.is_keyword("true");
            self.bump();
            return Ok(BoolExpr::Const(b));
        }
        let node = self.ident().map_err(|_| self.error(&["identifier", "`(`", "`!`", "`true`", "`false`"]))?;
        self.punct('=')?;
        let value = self.ident()?;
        Ok(BoolExpr::Is { node, value })
    }

    fn taxonomy(&mut self) -> Result<TaxonomyDecl> {
        let start = self.span();
        self.keyword("taxonomy")?;
        let name = self.ident()?;
        self.punct('{')?;
        self.field("singletons")?;
        let singletons = self.ident_list()?;
        self.punct(';')?;
        let mut seen: HashSet<String> = HashSet::new();
        for s in &singletons {
            if !seen.insert(s.clone()) {
                return Err(Error::DuplicateName {
                    name: s.clone(),
                    span: Some(start),
                });
            }
        }
        let mut prior = None;
        if self.is_keyword("prior") {
            self.field("prior")?;
            prior = Some(self.number_list()?);
            self.punct(';')?;
        }
        let mut classes = Vec::new();
        while self.is_keyword("class") {
            let span = self.span();
            self.bump();
            let cname = self.ident()?;
            if !seen.insert(cname.clone()) {
                return Err(Error::DuplicateName {
                    name: cname,
                    span: Some(span),
                });
            }
            self.punct('=')?;
            let members = self.ident_list()?;
            let mut binding = None;
            if self.is_keyword("via") {
                self.bump();
                let network = self.ident()?;
                self.punct(':')?;
                let node = self.ident()?;
                self.punct('=')?;
                let confirm = self.ident()?;
                binding = Some(BindingDecl { network, node, confirm });
            }
            self.punct(';')?;
            classes.push(ClassDecl {
                name: cname,
                members,
                binding,
                loc: Loc(Some(span)),
            });
        }
        if !self.is_punct('}') {
            return Err(self.error(&["`class`", "`}`"]));
        }
        self.block_end()?;
        Ok(TaxonomyDecl {
            name,
            singletons,
            prior,
            classes,
            loc: Loc(Some(start)),
        })
    }

    fn diagram(&mut self) -> Result<DiagramDecl> {
        let start = self.span();
        self.keyword("diagram")?;
        let name = self.ident()?;
        self.punct('{')?;
        let mut d = DiagramDecl {
            name,
            chance: Vec::new(),
            decisions: Vec::new(),
            value: None,
            loc: Loc(Some(start)),
        };
        let mut seen: HashSet<String> = HashSet::new();
        loop {
            let span = self.span();
            let declared = if self.is_keyword("node") {
                let n = self.node()?;
                let name = n.name.clone();
                d.chance.push(n);
                name
            } else if self.is_keyword("decision") {
                self.bump();
                let dname = self.ident()?;
                self.punct('{')?;
                self.field("alternatives")?;
                let alternatives = self.values(&dname, span)?;
                self.punct(';')?;
                let mut informed_by = Vec::new();
                if self.is_keyword("informed_by") {
                    self.field("informed_by")?;
                    informed_by = self.ident_list()?;
                    self.punct(';')?;
                }
                self.block_end()?;
                d.decisions.push(DecisionDecl {
                    name: dname.clone(),
                    alternatives,
                    informed_by,
                    loc: Loc(Some(span)),
                });
                dname
            } else if self.is_keyword("value") {
                self.bump();
                let vname = self.ident()?;
                self.punct('{')?;
                self.field("parents")?;
                let parents = self.ident_list()?;
                self.punct(';')?;
                self.field("table")?;
                let table = self.table()?;
                self.punct(';')?;
                self.block_end()?;
                if d.value.is_some() {
                    return Err(semantic(span, format!("diagram `{}` has more than one value node", d.name)));
                }
                d.value = Some(ValueDecl {
                    name: vname.clone(),
                    parents,
                    table,
                    loc: Loc(Some(span)),
                });
                vname
            } else if self.is_punct('}') {
                break;
            } else {
                return Err(self.error(&["`node`", "`decision`", "`value`", "`}`"]));
            };
            if !seen.insert(declared.clone()) {
                return Err(Error::DuplicateName {
                    name: declared,
                    span: Some(span),
                });
            }
        }
        if d.value.is_none() {
            return Err(semantic(start, format!("diagram `{}` needs a value node", d.name)));
        }
        self.block_end()?;
        Ok(d)
    }

    fn template(&mut self) -> Result<TemplateDecl> {
        let start = self.span();
        self.keyword("template")?;
        let name = self.ident()?;
        let formals = self.list('(', ')', Self::ident)?;
        let mut seen: HashSet<String> = HashSet::new();
        for f in &formals {
            if !seen.insert(f.clone()) {
                return Err(Error::DuplicateName {
                    name: f.clone(),
                    span: Some(start),
                });
            }
        }
        self.punct('{')?;
        let mut body = Vec::new();
        loop {
            let span = self.span();
            if self.is_keyword("node") {
                let n = self.node()?;
                if !seen.insert(n.name.clone()) {
                    return Err(Error::DuplicateName {
                        name: n.name,
                        span: Some(span),
                    });
                }
                body.push(TemplateItem::Node(n));
            } else if self.is_keyword("use") {
                body.push(TemplateItem::Use(self.use_decl(false)?));
            } else if self.is_punct('}') {
                break;
            } else {
                return Err(self.error(&["`node`", "`use`", "`}`"]));
            }
        }
        self.block_end()?;
        Ok(TemplateDecl {
            name,
            formals,
            body,
            loc: Loc(Some(start)),
        })
    }

    fn use_decl(&mut self, top_level: bool) -> Result<UseDecl> {
        let start = self.span();
        self.keyword("use")?;
        let template = self.ident()?;
        let args = self.list('(', ')', Self::ident)?;
        self.keyword("as")?;
        let prefix = self.ident()?;
        let network = if top_level {
            self.keyword("in")?;
            Some(self.ident()?)
        } else {
            None
        };
        self.punct(';')?;
        Ok(UseDecl {
            template,
            args,
            prefix,
            network,
            loc: Loc(Some(start)),
        })
    }
}

/// Parses text into a model set. Declarations are checked for duplicate
/// names, variable shape and, after template expansion, unresolved references.
pub fn parse(text: &str) -> Result<ModelSet> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0 };
    let mut set = parser.modelset()?;
    set.sort_uses();
    match super::template::expand_templates(&set) {
        Ok(expanded) => super::lower::check_references(&expanded)?,
        // template errors are reported by expansion itself
        Err(Error::TemplateCycle(_)) | Err(Error::ArityMismatch { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(set)
}

/// As [`parse`], for raw bytes that may not be UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<ModelSet> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let at = e.valid_up_to();
            let prefix = &bytes[..at];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count();
            let col = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count();
            Err(Error::Syntax {
                span: SourceSpan {
                    line,
                    col_start: col,
                    col_end: col + 1,
                    start: at,
                    end: (at + 1).min(bytes.len()),
                },
                message: "input is not valid UTF-8".into(),
                expected: Vec::new(),
            })
        }
    }
}
