//! A small graph-pattern language: one `MATCH` over a linear path of at
//! most three hops, a conjunctive `WHERE`, and a plain `RETURN`.
//!
//! ```text
//! Q    := "MATCH" PATH ["WHERE" COND ("AND" COND)*] "RETURN" ITEM ("," ITEM)*
//! PATH := NODE (EDGE NODE)*
//! NODE := "(" VAR [":" LABEL] ["{" PROP ":" VALUE ("," PROP ":" VALUE)* "}"] ")"
//! EDGE := "-[" [":" LABEL] "]->" | "<-[" [":" LABEL] "]-" | "-[" [":" LABEL] "]-"
//! ```
//!
//! Keywords are case-insensitive. Within one match an edge is traversed at
//! most once; node variables may repeat.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::QueryError;
use crate::store::{ColumnClass, Direction, PropertyGraph, Table, Value};

pub const MAX_HOPS: usize = 3;

const AGGREGATES: [&str; 6] = ["count", "sum", "avg", "min", "max", "collect"];
const CLAUSES: [&str; 14] = [
    "ORDER", "LIMIT", "SKIP", "WITH", "UNWIND", "UNION", "CREATE", "MERGE", "DELETE", "DETACH", "SET", "REMOVE",
    "CALL", "OPTIONAL",
];
const KEYWORDS: [&str; 9] = ["MATCH", "WHERE", "AND", "RETURN", "OR", "NOT", "XOR", "DISTINCT", "AS"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeDirection {
    Out,
    In,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePattern {
    pub var: String,
    pub label: Option<String>,
    pub props: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePattern {
    pub direction: EdgeDirection,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    /// The node id bound to a variable.
    Var(String),
    Prop(String, String),
    Literal(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub left: Operand,
    pub op: CompareOp,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReturnItem {
    Var(String),
    Prop(String, String),
}

impl ReturnItem {
    pub fn column_name(&self) -> String {
        match self {
            ReturnItem::Var(v) => v.clone(),
            ReturnItem::Prop(v, p) => format!("{v}.{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternQuery {
    pub nodes: Vec<NodePattern>,
    /// `edges[i]` connects `nodes[i]` and `nodes[i + 1]`.
    pub edges: Vec<EdgePattern>,
    pub conditions: Vec<Condition>,
    pub returns: Vec<ReturnItem>,
}

/// One row per distinct projection of a satisfying assignment, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl BindingsTable {
    pub fn to_table(&self, name: &str) -> Table {
        let classes: Vec<ColumnClass> = (0..self.columns.len())
            .map(|c| {
                let mut vals = self.rows.iter().map(|r| &r[c]).filter(|v| !v.is_null());
                if !self.columns[c].contains('.') {
                    ColumnClass::Identifier
                } else if vals.clone().all(|v| matches!(v, Value::Int(_) | Value::Real(_))) {
                    ColumnClass::Continuous
                } else if vals.all(|v| matches!(v, Value::Str(_) | Value::Bool(_) | Value::Int(_))) {
                    ColumnClass::Categorical
                } else {
                    ColumnClass::Text
                }
            })
            .collect();
        let schema: Vec<(&str, ColumnClass)> = self.columns.iter().map(String::as_str).zip(classes).collect();
        let mut t = Table::with_schema(name, &schema).expect("return items are distinct");
        for row in &self.rows {
            let row = row
                .iter()
                .zip(&t.columns)
                .map(|(v, c)| if c.class.admits(v) { v.clone() } else { Value::str(v.key_string()) })
                .collect();
            t.push(row).expect("coerced to schema");
        }
        t
    }
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Dash,
    Lt,
    Gt,
    Eq,
    Ne,
    Star,
    Ident(String),
    Str(String),
    Int(i128),
    Real(f64),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Colon => "':'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::Dash => "'-'".into(),
            Tok::Lt => "'<'".into(),
            Tok::Gt => "'>'".into(),
            Tok::Eq => "'='".into(),
            Tok::Ne => "'<>'".into(),
            Tok::Star => "'*'".into(),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Real(r) => format!("number {r}"),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, expected: &[&str], found: &Tok) -> QueryError {
    QueryError::SyntaxError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.describe(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, QueryError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '-' => Some(Tok::Dash),
            '>' => Some(Tok::Gt),
            '=' => Some(Tok::Eq),
            '*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            i += 1;
            continue;
        }
        if c == '<' {
            if chars.get(i + 1).map(|x| x.1) == Some('>') {
                out.push((Tok::Ne, pos));
                i += 2;
            } else {
                out.push((Tok::Lt, pos));
                i += 1;
            }
            continue;
        }
        if c == '\'' || c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None => {
                        return Err(QueryError::SyntaxError {
                            offset: pos,
                            expected: vec!["closing quote".into()],
                            found: "end of input".into(),
                        })
                    }
                    Some(&(_, '\\')) => {
                        let Some(&(_, e)) = chars.get(j + 1) else {
                            j += 1;
                            continue;
                        };
                        s.push(e);
                        j += 2;
                    }
                    Some(&(_, q)) if q == c => break,
                    Some(&(_, x)) => {
                        s.push(x);
                        j += 1;
                    }
                }
            }
            out.push((Tok::Str(s), pos));
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            let mut real = false;
            if j + 1 < chars.len() && chars[j].1 == '.' && chars[j + 1].1.is_ascii_digit() {
                real = true;
                j += 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j].1 == 'e' || chars[j].1 == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k].1 == '-' || chars[k].1 == '+') {
                    k += 1;
                }
                if k < chars.len() && chars[k].1.is_ascii_digit() {
                    real = true;
                    j = k;
                    while j < chars.len() && chars[j].1.is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let end = chars.get(j).map_or(src.len(), |x| x.0);
            let text = &src[pos..end];
            let tok = if real {
                Tok::Real(text.parse().expect("lexed float"))
            } else {
                Tok::Int(text.parse().map_err(|_| QueryError::SyntaxError {
                    offset: pos,
                    expected: vec!["64-bit integer".into()],
                    found: text.to_string(),
                })?)
            };
            out.push((tok, pos));
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let end = chars.get(j).map_or(src.len(), |x| x.0);
            out.push((Tok::Ident(src[pos..end].to_string()), pos));
            i = j;
            continue;
        }
        return Err(QueryError::SyntaxError { offset: pos, expected: vec!["token".into()], found: format!("'{c}'") });
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

// --------------------------------------------------------------- parsing

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    /// Offsets of variable uses to check once the match is known.
    uses: Vec<(String, usize)>,
}

fn is_kw(t: &Tok, kw: &str) -> bool {
    matches!(t, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, desc: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), &[desc], self.peek()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if is_kw(self.peek(), kw) {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), &[kw], self.peek()))
        }
    }

    fn unsupported_clause(&self) -> Option<QueryError> {
        let t = self.peek();
        if is_kw(t, "MATCH") {
            return Some(QueryError::UnsupportedFeature("multiple MATCH clauses".into()));
        }
        CLAUSES.iter().find(|c| is_kw(t, c)).map(|c| QueryError::UnsupportedFeature(format!("{c} clause")))
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                self.bump();
                Ok(s)
            }
            other => Err(syntax(self.offset(), &[what], &other)),
        }
    }

    fn literal(&mut self) -> Result<Value, QueryError> {
        let negative = *self.peek() == Tok::Dash;
        if negative {
            self.bump();
        }
        let off = self.offset();
        let v = match self.bump() {
            Tok::Int(i) => {
                let i = if negative { -i } else { i };
                Value::Int(i64::try_from(i).map_err(|_| QueryError::SyntaxError {
                    offset: off,
                    expected: vec!["64-bit integer".into()],
                    found: i.to_string(),
                })?)
            }
            Tok::Real(r) => Value::Real(if negative { -r } else { r }),
            Tok::Str(s) if !negative => Value::Str(s),
            Tok::Ident(s) if !negative && s.eq_ignore_ascii_case("true") => Value::Bool(true),
            Tok::Ident(s) if !negative && s.eq_ignore_ascii_case("false") => Value::Bool(false),
            other => return Err(syntax(off, &["literal value"], &other)),
        };
        Ok(v)
    }

    fn label(&mut self) -> Result<Option<String>, QueryError> {
        if *self.peek() == Tok::Colon {
            self.bump();
            Ok(Some(self.ident("label")?))
        } else {
            Ok(None)
        }
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen, "'('")?;
        if *self.peek() == Tok::RParen || *self.peek() == Tok::Colon {
            return Err(syntax(self.offset(), &["variable"], self.peek()));
        }
        let var = self.ident("variable")?;
        let label = self.label()?;
        let mut props = Vec::new();
        if *self.peek() == Tok::LBrace {
            self.bump();
            loop {
                let key = self.ident("property name")?;
                self.expect(Tok::Colon, "':'")?;
                props.push((key, self.literal()?));
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RBrace => {
                        self.bump();
                        break;
                    }
                    other => return Err(syntax(self.offset(), &["','", "'}'"], &other.clone())),
                }
            }
        }
        if *self.peek() != Tok::RParen {
            let expected: &[&str] = match (&label, props.is_empty()) {
                (None, true) => &["':'", "'{'", "')'"],
                (Some(_), true) => &["'{'", "')'"],
                _ => &["')'"],
            };
            return Err(syntax(self.offset(), expected, self.peek()));
        }
        self.bump();
        Ok(NodePattern { var, label, props })
    }

    /// Parses the bracketed part of an edge after `-[` has been consumed.
    fn edge_body(&mut self) -> Result<Option<String>, QueryError> {
        match self.peek() {
            Tok::Ident(_) => {
                return Err(QueryError::UnsupportedFeature("edge variables".into()));
            }
            Tok::Star => return Err(QueryError::UnsupportedFeature("variable-length paths".into())),
            _ => {}
        }
        let label = self.label()?;
        if *self.peek() == Tok::Star {
            return Err(QueryError::UnsupportedFeature("variable-length paths".into()));
        }
        if *self.peek() == Tok::LBrace {
            return Err(QueryError::UnsupportedFeature("edge property maps".into()));
        }
        self.expect(Tok::RBracket, "']'")?;
        Ok(label)
    }

    fn edge(&mut self) -> Result<Option<EdgePattern>, QueryError> {
        match self.peek() {
            Tok::Lt => {
                self.bump();
                self.expect(Tok::Dash, "'-'")?;
                self.expect(Tok::LBracket, "'['")?;
                let label = self.edge_body()?;
                self.expect(Tok::Dash, "'-'")?;
                Ok(Some(EdgePattern { direction: EdgeDirection::In, label }))
            }
            Tok::Dash => {
                self.bump();
                if *self.peek() == Tok::Dash || *self.peek() == Tok::Gt {
                    return Err(QueryError::UnsupportedFeature("edges without brackets".into()));
                }
                self.expect(Tok::LBracket, "'['")?;
                let label = self.edge_body()?;
                self.expect(Tok::Dash, "'-'")?;
                let direction = if *self.peek() == Tok::Gt {
                    self.bump();
                    EdgeDirection::Out
                } else {
                    EdgeDirection::Any
                };
                Ok(Some(EdgePattern { direction, label }))
            }
            _ => Ok(None),
        }
    }

    fn var_use(&mut self) -> Result<String, QueryError> {
        let off = self.offset();
        let v = self.ident("variable")?;
        self.uses.push((v.clone(), off));
        Ok(v)
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        match self.peek() {
            Tok::Ident(s) if !s.eq_ignore_ascii_case("true") && !s.eq_ignore_ascii_case("false") => {
                if *self.peek_at(1) == Tok::LParen {
                    return Err(QueryError::UnsupportedFeature(format!("function call {s}")));
                }
                let v = self.var_use()?;
                if *self.peek() == Tok::Dot {
                    self.bump();
                    let p = self.ident("property name")?;
                    Ok(Operand::Prop(v, p))
                } else {
                    Ok(Operand::Var(v))
                }
            }
            _ => Ok(Operand::Literal(self.literal()?)),
        }
    }

    fn condition(&mut self) -> Result<Condition, QueryError> {
        if is_kw(self.peek(), "NOT") {
            return Err(QueryError::UnsupportedFeature("negation".into()));
        }
        if *self.peek() == Tok::LParen {
            return Err(QueryError::UnsupportedFeature("parenthesized conditions".into()));
        }
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Eq => CompareOp::Eq,
            Tok::Ne => CompareOp::Ne,
            Tok::Lt => CompareOp::Lt,
            Tok::Gt => CompareOp::Gt,
            other => return Err(syntax(self.offset(), &["'='", "'<>'", "'<'", "'>'"], &other.clone())),
        };
        self.bump();
        if matches!(op, CompareOp::Lt | CompareOp::Gt) && *self.peek() == Tok::Eq {
            return Err(QueryError::UnsupportedFeature("<= and >= comparisons".into()));
        }
        let right = self.operand()?;
        Ok(Condition { left, op, right })
    }

    fn return_item(&mut self) -> Result<ReturnItem, QueryError> {
        if let Tok::Ident(s) = self.peek() {
            if *self.peek_at(1) == Tok::LParen {
                let lower = s.to_ascii_lowercase();
                return Err(QueryError::UnsupportedFeature(if AGGREGATES.contains(&lower.as_str()) {
                    "aggregation".into()
                } else {
                    format!("function call {s}")
                }));
            }
        }
        if *self.peek() == Tok::Star {
            return Err(QueryError::UnsupportedFeature("RETURN *".into()));
        }
        let v = self.var_use()?;
        let item = if *self.peek() == Tok::Dot {
            self.bump();
            ReturnItem::Prop(v, self.ident("property name")?)
        } else {
            ReturnItem::Var(v)
        };
        if is_kw(self.peek(), "AS") {
            return Err(QueryError::UnsupportedFeature("aliases".into()));
        }
        Ok(item)
    }

    fn query(&mut self) -> Result<PatternQuery, QueryError> {
        if !is_kw(self.peek(), "MATCH") {
            if let Some(e) = self.unsupported_clause() {
                return Err(e);
            }
        }
        self.expect_kw("MATCH")?;
        let mut nodes = vec![self.node()?];
        let mut edges = Vec::new();
        while let Some(e) = self.edge()? {
            edges.push(e);
            nodes.push(self.node()?);
            if edges.len() > MAX_HOPS {
                return Err(QueryError::UnsupportedFeature(format!("paths longer than {MAX_HOPS} hops")));
            }
        }
        if *self.peek() == Tok::Comma {
            return Err(QueryError::UnsupportedFeature("multiple path patterns".into()));
        }
        if let Some(e) = self.unsupported_clause() {
            return Err(e);
        }
        let mut conditions = Vec::new();
        if is_kw(self.peek(), "WHERE") {
            self.bump();
            conditions.push(self.condition()?);
            loop {
                if is_kw(self.peek(), "AND") {
                    self.bump();
                    conditions.push(self.condition()?);
                } else if is_kw(self.peek(), "OR") || is_kw(self.peek(), "XOR") {
                    return Err(QueryError::UnsupportedFeature("disjunction".into()));
                } else {
                    break;
                }
            }
        }
        if let Some(e) = self.unsupported_clause() {
            return Err(e);
        }
        let expected: &[&str] = if is_kw(&self.toks[self.pos.saturating_sub(1)].0, "MATCH") {
            &["RETURN"]
        } else if conditions.is_empty() {
            &["edge", "WHERE", "RETURN"]
        } else {
            &["AND", "RETURN"]
        };
        if !is_kw(self.peek(), "RETURN") {
            return Err(syntax(self.offset(), expected, self.peek()));
        }
        self.bump();
        if is_kw(self.peek(), "DISTINCT") {
            return Err(QueryError::UnsupportedFeature("DISTINCT (results are already sets)".into()));
        }
        let mut returns = vec![self.return_item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            returns.push(self.return_item()?);
        }
        if let Some(e) = self.unsupported_clause() {
            return Err(e);
        }
        if *self.peek() != Tok::Eof {
            return Err(syntax(self.offset(), &["','", "end of input"], self.peek()));
        }
        let bound: BTreeSet<&str> = nodes.iter().map(|n| n.var.as_str()).collect();
        if let Some((v, off)) = self.uses.iter().find(|(v, _)| !bound.contains(v.as_str())) {
            return Err(QueryError::SyntaxError {
                offset: *off,
                expected: vec!["variable bound in MATCH".into()],
                found: format!("'{v}'"),
            });
        }
        let mut seen = BTreeSet::new();
        for r in &returns {
            if !seen.insert(r.column_name()) {
                return Err(QueryError::InvalidArgument(format!("duplicate return item {}", r.column_name())));
            }
        }
        Ok(PatternQuery { nodes, edges, conditions, returns })
    }
}

pub fn parse_pattern(text: &str) -> Result<PatternQuery, QueryError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0, uses: Vec::new() }.query()
}

// ------------------------------------------------------------- unparsing

fn write_literal(out: &mut String, v: &Value) {
    match v {
        Value::Str(s) => {
            out.push('\'');
            for c in s.chars() {
                if c == '\'' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('\'');
        }
        Value::Real(r) => {
            let _ = write!(out, "{r:?}");
        }
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Null => out.push_str("null"),
    }
}

fn write_operand(out: &mut String, o: &Operand) {
    match o {
        Operand::Var(v) => out.push_str(v),
        Operand::Prop(v, p) => {
            let _ = write!(out, "{v}.{p}");
        }
        Operand::Literal(v) => write_literal(out, v),
    }
}

impl fmt::Display for PatternQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("MATCH ");
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                let e = &self.edges[i - 1];
                let label = e.label.as_ref().map(|l| format!(":{l}")).unwrap_or_default();
                match e.direction {
                    EdgeDirection::Out => {
                        let _ = write!(s, "-[{label}]->");
                    }
                    EdgeDirection::In => {
                        let _ = write!(s, "<-[{label}]-");
                    }
                    EdgeDirection::Any => {
                        let _ = write!(s, "-[{label}]-");
                    }
                }
            }
            s.push('(');
            s.push_str(&n.var);
            if let Some(l) = &n.label {
                let _ = write!(s, ":{l}");
            }
            if !n.props.is_empty() {
                s.push_str(" {");
                for (j, (k, v)) in n.props.iter().enumerate() {
                    if j > 0 {
                        s.push_str(", ");
                    }
                    let _ = write!(s, "{k}: ");
                    write_literal(&mut s, v);
                }
                s.push('}');
            }
            s.push(')');
        }
        for (i, c) in self.conditions.iter().enumerate() {
            s.push_str(if i == 0 { " WHERE " } else { " AND " });
            write_operand(&mut s, &c.left);
            s.push_str(match c.op {
                CompareOp::Eq => " = ",
                CompareOp::Ne => " <> ",
                CompareOp::Lt => " < ",
                CompareOp::Gt => " > ",
            });
            write_operand(&mut s, &c.right);
        }
        s.push_str(" RETURN ");
        let items: Vec<String> = self.returns.iter().map(ReturnItem::column_name).collect();
        s.push_str(&items.join(", "));
        f.write_str(&s)
    }
}

pub fn unparse(q: &PatternQuery) -> String {
    q.to_string()
}

// ------------------------------------------------------------ evaluation

/// Comparison with mixed-type and null semantics: anything involving null
/// is false; values of different kinds are unequal and unordered.
pub fn compare(a: &Value, op: CompareOp, b: &Value) -> bool {
    use std::cmp::Ordering;
    if a.is_null() || b.is_null() {
        return false;
    }
    let ord: Option<Ordering> = match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(_) | Value::Real(_), Value::Int(_) | Value::Real(_)) => {
            a.as_f64().unwrap().partial_cmp(&b.as_f64().unwrap())
        }
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    };
    match (op, ord) {
        (CompareOp::Eq, o) => o == Some(Ordering::Equal),
        (CompareOp::Ne, o) => o != Some(Ordering::Equal),
        (CompareOp::Lt, o) => o == Some(Ordering::Less),
        (CompareOp::Gt, o) => o == Some(Ordering::Greater),
    }
}

fn node_value(g: &PropertyGraph, ord: usize, prop: Option<&str>) -> Value {
    let n = &g.nodes()[ord];
    match prop {
        None => Value::str(n.id.clone()),
        Some(p) => n.props.get(p).cloned().unwrap_or(Value::Null),
    }
}

fn node_matches(g: &PropertyGraph, ord: usize, p: &NodePattern) -> bool {
    let n = &g.nodes()[ord];
    p.label.as_ref().is_none_or(|l| &n.label == l)
        && p.props.iter().all(|(k, v)| n.props.get(k).is_some_and(|x| compare(x, CompareOp::Eq, v)))
}

struct Eval<'a> {
    g: &'a PropertyGraph,
    q: &'a PatternQuery,
    slots: BTreeMap<&'a str, usize>,
    rows: BTreeSet<Vec<Value>>,
}

impl<'a> Eval<'a> {
    fn operand(&self, o: &Operand, assign: &[usize]) -> Value {
        match o {
            Operand::Var(v) => node_value(self.g, assign[self.slots[v.as_str()]], None),
            Operand::Prop(v, p) => node_value(self.g, assign[self.slots[v.as_str()]], Some(p)),
            Operand::Literal(x) => x.clone(),
        }
    }

    fn emit(&mut self, assign: &[usize]) {
        let ok = self
            .q
            .conditions
            .iter()
            .all(|c| compare(&self.operand(&c.left, assign), c.op, &self.operand(&c.right, assign)));
        if !ok {
            return;
        }
        let row = self
            .q
            .returns
            .iter()
            .map(|r| match r {
                ReturnItem::Var(v) => node_value(self.g, assign[self.slots[v.as_str()]], None),
                ReturnItem::Prop(v, p) => node_value(self.g, assign[self.slots[v.as_str()]], Some(p)),
            })
            .collect();
        self.rows.insert(row);
    }

    /// `path[i]` is the node ordinal at position `i`; `assign` maps variable
    /// slots to nodes (usize::MAX when unbound).
    fn extend(&mut self, path: &mut Vec<usize>, used: &mut Vec<usize>, assign: &mut Vec<usize>) {
        let i = path.len();
        if i == self.q.nodes.len() {
            let a = assign.clone();
            self.emit(&a);
            return;
        }
        let pat = &self.q.nodes[i];
        let slot = self.slots[pat.var.as_str()];
        let candidates: Vec<(Option<usize>, usize)> = if i == 0 {
            (0..self.g.node_count()).map(|v| (None, v)).collect()
        } else {
            let e = &self.q.edges[i - 1];
            let dir = match e.direction {
                EdgeDirection::Out => Direction::Out,
                EdgeDirection::In => Direction::In,
                EdgeDirection::Any => Direction::Any,
            };
            self.g
                .incident(path[i - 1], dir)
                .into_iter()
                .filter(|(eo, _)| {
                    e.label.as_ref().is_none_or(|l| &self.g.edges()[*eo].label == l) && !used.contains(eo)
                })
                .map(|(eo, w)| (Some(eo), w))
                .collect()
        };
        for (edge, v) in candidates {
            if assign[slot] != usize::MAX && assign[slot] != v {
                continue;
            }
            if !node_matches(self.g, v, pat) {
                continue;
            }
            let fresh = assign[slot] == usize::MAX;
            assign[slot] = v;
            path.push(v);
            if let Some(eo) = edge {
                used.push(eo);
            }
            self.extend(path, used, assign);
            if edge.is_some() {
                used.pop();
            }
            path.pop();
            if fresh {
                assign[slot] = usize::MAX;
            }
        }
    }
}

pub fn eval_pattern(q: &PatternQuery, g: &PropertyGraph) -> BindingsTable {
    let mut slots = BTreeMap::new();
    for n in &q.nodes {
        let next = slots.len();
        slots.entry(n.var.as_str()).or_insert(next);
    }
    let nvars = slots.len();
    let mut ev = Eval { g, q, slots, rows: BTreeSet::new() };
    ev.extend(&mut Vec::new(), &mut Vec::new(), &mut vec![usize::MAX; nvars]);
    BindingsTable {
        columns: q.returns.iter().map(ReturnItem::column_name).collect(),
        rows: ev.rows.into_iter().collect(),
    }
}

/// Every node bound in some satisfying assignment, with the edges among
/// them.
pub fn matched_subgraph(q: &PatternQuery, g: &PropertyGraph) -> PropertyGraph {
    let vars: Vec<ReturnItem> = {
        let mut seen = BTreeSet::new();
        q.nodes.iter().filter(|n| seen.insert(n.var.clone())).map(|n| ReturnItem::Var(n.var.clone())).collect()
    };
    let all = PatternQuery { returns: vars, ..q.clone() };
    let b = eval_pattern(&all, g);
    let ids: BTreeSet<String> = b.rows.iter().flatten().map(Value::key_string).collect();
    g.induced_by_ids(ids.iter().map(String::as_str))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Properties;
    use proptest::prelude::*;

    fn err(q: &str) -> QueryError {
        parse_pattern(q).unwrap_err()
    }

    #[test]
    fn parses_mention_query() {
        let q = parse_pattern("MATCH (a:Author)-[:MENTIONS]->(b:Author) RETURN a, b").unwrap();
        assert_eq!(q.nodes.len(), 2);
        assert_eq!(q.edges, vec![EdgePattern { direction: EdgeDirection::Out, label: Some("MENTIONS".into()) }]);
        assert_eq!(q.returns.len(), 2);
    }

    #[test]
    fn rejects_aggregation() {
        assert_eq!(err("MATCH (a) RETURN count(a)"), QueryError::UnsupportedFeature("aggregation".into()));
    }

    #[test]
    fn where_inside_node_is_syntax_error() {
        match err("MATCH (a)-[]->(b WHERE") {
            QueryError::SyntaxError { offset, .. } => assert_eq!(offset, 17),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn other_unsupported_constructs() {
        for (q, what) in [
            ("OPTIONAL MATCH (a) RETURN a", "OPTIONAL"),
            ("MATCH (a)-[*]->(b) RETURN a", "variable-length"),
            ("MATCH (a)-[:X*2]->(b) RETURN a", "variable-length"),
            ("MATCH (a)-[]->(b)-[]->(c)-[]->(d)-[]->(e) RETURN a", "hops"),
            ("MATCH (a) MATCH (b) RETURN a", "MATCH"),
            ("MATCH (a) RETURN a ORDER BY a", "ORDER"),
            ("MATCH (a) RETURN a LIMIT 3", "LIMIT"),
            ("MATCH (a) WHERE a.x = 1 OR a.x = 2 RETURN a", "disjunction"),
            ("MATCH (a)-[r]->(b) RETURN a", "edge variables"),
        ] {
            match err(q) {
                QueryError::UnsupportedFeature(f) => assert!(f.contains(what), "{q}: {f}"),
                e => panic!("{q}: {e:?}"),
            }
        }
    }

    #[test]
    fn unbound_variable() {
        match err("MATCH (a) RETURN b") {
            QueryError::SyntaxError { offset, .. } => assert_eq!(offset, 17),
            e => panic!("{e:?}"),
        }
        assert!(matches!(err("MATCH (a) WHERE c.x = 1 RETURN a"), QueryError::SyntaxError { .. }));
    }

    #[test]
    fn keywords_case_insensitive_and_literals() {
        let q = parse_pattern(
            "match (a {n: -3, r: 2.5, s: 'it\\'s', b: true})<-[]-(b) where a.n < 0 and b.x <> 'y' return a.n",
        )
        .unwrap();
        assert_eq!(q.nodes[0].props[0].1, Value::Int(-3));
        assert_eq!(q.nodes[0].props[2].1, Value::str("it's"));
        assert_eq!(q.edges[0].direction, EdgeDirection::In);
        assert_eq!(parse_pattern(&unparse(&q)).unwrap(), q);
    }

    fn g_of(directed: bool, n: usize, edges: &[(usize, usize)]) -> PropertyGraph {
        let mut g = PropertyGraph::new(directed);
        for i in 0..n {
            g.add_node(format!("v{i}"), "N", Properties::new()).unwrap();
        }
        for (k, (s, t)) in edges.iter().enumerate() {
            g.add_edge(format!("e{k}"), &format!("v{s}"), &format!("v{t}"), "E", Properties::new()).unwrap();
        }
        g
    }

    #[test]
    fn single_edge_and_self_loop() {
        let g = g_of(true, 2, &[(0, 1)]);
        let r = eval_pattern(&parse_pattern("MATCH (a)-[]->(b) RETURN a, b").unwrap(), &g);
        assert_eq!(r.rows, vec![vec![Value::str("v0"), Value::str("v1")]]);
        let r = eval_pattern(&parse_pattern("MATCH (a)-[]->(a) RETURN a").unwrap(), &g);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn edge_used_once_per_match() {
        let g = g_of(false, 2, &[(0, 1)]);
        let q = parse_pattern("MATCH (a)-[]-(b)-[]-(c) RETURN a, c").unwrap();
        assert!(eval_pattern(&q, &g).rows.is_empty());
        let g = g_of(false, 2, &[(0, 1), (0, 1)]);
        assert_eq!(eval_pattern(&q, &g).rows.len(), 2);
    }

    #[test]
    fn mixed_type_comparisons() {
        assert!(compare(&Value::Int(2), CompareOp::Eq, &Value::Real(2.0)));
        assert!(!compare(&Value::Int(2), CompareOp::Lt, &Value::str("3")));
        assert!(compare(&Value::Int(2), CompareOp::Ne, &Value::str("2")));
        assert!(!compare(&Value::Null, CompareOp::Ne, &Value::Int(1)));
    }

    fn ident() -> impl Strategy<Value = String> {
        prop_oneof![Just("a"), Just("b"), Just("c"), Just("x1"), Just("node_2")].prop_map(String::from)
    }

    fn literal() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            (-1e6f64..1e6).prop_map(Value::Real),
            "[a-z '\\\\]{0,6}".prop_map(Value::Str),
            any::<bool>().prop_map(Value::Bool),
        ]
    }

    fn query() -> impl Strategy<Value = PatternQuery> {
        let node = (ident(), proptest::option::of(ident()), proptest::collection::vec((ident(), literal()), 0..2))
            .prop_map(|(var, label, props)| NodePattern { var, label, props });
        let edge = (
            prop_oneof![Just(EdgeDirection::Out), Just(EdgeDirection::In), Just(EdgeDirection::Any)],
            proptest::option::of(ident()),
        )
            .prop_map(|(direction, label)| EdgePattern { direction, label });
        (proptest::collection::vec(node, 1..=4), proptest::collection::vec(edge, 3))
            .prop_flat_map(|(nodes, edges)| {
                let vars: Vec<String> = nodes.iter().map(|n| n.var.clone()).collect();
                let edges = edges[..nodes.len() - 1].to_vec();
                let pick = proptest::sample::select(vars);
                let operand = prop_oneof![
                    pick.clone().prop_map(Operand::Var),
                    (pick.clone(), ident()).prop_map(|(v, p)| Operand::Prop(v, p)),
                    literal().prop_map(Operand::Literal),
                ];
                let cond = (
                    operand.clone(),
                    prop_oneof![Just(CompareOp::Eq), Just(CompareOp::Ne), Just(CompareOp::Lt), Just(CompareOp::Gt)],
                    operand,
                )
                    .prop_map(|(left, op, right)| Condition { left, op, right });
                let ret = prop_oneof![
                    pick.clone().prop_map(ReturnItem::Var),
                    (pick, ident()).prop_map(|(v, p)| ReturnItem::Prop(v, p)),
                ];
                (Just(nodes), Just(edges), proptest::collection::vec(cond, 0..3), proptest::collection::vec(ret, 1..3))
            })
            .prop_map(|(nodes, edges, conditions, rets)| PatternQuery {
                nodes,
                edges,
                conditions,
                returns: rets
                    .into_iter()
                    .map(|r| (r.column_name(), r))
                    .collect::<BTreeMap<_, _>>()
                    .into_values()
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn unparse_round_trips(q in query()) {
            let text = unparse(&q);
            let parsed = parse_pattern(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(&parsed, &q);
            prop_assert_eq!(parse_pattern(&unparse(&parsed)).unwrap(), parsed);
        }

        #[test]
        fn relabeling_equivariance(
            edges in proptest::collection::vec((0usize..6, 0usize..6), 0..14),
            shift in 1usize..6,
        ) {
            let g = g_of(true, 6, &edges);
            let relabeled: Vec<(usize, usize)> = edges.iter().map(|(s, t)| ((s + shift) % 6, (t + shift) % 6)).collect();
            let h = g_of(true, 6, &relabeled);
            let q = parse_pattern("MATCH (a)-[]->(b)<-[]-(c) RETURN a, b, c").unwrap();
            let map = |v: &Value| Value::str(format!("v{}", (v.key_string()[1..].parse::<usize>().unwrap() + shift) % 6));
            let expect: BTreeSet<Vec<Value>> = eval_pattern(&q, &g).rows.iter().map(|r| r.iter().map(map).collect()).collect();
            let got: BTreeSet<Vec<Value>> = eval_pattern(&q, &h).rows.into_iter().collect();
            prop_assert_eq!(got, expect);
        }
    }
}
