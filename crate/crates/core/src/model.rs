//! Model formulas: a small subset of the usual ERGM formula syntax.
//!
//! ```text
//! [lhs ~] term (+ term)*
//! term  := name | name "(" args ")" | "offset" "(" term ")"
//! args  := arg ("," arg)*        arg := value | key "=" value
//! value := number | "string" | TRUE | FALSE | a:b | c(value, ...)
//! ```
//!
//! Supported terms: `edges`, `mutual`, `nodematch`, `nodefactor`, `absdiff`,
//! `gwesp` (fixed decay only), `idegree`, `odegree`, `degree`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Attribute, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Edges,
    Mutual,
    Nodematch,
    Nodefactor,
    Absdiff,
    Gwesp,
    Idegree,
    Odegree,
    Degree,
}

impl TermKind {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "edges" => TermKind::Edges,
            "mutual" => TermKind::Mutual,
            "nodematch" => TermKind::Nodematch,
            "nodefactor" => TermKind::Nodefactor,
            "absdiff" => TermKind::Absdiff,
            "gwesp" => TermKind::Gwesp,
            "idegree" => TermKind::Idegree,
            "odegree" => TermKind::Odegree,
            "degree" => TermKind::Degree,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TermKind::Edges => "edges",
            TermKind::Mutual => "mutual",
            TermKind::Nodematch => "nodematch",
            TermKind::Nodefactor => "nodefactor",
            TermKind::Absdiff => "absdiff",
            TermKind::Gwesp => "gwesp",
            TermKind::Idegree => "idegree",
            TermKind::Odegree => "odegree",
            TermKind::Degree => "degree",
        }
    }

    /// Change statistics of these terms never depend on the rest of the graph.
    pub fn is_dyad_independent(self) -> bool {
        matches!(
            self,
            TermKind::Edges | TermKind::Nodematch | TermKind::Nodefactor | TermKind::Absdiff
        )
    }
}

/// One formula term as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub kind: TermKind,
    pub attr: Option<String>,
    pub diff: bool,
    pub levels: Option<Vec<String>>,
    pub decay: f64,
    pub fixed: bool,
    pub degrees: Vec<u32>,
    pub offset: bool,
}

impl Term {
    pub fn new(kind: TermKind) -> Self {
        Term {
            kind,
            attr: None,
            diff: false,
            levels: None,
            decay: 0.0,
            fixed: false,
            degrees: Vec::new(),
            offset: false,
        }
    }

    /// Coordinate count when it does not depend on data.
    fn known_dimension(&self) -> Option<usize> {
        match self.kind {
            TermKind::Edges | TermKind::Mutual | TermKind::Absdiff | TermKind::Gwesp => Some(1),
            TermKind::Idegree | TermKind::Odegree | TermKind::Degree => Some(self.degrees.len()),
            TermKind::Nodematch if !self.diff => Some(1),
            TermKind::Nodematch | TermKind::Nodefactor => self.levels.as_ref().map(Vec::len),
        }
    }
}

fn quote_levels(levels: &[String]) -> String {
    let inner: Vec<String> = levels.iter().map(|l| format!("{l:?}")).collect();
    format!("c({})", inner.join(", "))
}

fn format_degrees(d: &[u32]) -> String {
    let contiguous = d.len() > 1 && d.windows(2).all(|w| w[1] == w[0] + 1);
    if d.len() == 1 {
        d[0].to_string()
    } else if contiguous {
        format!("{}:{}", d[0], d[d.len() - 1])
    } else {
        let inner: Vec<String> = d.iter().map(u32::to_string).collect();
        format!("c({})", inner.join(", "))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = match self.kind {
            TermKind::Edges | TermKind::Mutual => self.kind.name().to_string(),
            TermKind::Absdiff => format!("absdiff({:?})", self.attr.as_deref().unwrap_or("")),
            TermKind::Nodefactor => {
                let mut s = format!("nodefactor({:?}", self.attr.as_deref().unwrap_or(""));
                if let Some(l) = &self.levels {
                    s += &format!(", levels = {}", quote_levels(l));
                }
                s + ")"
            }
            TermKind::Nodematch => {
                let mut s = format!("nodematch({:?}", self.attr.as_deref().unwrap_or(""));
                if self.diff {
                    s += ", diff = TRUE";
                }
                if let Some(l) = &self.levels {
                    s += &format!(", levels = {}", quote_levels(l));
                }
                s + ")"
            }
            TermKind::Gwesp => format!("gwesp({}, fixed = TRUE)", self.decay),
            TermKind::Idegree | TermKind::Odegree | TermKind::Degree => {
                format!("{}({})", self.kind.name(), format_degrees(&self.degrees))
            }
        };
        if self.offset {
            write!(f, "offset({body})")
        } else {
            f.write_str(&body)
        }
    }
}

/// Parsed formula, not yet checked against a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub terms: Vec<Term>,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(Term::to_string).collect();
        f.write_str(&parts.join(" + "))
    }
}

// ---------------------------------------------------------------------------
// Tokenizer and parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Plus,
    Eq,
    Colon,
    Tilde,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        match c {
            c if c.is_whitespace() => k += 1,
            '(' | ')' | ',' | '+' | '=' | ':' | '~' => {
                out.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '+' => Tok::Plus,
                        '=' => Tok::Eq,
                        ':' => Tok::Colon,
                        _ => Tok::Tilde,
                    },
                    pos,
                ));
                k += 1;
            }
            '"' | '\'' => {
                let mut s = String::new();
                k += 1;
                loop {
                    match chars.get(k) {
                        None => return Err(Error::Syntax { pos, msg: "unterminated string".into() }),
                        Some(&(_, q)) if q == c => break,
                        Some(&(_, ch)) => s.push(ch),
                    }
                    k += 1;
                }
                k += 1;
                out.push((Tok::Str(s), pos));
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = k;
                k += 1;
                while k < chars.len() {
                    let ch = chars[k].1;
                    let exp_sign = (ch == '-' || ch == '+')
                        && matches!(chars[k - 1].1, 'e' | 'E');
                    if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || exp_sign {
                        k += 1;
                    } else {
                        break;
                    }
                }
                let end = chars.get(k).map_or(src.len(), |c| c.0);
                let text = &src[pos..end];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Syntax { pos, msg: format!("bad number `{text}`") })?;
                let _ = start;
                out.push((Tok::Num(v), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while k < chars.len() {
                    let ch = chars[k].1;
                    if ch.is_alphanumeric() || ch == '_' || ch == '.' {
                        s.push(ch);
                        k += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), pos));
            }
            other => {
                return Err(Error::Syntax { pos, msg: format!("unexpected character `{other}`") })
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    Bool(bool),
    Range(i64, i64),
    Vector(Vec<Value>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn formula(&mut self) -> Result<Vec<Term>> {
        if self.toks.iter().any(|t| t.0 == Tok::Tilde) {
            while self.peek() != Some(&Tok::Tilde) {
                self.at += 1;
            }
            self.at += 1;
        }
        let mut terms = vec![self.term(false)?];
        while self.peek() == Some(&Tok::Plus) {
            self.at += 1;
            terms.push(self.term(false)?);
        }
        if self.at < self.toks.len() {
            return self.err("expected `+` or end of formula");
        }
        Ok(terms)
    }

    fn term(&mut self, in_offset: bool) -> Result<Term> {
        let pos = self.pos();
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.err("expected a term name"),
        };
        self.at += 1;
        if name == "offset" {
            if in_offset {
                return Err(Error::Syntax { pos, msg: "nested offset()".into() });
            }
            self.expect(Tok::LParen, "`(` after offset")?;
            let mut t = self.term(true)?;
            self.expect(Tok::RParen, "`)` closing offset")?;
            t.offset = true;
            return Ok(t);
        }
        let kind = TermKind::from_name(&name).ok_or(Error::UnknownTerm { name: name.clone(), pos })?;
        let mut positional = Vec::new();
        let mut named = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    let is_key = matches!(self.peek(), Some(Tok::Ident(s)) if !matches!(s.as_str(), "TRUE" | "FALSE" | "T" | "F" | "c"))
                        && self.toks.get(self.at + 1).map(|t| &t.0) == Some(&Tok::Eq);
                    if is_key {
                        let Some(Tok::Ident(key)) = self.peek().cloned() else { unreachable!() };
                        self.at += 2;
                        named.push((key, self.value()?));
                    } else {
                        if !named.is_empty() {
                            return self.err("positional argument after named argument");
                        }
                        positional.push(self.value()?);
                    }
                    match self.peek() {
                        Some(Tok::Comma) => self.at += 1,
                        Some(Tok::RParen) => break,
                        _ => return self.err("expected `,` or `)`"),
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        build_term(kind, positional, named)
    }

    fn value(&mut self) -> Result<Value> {
        let v = match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.at += 1;
                if self.peek() == Some(&Tok::Colon) {
                    self.at += 1;
                    let Some(Tok::Num(y)) = self.peek().cloned() else {
                        return self.err("expected range end");
                    };
                    self.at += 1;
                    if x.fract() != 0.0 || y.fract() != 0.0 {
                        return self.err("range bounds must be integers");
                    }
                    Value::Range(x as i64, y as i64)
                } else {
                    Value::Num(x)
                }
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Value::Str(s)
            }
            Some(Tok::Ident(s)) if matches!(s.as_str(), "TRUE" | "T") => {
                self.at += 1;
                Value::Bool(true)
            }
            Some(Tok::Ident(s)) if matches!(s.as_str(), "FALSE" | "F") => {
                self.at += 1;
                Value::Bool(false)
            }
            Some(Tok::Ident(s)) if s == "c" => {
                self.at += 1;
                self.expect(Tok::LParen, "`(` after c")?;
                let mut items = Vec::new();
                if self.peek() != Some(&Tok::RParen) {
                    loop {
                        items.push(self.value()?);
                        match self.peek() {
                            Some(Tok::Comma) => self.at += 1,
                            Some(Tok::RParen) => break,
                            _ => return self.err("expected `,` or `)` in c()"),
                        }
                    }
                }
                self.at += 1;
                Value::Vector(items)
            }
            _ => return self.err("expected a value"),
        };
        Ok(v)
    }
}

fn bad_arg(kind: TermKind, msg: impl Into<String>) -> Error {
    Error::InvalidTermArgument { term: kind.name().into(), msg: msg.into() }
}

fn as_string(kind: TermKind, v: &Value) -> Result<String> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        _ => Err(bad_arg(kind, "expected a quoted attribute name")),
    }
}

fn as_bool(kind: TermKind, v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        _ => Err(bad_arg(kind, "expected TRUE or FALSE")),
    }
}

fn as_levels(kind: TermKind, v: &Value) -> Result<Vec<String>> {
    let one = |v: &Value| match v {
        Value::Str(s) => Ok(s.clone()),
        Value::Num(x) => Ok(crate::graph::format_number(*x)),
        _ => Err(bad_arg(kind, "levels must be strings or numbers")),
    };
    match v {
        Value::Vector(items) => items.iter().map(one).collect(),
        Value::Range(a, b) => Ok((*a..=*b).map(|x| x.to_string()).collect()),
        other => Ok(vec![one(other)?]),
    }
}

fn as_degrees(kind: TermKind, v: &Value) -> Result<Vec<u32>> {
    let one = |x: f64| {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as u32)
        } else {
            Err(bad_arg(kind, "degrees must be nonnegative integers"))
        }
    };
    match v {
        Value::Num(x) => Ok(vec![one(*x)?]),
        Value::Range(a, b) if a <= b => (*a..=*b).map(|x| one(x as f64)).collect(),
        Value::Vector(items) => items
            .iter()
            .map(|it| match it {
                Value::Num(x) => one(*x),
                _ => Err(bad_arg(kind, "degrees must be integers")),
            })
            .collect(),
        _ => Err(bad_arg(kind, "expected a degree, range a:b or c(...)")),
    }
}

fn build_term(kind: TermKind, positional: Vec<Value>, named: Vec<(String, Value)>) -> Result<Term> {
    let mut t = Term::new(kind);
    let keys: &[&str] = match kind {
        TermKind::Edges | TermKind::Mutual => &[],
        TermKind::Nodematch => &["attr", "attrname", "diff", "levels"],
        TermKind::Nodefactor => &["attr", "attrname", "levels"],
        TermKind::Absdiff => &["attr", "attrname"],
        TermKind::Gwesp => &["decay", "fixed"],
        TermKind::Idegree | TermKind::Odegree | TermKind::Degree => &["d"],
    };
    if positional.len() > keys.len().min(2) {
        return Err(bad_arg(kind, "too many arguments"));
    }
    let mut args: Vec<(&str, Value)> = Vec::new();
    // positional arguments follow the order of `keys`, with attr/attrname as one slot
    let slots: Vec<&str> = keys.iter().copied().filter(|k| *k != "attrname").collect();
    for (k, v) in positional.into_iter().enumerate() {
        let key = *slots.get(k).ok_or_else(|| bad_arg(kind, "too many arguments"))?;
        args.push((key, v));
    }
    for (key, v) in &named {
        let Some(&k) = keys.iter().find(|k| **k == key.as_str()) else {
            return Err(Error::UnknownArgument { term: kind.name().into(), key: key.clone() });
        };
        let k = if k == "attrname" { "attr" } else { k };
        if args.iter().any(|(a, _)| *a == k) {
            return Err(bad_arg(kind, format!("argument `{key}` given twice")));
        }
        args.push((k, v.clone()));
    }
    for (key, v) in &args {
        match *key {
            "attr" => t.attr = Some(as_string(kind, v)?),
            "diff" => t.diff = as_bool(kind, v)?,
            "levels" => t.levels = Some(as_levels(kind, v)?),
            "fixed" => t.fixed = as_bool(kind, v)?,
            "decay" => match v {
                Value::Num(x) if *x >= 0.0 && x.is_finite() => t.decay = *x,
                _ => return Err(bad_arg(kind, "decay must be a nonnegative number")),
            },
            "d" => t.degrees = as_degrees(kind, v)?,
            _ => unreachable!(),
        }
    }
    match kind {
        TermKind::Nodematch | TermKind::Nodefactor | TermKind::Absdiff if t.attr.is_none() => {
            return Err(bad_arg(kind, "attribute name required"));
        }
        TermKind::Gwesp => {
            if !args.iter().any(|(k, _)| *k == "decay") {
                return Err(bad_arg(kind, "decay required"));
            }
            if !t.fixed {
                return Err(bad_arg(kind, "only fixed = TRUE is supported"));
            }
        }
        TermKind::Idegree | TermKind::Odegree | TermKind::Degree if t.degrees.is_empty() => {
            return Err(bad_arg(kind, "degree values required"));
        }
        _ => {}
    }
    if let Some(l) = &t.levels {
        if l.is_empty() {
            return Err(Error::EmptyLevels { term: kind.name().into() });
        }
    }
    Ok(t)
}

/// Parses a formula. Fails when the model is certain to have fewer than two
/// coordinates.
pub fn parse_formula(text: &str) -> Result<ModelSpec> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0, end: text.len() };
    let terms = p.formula()?;
    if terms.iter().all(|t| t.known_dimension().is_some()) {
        let d: usize = terms.iter().filter_map(Term::known_dimension).sum();
        if d < 2 {
            return Err(Error::ModelDimension(d));
        }
    }
    Ok(ModelSpec { terms })
}

// ---------------------------------------------------------------------------
// Validated model

/// Statistic kernel of a validated term.
#[derive(Clone, Debug, PartialEq)]
pub enum Stat {
    Edges,
    Mutual,
    /// One coordinate: endpoints share a level (restricted to `keep` levels).
    Match { codes: Vec<u32>, keep: Vec<bool> },
    /// One coordinate per level in `coord` (`None` = not modelled).
    MatchDiff { codes: Vec<u32>, coord: Vec<Option<usize>> },
    Factor { codes: Vec<u32>, coord: Vec<Option<usize>> },
    AbsDiff { values: Vec<f64> },
    Gwesp { decay: f64 },
    InDegree { degrees: Vec<u32> },
    OutDegree { degrees: Vec<u32> },
    Degree { degrees: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledTerm {
    pub term: Term,
    pub stat: Stat,
    /// First coordinate of this term in the statistic vector.
    pub start: usize,
    pub len: usize,
}

/// A formula checked against a network, with coordinates resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub terms: Vec<CompiledTerm>,
    pub names: Vec<String>,
    pub directed: bool,
    pub n: usize,
    /// Offset marker per coordinate.
    pub offset: Vec<bool>,
    /// Fixed coefficient per offset coordinate, in coordinate order.
    pub offset_values: Vec<f64>,
}

impl Model {
    /// Total statistic dimension `d`.
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Number of freely estimated coordinates.
    pub fn free_dim(&self) -> usize {
        self.offset.iter().filter(|o| !**o).count()
    }

    pub fn has_offsets(&self) -> bool {
        self.offset.iter().any(|o| *o)
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| !self.offset[k]).collect()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free_indices().into_iter().map(|k| self.names[k].clone()).collect()
    }

    /// Inserts the fixed offset coefficients into a free parameter vector.
    pub fn full_theta(&self, free: &[f64]) -> Vec<f64> {
        debug_assert_eq!(free.len(), self.free_dim());
        let mut it_free = free.iter();
        let mut it_off = self.offset_values.iter();
        self.offset
            .iter()
            .map(|&o| if o { *it_off.next().unwrap() } else { *it_free.next().unwrap() })
            .collect()
    }

    pub fn free_part(&self, full: &[f64]) -> Vec<f64> {
        full.iter().zip(&self.offset).filter(|(_, o)| !**o).map(|(x, _)| *x).collect()
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.terms.iter().all(|t| t.term.kind.is_dyad_independent())
    }

    /// Per-coordinate flag: coordinate belongs to a dyad-independent term.
    pub fn independent_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim()];
        for t in &self.terms {
            m[t.start..t.start + t.len].fill(t.term.kind.is_dyad_independent());
        }
        m
    }

    pub fn formula(&self) -> String {
        self.spec.to_string()
    }
}

fn level_index(levels: &[String], wanted: &[String], attr: &str) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            levels
                .iter()
                .position(|l| l == w)
                .ok_or_else(|| Error::UnknownLevel { attr: attr.into(), level: w.clone() })
        })
        .collect()
}

/// Checks a parsed formula against a network and resolves coordinates.
pub fn validate(spec: &ModelSpec, g: &Graph, offset_values: &[f64]) -> Result<Model> {
    let directed = g.is_directed();
    let mut terms = Vec::new();
    let mut names = Vec::new();
    let mut offset = Vec::new();
    for term in &spec.terms {
        let kind = term.kind;
        match kind {
            TermKind::Mutual | TermKind::Idegree | TermKind::Odegree if !directed => {
                return Err(Error::Directedness { term: kind.name().into(), directed });
            }
            TermKind::Degree if directed => {
                return Err(Error::Directedness { term: kind.name().into(), directed });
            }
            _ => {}
        }
        let attr_of = || -> Result<(&str, &Attribute)> {
            let name = term.attr.as_deref().unwrap_or_default();
            let a = g.attribute(name).ok_or_else(|| Error::MissingAttribute(name.into()))?;
            Ok((name, a))
        };
        let start = names.len();
        let stat = match kind {
            TermKind::Edges => {
                names.push("edges".into());
                Stat::Edges
            }
            TermKind::Mutual => {
                names.push("mutual".into());
                Stat::Mutual
            }
            TermKind::Absdiff => {
                let (name, a) = attr_of()?;
                let Attribute::Numeric(values) = a else {
                    return Err(Error::InvalidTermArgument {
                        term: "absdiff".into(),
                        msg: format!("attribute `{name}` is not numeric"),
                    });
                };
                names.push(format!("absdiff.{name}"));
                Stat::AbsDiff { values: values.clone() }
            }
            TermKind::Nodematch | TermKind::Nodefactor => {
                let (name, a) = attr_of()?;
                let (levels, codes) = a.levels();
                let chosen: Vec<usize> = match &term.levels {
                    Some(w) => level_index(&levels, w, name)?,
                    None if kind == TermKind::Nodefactor => (1..levels.len()).collect(),
                    None => (0..levels.len()).collect(),
                };
                if chosen.is_empty() {
                    return Err(Error::EmptyLevels { term: kind.name().into() });
                }
                let mut sorted = chosen.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if kind == TermKind::Nodematch && !term.diff {
                    names.push(format!("nodematch.{name}"));
                    let mut keep = vec![term.levels.is_none(); levels.len()];
                    for &c in &sorted {
                        keep[c] = true;
                    }
                    Stat::Match { codes, keep }
                } else {
                    let mut coord = vec![None; levels.len()];
                    for (k, &c) in sorted.iter().enumerate() {
                        coord[c] = Some(k);
                        names.push(format!("{}.{name}.{}", kind.name(), levels[c]));
                    }
                    if kind == TermKind::Nodefactor {
                        Stat::Factor { codes, coord }
                    } else {
                        Stat::MatchDiff { codes, coord }
                    }
                }
            }
            TermKind::Gwesp => {
                names.push(format!("gwesp.fixed.{}", term.decay));
                Stat::Gwesp { decay: term.decay }
            }
            TermKind::Idegree | TermKind::Odegree | TermKind::Degree => {
                for d in &term.degrees {
                    names.push(format!("{}{d}", kind.name()));
                }
                let degrees = term.degrees.clone();
                match kind {
                    TermKind::Idegree => Stat::InDegree { degrees },
                    TermKind::Odegree => Stat::OutDegree { degrees },
                    _ => Stat::Degree { degrees },
                }
            }
        };
        let len = names.len() - start;
        offset.extend(std::iter::repeat_n(term.offset, len));
        terms.push(CompiledTerm { term: term.clone(), stat, start, len });
    }
    let d = names.len();
    if d < 2 {
        return Err(Error::ModelDimension(d));
    }
    let n_off = offset.iter().filter(|o| **o).count();
    if offset_values.len() != n_off {
        return Err(Error::OffsetCount { expected: n_off, got: offset_values.len() });
    }
    if offset_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOffset);
    }
    Ok(Model {
        spec: spec.clone(),
        terms,
        names,
        directed,
        n: g.n(),
        offset,
        offset_values: offset_values.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M1: &str = r#"edges + nodematch("Office") + nodematch("Practice") + gwesp(0.5, fixed = TRUE)"#;

    fn lazega_like() -> Graph {
        let n = 36;
        let office = (0..n).map(|i| ["Boston", "Hartford", "Providence"][i % 3].to_string()).collect();
        let practice = (0..n).map(|i| ["Corporate", "Litigation"][i % 2].to_string()).collect();
        Graph::empty(n, false)
            .with_attribute("Office", Attribute::Categorical(office))
            .unwrap()
            .with_attribute("Practice", Attribute::Categorical(practice))
            .unwrap()
    }

    fn dixon_like() -> Graph {
        let n = 248;
        let race = (0..n).map(|i| ["B", "H", "O", "W"][i % 4].to_string()).collect();
        let grade = (0..n).map(|i| (7 + i % 6) as f64).collect();
        let sex = (0..n).map(|i| (1 + i % 2) as f64).collect();
        Graph::empty(n, true)
            .with_attribute("race", Attribute::Categorical(race))
            .unwrap()
            .with_attribute("grade", Attribute::Numeric(grade))
            .unwrap()
            .with_attribute("sex", Attribute::Numeric(sex))
            .unwrap()
    }

    #[test]
    fn parses_lazega_model() {
        let s = parse_formula(&format!("lazega ~ {M1}")).unwrap();
        assert_eq!(s.terms.len(), 4);
        assert_eq!(s.terms[3].decay, 0.5);
        assert!(s.terms[3].fixed);
        let m = validate(&s, &lazega_like(), &[]).unwrap();
        assert_eq!(m.dim(), 4);
        assert_eq!(
            m.names,
            vec!["edges", "nodematch.Office", "nodematch.Practice", "gwesp.fixed.0.5"]
        );
    }

    #[test]
    fn degree_ranges_expand() {
        let s = parse_formula("edges + mutual + idegree(0:1) + odegree(0:1)").unwrap();
        let m = validate(&s, &Graph::empty(5, true), &[]).unwrap();
        assert_eq!(m.dim(), 6);
        assert_eq!(m.names[2..], ["idegree0", "idegree1", "odegree0", "odegree1"]);
    }

    #[test]
    fn single_edges_term_is_rejected() {
        assert!(matches!(parse_formula("edges"), Err(Error::ModelDimension(1))));
    }

    #[test]
    fn dixon_model_has_27_coordinates() {
        let f = r#"dixon ~ edges + mutual + absdiff("grade") +
            nodefactor("race") + nodefactor("grade") + nodefactor("sex") +
            nodematch("race", diff = TRUE, levels = c("B","O","W")) +
            nodematch("grade", diff = TRUE) +
            nodematch("sex", diff = FALSE) +
            idegree(0:1) + odegree(0:1) + gwesp(0.1,fixed = TRUE)"#;
        let m = validate(&parse_formula(f).unwrap(), &dixon_like(), &[]).unwrap();
        assert_eq!(m.dim(), 27);
        assert_eq!(m.names[3], "nodefactor.race.H");
        assert_eq!(m.names[6..11], ["nodefactor.grade.8", "nodefactor.grade.9", "nodefactor.grade.10", "nodefactor.grade.11", "nodefactor.grade.12"]);
        assert_eq!(m.names[11], "nodefactor.sex.2");
        assert_eq!(m.names[12..15], ["nodematch.race.B", "nodematch.race.O", "nodematch.race.W"]);
        assert_eq!(m.names[26], "gwesp.fixed.0.1");
    }

    #[test]
    fn validation_errors() {
        let g = lazega_like();
        let mutual = parse_formula("edges + mutual").unwrap();
        assert!(matches!(validate(&mutual, &g, &[]), Err(Error::Directedness { .. })));
        let missing = parse_formula(r#"edges + nodematch("Gender")"#).unwrap();
        assert!(matches!(validate(&missing, &g, &[]), Err(Error::MissingAttribute(_))));
        let lv = parse_formula(r#"edges + nodematch("Office", diff = TRUE, levels = c("Paris"))"#).unwrap();
        assert!(matches!(validate(&lv, &g, &[]), Err(Error::UnknownLevel { .. })));
        let off = parse_formula("edges + offset(mutual)").unwrap();
        let dg = Graph::empty(4, true);
        assert!(matches!(validate(&off, &dg, &[]), Err(Error::OffsetCount { expected: 1, got: 0 })));
        assert!(matches!(validate(&off, &dg, &[f64::NEG_INFINITY]), Err(Error::NonFiniteOffset)));
        let m = validate(&off, &dg, &[-100.0]).unwrap();
        assert_eq!(m.free_dim(), 1);
        assert_eq!(m.full_theta(&[-2.0]), vec![-2.0, -100.0]);
        let deg = parse_formula("edges + degree(1)").unwrap();
        assert!(matches!(validate(&deg, &dg, &[]), Err(Error::Directedness { .. })));
        let bin = parse_formula("edges + nodefactor(\"x\")").unwrap();
        let g2 = Graph::empty(3, false).with_attribute("x", Attribute::Categorical(vec!["a".into(); 3])).unwrap();
        assert!(matches!(validate(&bin, &g2, &[]), Err(Error::EmptyLevels { .. })));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_formula("edges + triangles") {
            Err(Error::UnknownTerm { name, pos }) => {
                assert_eq!(name, "triangles");
                assert_eq!(pos, 8);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("edges + gwesp(0.5, fixd = TRUE)"), Err(Error::UnknownArgument { .. })));
        assert!(matches!(parse_formula("edges + gwesp(0.5)"), Err(Error::InvalidTermArgument { .. })));
        assert!(matches!(parse_formula("edges + + mutual"), Err(Error::Syntax { pos: 8, .. })));
        assert!(matches!(parse_formula("edges + nodematch(\"a)"), Err(Error::Syntax { .. })));
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let attr = prop::sample::select(vec!["a", "grade", "Office"]);
        let lv = prop::collection::vec(prop::sample::select(vec!["B", "O", "W", "7"]), 1..3);
        prop_oneof![
            Just(Term::new(TermKind::Edges)),
            Just(Term::new(TermKind::Mutual)),
            (attr.clone(), any::<bool>(), prop::option::of(lv.clone())).prop_map(|(a, diff, levels)| Term {
                attr: Some(a.into()),
                diff,
                levels: levels.map(|l| l.into_iter().map(String::from).collect()),
                ..Term::new(TermKind::Nodematch)
            }),
            (attr.clone(), prop::option::of(lv)).prop_map(|(a, levels)| Term {
                attr: Some(a.into()),
                levels: levels.map(|l| l.into_iter().map(String::from).collect()),
                ..Term::new(TermKind::Nodefactor)
            }),
            attr.prop_map(|a| Term { attr: Some(a.into()), ..Term::new(TermKind::Absdiff) }),
            (0u32..40).prop_map(|k| Term { decay: k as f64 / 8.0, fixed: true, ..Term::new(TermKind::Gwesp) }),
            (0u32..3, 0u32..3, prop::sample::select(vec![TermKind::Idegree, TermKind::Odegree, TermKind::Degree]))
                .prop_map(|(a, len, kind)| Term { degrees: (a..=a + len).collect(), ..Term::new(kind) }),
        ]
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(terms in prop::collection::vec((arb_term(), any::<bool>()), 2..6)) {
            let spec = ModelSpec {
                terms: terms.into_iter().map(|(mut t, off)| { t.offset = off; t }).collect(),
            };
            let once = parse_formula(&spec.to_string()).unwrap();
            prop_assert_eq!(&once, &spec);
            let twice = parse_formula(&once.to_string()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
