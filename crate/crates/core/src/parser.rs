//! Text DSL for terms, graphs and missingness mechanisms.
//!
//! ```text
//! P(Y|do(X),W)          p(x*,y*,r_x,r_y)       p(x|r_x = 1,y)
//! x -> y                x <-> y                r_x : x, r_y : y
//! ```

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unexpected character {0:?}")]
    Unexpected(char),
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error("a term may contain only one do(...) group")]
    DuplicateDo,
    #[error("the left side of a term is empty")]
    EmptyLeft,
    #[error("variable {0} appears more than once")]
    RepeatedVariable(String),
    #[error("value assignments accept only 0 or 1, got {0}")]
    BadValue(String),
    #[error("role code must be 0, 1 or 2, got {0}")]
    BadRoleCode(i64),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("unknown edge operator {0:?}")]
    UnknownOperator(String),
    #[error("proxy variable {0} cannot be declared in a graph")]
    ProxyInGraph(String),
    #[error("indicator {0} is declared more than once")]
    DuplicateIndicator(String),
    #[error("variable {0} has more than one missingness mechanism")]
    DuplicateTrueVariable(String),
    #[error("indicator {0} cannot be its own variable")]
    IndicatorIsVariable(String),
    #[error("proxy name {0} is not allowed here")]
    ProxyNotAllowed(String),
}

/// Parse failure with a byte offset into the parsed text and, for multi-line
/// inputs, the 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub line: Option<usize>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {}, byte {}: {}", l, self.offset, self.kind),
            None => write!(f, "byte {}: {}", self.offset, self.kind),
        }
    }
}

impl ParseError {
    fn at(kind: ParseErrorKind, offset: usize) -> Self {
        ParseError {
            kind,
            offset,
            line: None,
        }
    }

    fn shifted(mut self, base: usize, line: usize) -> Self {
        self.offset += base;
        self.line = Some(line);
        self
    }
}

/// A term `P(left | do(do_vars), cond_vars)` as written by the user.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistributionSpec {
    pub left: Vec<String>,
    pub do_vars: Vec<String>,
    pub cond_vars: Vec<String>,
    /// `(name, value)` for names written as `name = value`, in source order.
    pub value_assignments: Vec<(String, u8)>,
}

impl DistributionSpec {
    pub fn value_of(&self, name: &str) -> Option<u8> {
        self.value_assignments
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Every name in the term.
    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.left.iter().chain(&self.do_vars).chain(&self.cond_vars)
    }

    fn validate(&self, offset: usize) -> Result<(), ParseError> {
        if self.left.is_empty() {
            return Err(ParseError::at(ParseErrorKind::EmptyLeft, offset));
        }
        let mut seen = HashSet::new();
        for n in self.names() {
            if !seen.insert(n.as_str()) {
                return Err(ParseError::at(
                    ParseErrorKind::RepeatedVariable(n.clone()),
                    offset,
                ));
            }
        }
        Ok(())
    }

    /// Canonical text: do-group first, single spaces only around `=`.
    pub fn render(&self) -> String {
        let item = |n: &String| match self.value_of(n) {
            Some(v) => format!("{} = {}", n, v),
            None => n.clone(),
        };
        let mut s = String::from("P(");
        s.push_str(&self.left.iter().map(item).collect::<Vec<_>>().join(","));
        let mut rhs = Vec::new();
        if !self.do_vars.is_empty() {
            rhs.push(format!("do({})", self.do_vars.join(",")));
        }
        rhs.extend(self.cond_vars.iter().map(item));
        if !rhs.is_empty() {
            s.push('|');
            s.push_str(&rhs.join(","));
        }
        s.push(')');
        s
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphSpec {
    pub directed_edges: Vec<(String, String)>,
    pub bidirected_edges: Vec<(String, String)>,
    pub isolated_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MissingnessSpec {
    /// `(indicator, true variable)` in declaration order.
    pub mechanisms: Vec<(String, String)>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &'static str) -> ParseError {
        match self.peek() {
            None => ParseError::at(ParseErrorKind::Eof(what), self.pos),
            Some(c) => ParseError::at(ParseErrorKind::Unexpected(c), self.pos),
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    /// `[A-Za-z_][A-Za-z0-9_]*` with an optional trailing `*`.
    fn name(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'*' {
                i += 1;
            }
            self.pos = i;
            Ok(self.src[start..i].to_string())
        } else {
            Err(self.unexpected("a variable name"))
        }
    }

    fn lookahead_do(&self) -> bool {
        let rest = &self.src[self.pos..];
        let rest = rest.trim_start();
        if let Some(after) = rest.strip_prefix("do") {
            after.trim_start().starts_with('(')
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<u8, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len()
            && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'-')
        {
            i += 1;
        }
        let tok = &self.src[start..i];
        self.pos = i;
        match tok {
            "0" => Ok(0),
            "1" => Ok(1),
            "" => Err(self.unexpected("a value")),
            _ => Err(ParseError::at(
                ParseErrorKind::BadValue(tok.to_string()),
                start,
            )),
        }
    }
}

fn item(
    cur: &mut Cursor,
    out: &mut Vec<String>,
    vals: &mut Vec<(String, u8)>,
) -> Result<(), ParseError> {
    let n = cur.name()?;
    if cur.eat('=') {
        let v = cur.value()?;
        vals.push((n.clone(), v));
    }
    out.push(n);
    Ok(())
}

/// Parses a single term such as `P(Y|do(X),W)`.
pub fn parse_distribution(text: &str) -> Result<DistributionSpec, ParseError> {
    let mut cur = Cursor::new(text);
    cur.skip_ws();
    let start = cur.pos;
    match cur.peek() {
        Some('p') | Some('P') => cur.pos += 1,
        _ => return Err(cur.unexpected("P(")),
    }
    cur.expect('(', "'('")?;
    let mut spec = DistributionSpec::default();
    let mut vals = Vec::new();
    let mut left = Vec::new();
    loop {
        item(&mut cur, &mut left, &mut vals)?;
        if !cur.eat(',') {
            break;
        }
    }
    spec.left = left;
    let mut seen_do = false;
    if cur.eat('|') {
        loop {
            cur.skip_ws();
            if cur.lookahead_do() {
                let at = cur.pos;
                if seen_do {
                    return Err(ParseError::at(ParseErrorKind::DuplicateDo, at));
                }
                seen_do = true;
                cur.skip_ws();
                cur.pos += 2;
                cur.expect('(', "'('")?;
                loop {
                    let n = cur.name()?;
                    spec.do_vars.push(n);
                    if !cur.eat(',') {
                        break;
                    }
                }
                cur.expect(')', "')' closing do(")?;
            } else {
                item(&mut cur, &mut spec.cond_vars, &mut vals)?;
            }
            if !cur.eat(',') {
                break;
            }
        }
    }
    cur.expect(')', "')'")?;
    if !cur.at_end() {
        return Err(cur.unexpected("end of term"));
    }
    spec.value_assignments = vals;
    spec.validate(start)?;
    Ok(spec)
}

/// Parses newline-separated terms; blank lines are skipped.
pub fn parse_distributions(text: &str) -> Result<Vec<DistributionSpec>, ParseError> {
    let mut out = Vec::new();
    let mut base = 0;
    for (i, line) in text.split('\n').enumerate() {
        if !line.trim().is_empty() {
            out.push(parse_distribution(line).map_err(|e| e.shifted(base, i + 1))?);
        }
        base += line.len() + 1;
    }
    Ok(out)
}

/// Numeric role codes: 0 left, 1 do, 2 conditioning.
pub fn parse_distribution_numeric<S: AsRef<str>>(
    pairs: &[(S, i64)],
) -> Result<DistributionSpec, ParseError> {
    let mut spec = DistributionSpec::default();
    for (n, code) in pairs {
        let n = n.as_ref().to_string();
        let mut c = Cursor::new(&n);
        let parsed = c.name()?;
        if !c.at_end() || parsed != n {
            return Err(c.unexpected("a variable name"));
        }
        match code {
            0 => spec.left.push(n),
            1 => spec.do_vars.push(n),
            2 => spec.cond_vars.push(n),
            other => return Err(ParseError::at(ParseErrorKind::BadRoleCode(*other), 0)),
        }
    }
    spec.validate(0)?;
    Ok(spec)
}

/// One edge per line: `a -> b` or `a <-> b`. A line holding a single name
/// declares an isolated vertex.
pub fn parse_graph(text: &str) -> Result<GraphSpec, ParseError> {
    let mut g = GraphSpec::default();
    let mut base = 0;
    for (i, line) in text.split('\n').enumerate() {
        parse_graph_line(line, &mut g).map_err(|e| e.shifted(base, i + 1))?;
        base += line.len() + 1;
    }
    Ok(g)
}

fn graph_name(cur: &mut Cursor) -> Result<String, ParseError> {
    let at = {
        cur.skip_ws();
        cur.pos
    };
    let n = cur.name()?;
    if n.ends_with('*') {
        return Err(ParseError::at(ParseErrorKind::ProxyInGraph(n), at));
    }
    Ok(n)
}

fn parse_graph_line(line: &str, g: &mut GraphSpec) -> Result<(), ParseError> {
    let mut cur = Cursor::new(line);
    if cur.at_end() {
        return Ok(());
    }
    let a = graph_name(&mut cur)?;
    if cur.at_end() {
        g.isolated_names.push(a);
        return Ok(());
    }
    let op_start = cur.pos;
    let bytes = line.as_bytes();
    let mut j = op_start;
    while j < bytes.len() && matches!(bytes[j], b'<' | b'-' | b'>' | b'=' | b'~') {
        j += 1;
    }
    let op = &line[op_start..j];
    cur.pos = j;
    let directed = match op {
        "->" => true,
        "<->" => false,
        "" => return Err(cur.unexpected("an edge operator")),
        other => {
            return Err(ParseError::at(
                ParseErrorKind::UnknownOperator(other.to_string()),
                op_start,
            ))
        }
    };
    let b = graph_name(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.unexpected("end of line"));
    }
    if a == b {
        return Err(ParseError::at(ParseErrorKind::SelfLoop(a), 0));
    }
    if directed {
        g.directed_edges.push((a, b));
    } else {
        g.bidirected_edges.push((a, b));
    }
    Ok(())
}

/// Comma- or newline-separated `indicator : variable` pairs.
pub fn parse_missingness(text: &str) -> Result<MissingnessSpec, ParseError> {
    let mut m = MissingnessSpec::default();
    let mut inds = HashSet::new();
    let mut trues = HashSet::new();
    let mut base = 0;
    for piece in text.split([',', '\n']) {
        let here = base;
        base += piece.len() + 1;
        let mut cur = Cursor::new(piece);
        if cur.at_end() {
            continue;
        }
        let err = |e: ParseError| ParseError {
            offset: e.offset + here,
            ..e
        };
        let r = graph_name(&mut cur).map_err(&err)?;
        cur.expect(':', "':'").map_err(&err)?;
        let v = graph_name(&mut cur).map_err(&err)?;
        if !cur.at_end() {
            return Err(err(cur.unexpected("',' or end of input")));
        }
        if r == v {
            return Err(ParseError::at(ParseErrorKind::IndicatorIsVariable(r), here));
        }
        if !inds.insert(r.clone()) || trues.contains(&r) {
            return Err(ParseError::at(ParseErrorKind::DuplicateIndicator(r), here));
        }
        if !trues.insert(v.clone()) || inds.contains(&v) {
            return Err(ParseError::at(
                ParseErrorKind::DuplicateTrueVariable(v),
                here,
            ));
        }
        m.mechanisms.push((r, v));
    }
    Ok(m)
}

/// Comma-separated list of plain names, e.g. `"s_1, s_2"`.
pub fn parse_name_list(text: &str) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    let mut base = 0;
    for piece in text.split(',') {
        let here = base;
        base += piece.len() + 1;
        let mut cur = Cursor::new(piece);
        if cur.at_end() {
            continue;
        }
        let n = graph_name(&mut cur).map_err(|e| ParseError {
            offset: e.offset + here,
            ..e
        })?;
        if !cur.at_end() {
            let e = cur.unexpected("','");
            return Err(ParseError {
                offset: e.offset + here,
                ..e
            });
        }
        if !out.contains(&n) {
            out.push(n);
        }
    }
    Ok(out)
}
