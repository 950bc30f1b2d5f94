//! Estimand expressions built from derivations.

use std::collections::HashMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{DerivationNode, Distribution, DistributionStore, NodeId, RuleId};
use crate::graph::LabeledGraph;
use crate::varset::VarSet;

/// An input term, possibly viewed through marginalization, conditioning,
/// activation, proxy exchange and do-calculus rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub term: Distribution,
    pub input: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Atom(Atom),
    Product(Vec<Expr>),
    /// `conditional` marks the `F / sum F` quotients of rule 5.
    Quotient {
        num: Box<Expr>,
        den: Box<Expr>,
        conditional: bool,
    },
    Sum {
        over: VarSet,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("node {0} has no parent but is not an input")]
    DanglingNode(NodeId),
    #[error("node {0} needs a second parent")]
    MissingSecondParent(NodeId),
    #[error("latex: {0} at byte {1}")]
    Latex(String, usize),
    #[error("estimand would have more than {0} nodes")]
    TooLarge(u64),
}

/// Largest estimand tree [`build_expression`] will materialize.
pub const MAX_EXPR_SIZE: u64 = 1 << 20;

/// Upper bound on the size of the estimand for `target`. Derivations share
/// sub-derivations, so the tree can be exponential in the derivation length.
pub fn expression_size_bound(store: &DistributionStore, target: NodeId) -> u64 {
    fn go(store: &DistributionStore, id: NodeId, memo: &mut HashMap<NodeId, u64>) -> u64 {
        if let Some(&s) = memo.get(&id) {
            return s;
        }
        let node = store.node(id);
        let s = node_bound(store, node, memo);
        memo.insert(id, s);
        s
    }
    fn node_bound(
        store: &DistributionStore,
        node: &DerivationNode,
        memo: &mut HashMap<NodeId, u64>,
    ) -> u64 {
        let mut parent = |k: usize| node.parents[k].map_or(1, |p| go(store, p, memo));
        match node.rule {
            RuleId::Input => 1,
            RuleId::R4 => parent(0).saturating_add(1),
            RuleId::R5 => parent(0).saturating_mul(2).saturating_add(2),
            RuleId::R6Plus
            | RuleId::R6Minus
            | RuleId::R7Plus
            | RuleId::R7Minus
            | RuleId::R8Plus
            | RuleId::R8Minus => parent(0).saturating_add(parent(1)).saturating_add(1),
            _ => parent(0),
        }
    }
    go(store, target, &mut HashMap::new())
}

/// Builds the estimand for store node `target`.
pub fn build_expression(
    store: &DistributionStore,
    target: NodeId,
    g: &LabeledGraph,
) -> Result<Expr, FormulaError> {
    let bound = expression_size_bound(store, target);
    if bound > MAX_EXPR_SIZE {
        return Err(FormulaError::TooLarge(MAX_EXPR_SIZE));
    }
    let mut b = Builder {
        store,
        g,
        memo: HashMap::new(),
    };
    b.build(target)
}

/// Builds the estimand for a derivation that is not stored itself, such as
/// the alternatives collected with `find_all_paths`.
pub fn build_expression_for(
    store: &DistributionStore,
    node: &DerivationNode,
    g: &LabeledGraph,
) -> Result<Expr, FormulaError> {
    let mut b = Builder {
        store,
        g,
        memo: HashMap::new(),
    };
    b.build_node(u32::MAX, node)
}

struct Builder<'a> {
    store: &'a DistributionStore,
    g: &'a LabeledGraph,
    memo: HashMap<NodeId, Expr>,
}

impl<'a> Builder<'a> {
    fn input_term(&self, input: usize) -> Option<Distribution> {
        self.store
            .nodes()
            .iter()
            .find(|n| n.input == Some(input))
            .map(|n| n.dist)
    }

    fn build(&mut self, id: NodeId) -> Result<Expr, FormulaError> {
        if let Some(e) = self.memo.get(&id) {
            return Ok(e.clone());
        }
        let node = self.store.node(id).clone();
        let e = self.build_node(id, &node)?;
        self.memo.insert(id, e.clone());
        Ok(e)
    }

    /// Atoms show their input as seen through rules 4, 5, 9 and 10; the
    /// do-calculus rules leave the expression untouched. Marginalizing an
    /// untransformed input and conditioning an atom give atoms again.
    fn build_node(&mut self, id: NodeId, node: &DerivationNode) -> Result<Expr, FormulaError> {
        if node.rule == RuleId::Input {
            let input = node.input.ok_or(FormulaError::DanglingNode(id))?;
            return Ok(Expr::Atom(Atom {
                term: node.dist,
                input,
            }));
        }
        let main = node.parents[0].ok_or(FormulaError::DanglingNode(id))?;
        let exp = self.build(main)?;
        let mut add = || -> Result<Expr, FormulaError> {
            let p = node.parents[1].ok_or(FormulaError::MissingSecondParent(id))?;
            self.build(p)
        };
        let z = node.z;
        Ok(match node.rule {
            RuleId::Input => unreachable!(),
            RuleId::R1Plus
            | RuleId::R1Minus
            | RuleId::R2Plus
            | RuleId::R2Minus
            | RuleId::R3Plus
            | RuleId::R3Minus => exp,
            RuleId::R4 => match exp {
                Expr::Atom(mut a) if Some(a.term) == self.input_term(a.input) => {
                    a.term.a = a.term.a - z;
                    Expr::Atom(a)
                }
                exp => Expr::Sum {
                    over: z,
                    body: Box::new(exp),
                },
            },
            RuleId::R5 => match exp {
                Expr::Atom(mut a) => {
                    a.term.a = a.term.a - z;
                    a.term.c |= z;
                    Expr::Atom(a)
                }
                exp => Expr::Quotient {
                    den: Box::new(Expr::Sum {
                        over: node.dist.a,
                        body: Box::new(exp.clone()),
                    }),
                    num: Box::new(exp),
                    conditional: true,
                },
            },
            RuleId::R6Plus => Expr::Product(vec![add()?, exp]),
            RuleId::R6Minus => Expr::Product(vec![exp, add()?]),
            RuleId::R7Plus | RuleId::R7Minus => Expr::Quotient {
                num: Box::new(exp),
                den: Box::new(add()?),
                conditional: false,
            },
            RuleId::R8Plus | RuleId::R8Minus => Expr::Quotient {
                num: Box::new(add()?),
                den: Box::new(exp),
                conditional: false,
            },
            RuleId::R9Plus | RuleId::R9Minus => activate(exp, z),
            RuleId::R10Plus | RuleId::R10Minus => exchange(exp, z, self.g),
        })
    }
}

/// Fixes the free occurrences of the indicators `r` to 1.
pub fn activate(e: Expr, r: VarSet) -> Expr {
    map_free(e, r, &mut |mut a, r| {
        a.term.r1 |= r & a.term.vars();
        a
    })
}

/// Replaces free occurrences of the proxies `z` by their true variables.
pub fn exchange(e: Expr, z: VarSet, g: &LabeledGraph) -> Expr {
    map_free(e, z, &mut |mut a, z| {
        let swap = |s: VarSet| (s - z) | g.to_trues(s & z);
        a.term.a = swap(a.term.a);
        a.term.b = swap(a.term.b);
        a.term.c = swap(a.term.c);
        a
    })
}

fn map_free(e: Expr, vars: VarSet, f: &mut impl FnMut(Atom, VarSet) -> Atom) -> Expr {
    if vars.is_empty() {
        return e;
    }
    match e {
        Expr::Atom(a) => Expr::Atom(f(a, vars)),
        Expr::Product(v) => Expr::Product(v.into_iter().map(|x| map_free(x, vars, f)).collect()),
        Expr::Quotient {
            num,
            den,
            conditional,
        } => Expr::Quotient {
            num: Box::new(map_free(*num, vars, f)),
            den: Box::new(map_free(*den, vars, f)),
            conditional,
        },
        Expr::Sum { over, body } => Expr::Sum {
            over,
            body: Box::new(map_free(*body, vars - over, f)),
        },
    }
}

impl Expr {
    /// Variables not bound by a sum, excluding fixed indicators and
    /// transportability/selection vertices.
    pub fn free_variables(&self, g: &LabeledGraph) -> VarSet {
        match self {
            Expr::Atom(a) => a.term.free() - g.transport() - g.selection(),
            Expr::Product(v) => v.iter().fold(VarSet::EMPTY, |s, x| s | x.free_variables(g)),
            Expr::Quotient { num, den, .. } => num.free_variables(g) | den.free_variables(g),
            Expr::Sum { over, body } => body.free_variables(g) - *over,
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(*a));
        out
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Expr::Atom(a) => f(a),
            Expr::Product(v) => v.iter().for_each(|x| x.visit_atoms(f)),
            Expr::Quotient { num, den, .. } => {
                num.visit_atoms(f);
                den.visit_atoms(f);
            }
            Expr::Sum { body, .. } => body.visit_atoms(f),
        }
    }

    /// Number of operator and atom nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Atom(_) => 1,
            Expr::Product(v) => 1 + v.iter().map(Expr::size).sum::<usize>(),
            Expr::Quotient { num, den, .. } => 1 + num.size() + den.size(),
            Expr::Sum { body, .. } => 1 + body.size(),
        }
    }

    pub fn to_json(&self, g: &LabeledGraph, opts: &RenderOptions) -> Value {
        let names = |s: VarSet| -> Vec<String> { s.iter().map(|v| var_name(g, v, opts)).collect() };
        match self {
            Expr::Atom(a) => {
                let t = a.term;
                json!({
                    "kind": "atom",
                    "atom": {
                        "left": names(t.a),
                        "do": names(t.b),
                        "cond": names(t.c),
                        "assign": t.r1.iter().map(|v| json!([var_name(g, v, opts), 1])).collect::<Vec<_>>(),
                        "input": a.input,
                    }
                })
            }
            Expr::Product(v) => json!({
                "kind": "product",
                "args": v.iter().map(|x| x.to_json(g, opts)).collect::<Vec<_>>(),
            }),
            Expr::Quotient { num, den, .. } => json!({
                "kind": "quotient",
                "num": num.to_json(g, opts),
                "den": den.to_json(g, opts),
            }),
            Expr::Sum { over, body } => json!({
                "kind": "sum",
                "over": names(*over),
                "args": [body.to_json(g, opts)],
            }),
        }
    }

    /// Inverse of [`Expr::to_json`].
    pub fn from_json(
        v: &Value,
        g: &LabeledGraph,
        opts: &RenderOptions,
    ) -> Result<Expr, FormulaError> {
        let bad = |m: &str| FormulaError::Latex(format!("json: {m}"), 0);
        let lookup = name_table(g, opts);
        let set = |v: &Value| -> Result<VarSet, FormulaError> {
            let mut s = VarSet::EMPTY;
            for n in v.as_array().ok_or_else(|| bad("expected a name list"))? {
                let n = n.as_str().ok_or_else(|| bad("expected a name"))?;
                s.insert(
                    *lookup
                        .get(n)
                        .ok_or_else(|| bad(&format!("unknown name {n}")))?,
                );
            }
            Ok(s)
        };
        let kind = v["kind"].as_str().ok_or_else(|| bad("missing kind"))?;
        Ok(match kind {
            "atom" => {
                let a = &v["atom"];
                let mut r1 = VarSet::EMPTY;
                for pair in a["assign"]
                    .as_array()
                    .ok_or_else(|| bad("missing assign"))?
                {
                    let n = pair[0].as_str().ok_or_else(|| bad("bad assign"))?;
                    r1.insert(
                        *lookup
                            .get(n)
                            .ok_or_else(|| bad(&format!("unknown name {n}")))?,
                    );
                }
                Expr::Atom(Atom {
                    term: Distribution {
                        a: set(&a["left"])?,
                        b: set(&a["do"])?,
                        c: set(&a["cond"])?,
                        r1,
                    },
                    input: a["input"].as_u64().ok_or_else(|| bad("missing input"))? as usize,
                })
            }
            "product" => Expr::Product(
                v["args"]
                    .as_array()
                    .ok_or_else(|| bad("missing args"))?
                    .iter()
                    .map(|x| Expr::from_json(x, g, opts))
                    .collect::<Result<_, _>>()?,
            ),
            "quotient" => Expr::Quotient {
                num: Box::new(Expr::from_json(&v["num"], g, opts)?),
                den: Box::new(Expr::from_json(&v["den"], g, opts)?),
                conditional: false,
            },
            "sum" => Expr::Sum {
                over: set(&v["over"])?,
                body: Box::new(Expr::from_json(&v["args"][0], g, opts)?),
            },
            k => return Err(bad(&format!("unknown kind {k}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub lowercase: bool,
    /// Also prime summation variables that shadow free variables.
    pub prime_free_shadows: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            lowercase: true,
            prime_free_shadows: false,
        }
    }
}

pub fn var_name(g: &LabeledGraph, v: usize, opts: &RenderOptions) -> String {
    let n = g.name(v);
    let n = if opts.lowercase {
        n.to_lowercase()
    } else {
        n.to_string()
    };
    match n.strip_suffix('*') {
        Some(base) => format!("{base}^*"),
        None => n,
    }
}

fn name_table(g: &LabeledGraph, opts: &RenderOptions) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for v in g.observed().iter() {
        m.entry(var_name(g, v, opts)).or_insert(v);
    }
    m
}

/// LaTeX in the style of the reference implementation.
pub fn render_latex(e: &Expr, g: &LabeledGraph, opts: &RenderOptions) -> String {
    let mut out = String::new();
    let mut primes = vec![0u8; g.num_vertices()];
    let scope = if opts.prime_free_shadows {
        e.free_variables(g)
    } else {
        VarSet::EMPTY
    };
    render(e, g, opts, scope, &mut primes, &mut out);
    out
}

fn render(
    e: &Expr,
    g: &LabeledGraph,
    opts: &RenderOptions,
    scope: VarSet,
    primes: &mut Vec<u8>,
    out: &mut String,
) {
    let name = |v: usize, primes: &Vec<u8>| {
        let mut s = var_name(g, v, opts);
        for _ in 0..primes[v] {
            s.push('\'');
        }
        s
    };
    match e {
        Expr::Atom(a) => {
            let t = a.term;
            let item = |v: usize| {
                if t.r1.contains(v) {
                    format!("{} = 1", name(v, primes))
                } else {
                    name(v, primes)
                }
            };
            out.push_str("p(");
            out.push_str(&t.a.iter().map(item).collect::<Vec<_>>().join(","));
            let mut rhs = Vec::new();
            if !t.b.is_empty() {
                rhs.push(format!(
                    "do({})",
                    t.b.iter().map(item).collect::<Vec<_>>().join(",")
                ));
            }
            rhs.extend(t.c.iter().map(item));
            if !rhs.is_empty() {
                out.push('|');
                out.push_str(&rhs.join(","));
            }
            out.push(')');
        }
        Expr::Product(v) => {
            out.push_str("\\left(");
            for x in v {
                render(x, g, opts, scope, primes, out);
            }
            out.push_str("\\right)");
        }
        Expr::Quotient { num, den, .. } => {
            out.push_str("\\frac{");
            render(num, g, opts, scope, primes, out);
            out.push_str("}{");
            if let Expr::Sum { .. } = den.as_ref() {
                render_sum(den, g, opts, scope, primes, out, true);
            } else {
                render(den, g, opts, scope, primes, out);
            }
            out.push('}');
        }
        Expr::Sum { .. } => render_sum(e, g, opts, scope, primes, out, false),
    }
}

fn render_sum(
    e: &Expr,
    g: &LabeledGraph,
    opts: &RenderOptions,
    scope: VarSet,
    primes: &mut Vec<u8>,
    out: &mut String,
    spaced: bool,
) {
    let Expr::Sum { over, body } = e else {
        unreachable!()
    };
    let saved: Vec<(usize, u8)> = over.iter().map(|v| (v, primes[v])).collect();
    for v in over.iter() {
        if scope.contains(v) {
            primes[v] += 1;
        }
    }
    let names: Vec<String> = over
        .iter()
        .map(|v| {
            let mut s = var_name(g, v, opts);
            for _ in 0..primes[v] {
                s.push('\'');
            }
            s
        })
        .collect();
    out.push_str("\\sum_{");
    out.push_str(&names.join(","));
    out.push('}');
    if spaced {
        out.push(' ');
    }
    render(body, g, opts, scope | *over, primes, out);
    for (v, p) in saved {
        primes[v] = p;
    }
}

/// Reads back a string produced by [`render_latex`]. Primes are dropped;
/// summation scopes are lexical. `resolve` maps each atom's term to the
/// input it is evaluated from.
pub fn parse_latex(
    s: &str,
    g: &LabeledGraph,
    opts: &RenderOptions,
    resolve: impl Fn(&Distribution) -> Option<usize>,
) -> Result<Expr, FormulaError> {
    let mut p = LatexParser {
        s: s.as_bytes(),
        pos: 0,
        names: name_table(g, opts),
        resolve: &resolve,
    };
    let e = p.product_until(&[])?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

struct LatexParser<'a, F> {
    s: &'a [u8],
    pos: usize,
    names: HashMap<String, usize>,
    resolve: &'a F,
}

impl<'a, F: Fn(&Distribution) -> Option<usize>> LatexParser<'a, F> {
    fn err(&self, m: &str) -> FormulaError {
        FormulaError::Latex(m.to_string(), self.pos)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.s[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), FormulaError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {tok}")))
        }
    }

    fn at(&mut self, toks: &[&str]) -> bool {
        self.skip_ws();
        self.pos >= self.s.len()
            || toks
                .iter()
                .any(|t| self.s[self.pos..].starts_with(t.as_bytes()))
    }

    /// Juxtaposed terms up to one of `stops` or the end.
    fn product_until(&mut self, stops: &[&str]) -> Result<Expr, FormulaError> {
        let mut v = Vec::new();
        while !self.at(stops) {
            v.push(self.term()?);
        }
        match v.len() {
            0 => Err(self.err("empty expression")),
            1 => Ok(v.pop().unwrap()),
            _ => Ok(Expr::Product(v)),
        }
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        if self.eat("\\sum_{") {
            let over = self.names_until("}")?;
            self.expect("}")?;
            let body = self.term()?;
            return Ok(Expr::Sum {
                over,
                body: Box::new(body),
            });
        }
        if self.eat("\\frac{") {
            let num = self.product_until(&["}"])?;
            self.expect("}")?;
            self.expect("{")?;
            let den = self.product_until(&["}"])?;
            self.expect("}")?;
            return Ok(Expr::Quotient {
                num: Box::new(num),
                den: Box::new(den),
                conditional: false,
            });
        }
        if self.eat("\\left(") {
            let mut v = Vec::new();
            while !self.at(&["\\right)"]) {
                v.push(self.term()?);
            }
            self.expect("\\right)")?;
            return Ok(Expr::Product(v));
        }
        if self.eat("p(") {
            return self.atom();
        }
        Err(self.err("expected a term"))
    }

    fn name(&mut self) -> Result<usize, FormulaError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.s[self.pos..].starts_with(b"^*") {
            self.pos += 2;
        }
        let n = std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .to_string();
        while self.pos < self.s.len() && self.s[self.pos] == b'\'' {
            self.pos += 1;
        }
        self.names
            .get(&n)
            .copied()
            .ok_or_else(|| FormulaError::Latex(format!("unknown variable {n:?}"), start))
    }

    fn names_until(&mut self, stop: &str) -> Result<VarSet, FormulaError> {
        let mut s = VarSet::EMPTY;
        loop {
            s.insert(self.name()?);
            if !self.eat(",") {
                break;
            }
        }
        if !self.at(&[stop]) {
            return Err(self.err(&format!("expected {stop}")));
        }
        Ok(s)
    }

    /// Items `name` or `name = 1`, comma separated, until `)` or `|`.
    fn items(&mut self, set: &mut VarSet, r1: &mut VarSet) -> Result<(), FormulaError> {
        loop {
            let v = self.name()?;
            set.insert(v);
            if self.eat("=") {
                self.expect("1")?;
                r1.insert(v);
            }
            if !self.eat(",") || self.at(&["do("]) {
                return Ok(());
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, FormulaError> {
        let mut t = Distribution::default();
        let mut r1 = VarSet::EMPTY;
        self.items(&mut t.a, &mut r1)?;
        if self.eat("|") {
            loop {
                if self.eat("do(") {
                    self.items(&mut t.b, &mut r1)?;
                    self.expect(")")?;
                    if !self.eat(",") {
                        break;
                    }
                } else {
                    self.items(&mut t.c, &mut r1)?;
                    if !self.at(&["do("]) {
                        break;
                    }
                }
            }
        }
        self.expect(")")?;
        t.r1 = r1;
        let input = (self.resolve)(&t).ok_or_else(|| self.err("atom matches no input"))?;
        Ok(Expr::Atom(Atom { term: t, input }))
    }
}

/// How far a `\sum` reaches in [`canonical_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumScope {
    /// The next single term, as in rendered output.
    NextTerm,
    /// The rest of the enclosing product, as in typeset formulas.
    RestOfProduct,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Canon {
    Atom(String),
    Product(Vec<Canon>),
    Sum(Vec<String>, Box<Canon>),
    Frac(Box<Canon>, Box<Canon>),
}

impl Canon {
    fn normalize(self) -> Canon {
        match self {
            Canon::Product(v) => {
                let mut flat = Vec::new();
                for x in v {
                    match x.normalize() {
                        Canon::Product(inner) => flat.extend(inner),
                        y => flat.push(y),
                    }
                }
                if flat.len() == 1 {
                    return flat.pop().unwrap();
                }
                flat.sort_by_key(|c| c.to_string());
                Canon::Product(flat)
            }
            Canon::Sum(mut vars, body) => match body.normalize() {
                Canon::Sum(inner, b) => {
                    vars.extend(inner);
                    Canon::Sum(vars, b).normalize()
                }
                b => {
                    vars.sort();
                    vars.dedup();
                    Canon::Sum(vars, Box::new(b))
                }
            },
            Canon::Frac(n, d) => Canon::Frac(Box::new(n.normalize()), Box::new(d.normalize())),
            a => a,
        }
    }
}

impl std::fmt::Display for Canon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Canon::Atom(a) => write!(f, "p({a})"),
            Canon::Product(v) => {
                write!(f, "[")?;
                for x in v {
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Canon::Sum(vars, b) => write!(f, "S{{{}}}{b}", vars.join(",")),
            Canon::Frac(n, d) => write!(f, "F{{{n}}}{{{d}}}"),
        }
    }
}

struct CanonParser<'s> {
    s: &'s [u8],
    pos: usize,
    scope: SumScope,
}

impl<'s> CanonParser<'s> {
    fn eat(&mut self, lit: &str) -> bool {
        if self.s[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn braced(&mut self) -> Option<&'s str> {
        if !self.eat("{") {
            // a bare single-token argument such as `\sum_z`
            let start = self.pos;
            self.pos += 1;
            return std::str::from_utf8(self.s.get(start..self.pos)?).ok();
        }
        let start = self.pos;
        let mut depth = 1;
        while self.pos < self.s.len() {
            match self.s[self.pos] {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let body = std::str::from_utf8(&self.s[start..self.pos]).ok()?;
                        self.pos += 1;
                        return Some(body);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        None
    }

    fn product(&mut self) -> Option<Canon> {
        let mut v = Vec::new();
        while self.pos < self.s.len() && !matches!(self.s[self.pos], b')' | b'}') {
            if self.s[self.pos..].starts_with(b"\\sum_") && self.scope == SumScope::RestOfProduct {
                self.pos += 5;
                let vars = self.braced()?;
                let body = self.product()?;
                v.push(Canon::Sum(split_vars(vars), Box::new(body)));
                break;
            }
            v.push(self.term()?);
        }
        Some(Canon::Product(v))
    }

    fn term(&mut self) -> Option<Canon> {
        if self.eat("\\sum_") {
            let vars = self.braced()?;
            let body = self.term()?;
            return Some(Canon::Sum(split_vars(vars), Box::new(body)));
        }
        if self.eat("\\frac") {
            let n = self.braced()?;
            let d = self.braced()?;
            let sub = |t: &str| {
                CanonParser {
                    s: t.as_bytes(),
                    pos: 0,
                    scope: self.scope,
                }
                .all()
            };
            return Some(Canon::Frac(Box::new(sub(n)?), Box::new(sub(d)?)));
        }
        if self.eat("p(") {
            let start = self.pos;
            let mut depth = 1;
            while self.pos < self.s.len() {
                match self.s[self.pos] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                self.pos += 1;
            }
            let body = std::str::from_utf8(&self.s[start..self.pos]).ok()?;
            self.pos += 1;
            return Some(Canon::Atom(canonical_atom(body)));
        }
        if self.eat("(") {
            let p = self.product()?;
            return self.eat(")").then_some(p);
        }
        None
    }

    fn all(mut self) -> Option<Canon> {
        let p = self.product()?;
        (self.pos == self.s.len()).then_some(p)
    }
}

fn split_vars(s: &str) -> Vec<String> {
    s.split(',')
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect()
}

fn strip_braced_command(s: &str, cmd: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while let Some(i) = rest.find(cmd) {
        out.push_str(&rest[..i]);
        let tail = &rest[i + cmd.len()..];
        let mut depth = 0;
        let mut end = tail.len();
        for (k, ch) in tail.char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = k + 1;
                        break;
                    }
                }
                _ => {}
            }
        }
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

/// Canonical form of an estimand written in LaTeX, for symbolic comparison
/// modulo argument order: arguments inside each `p(...)` and factors of each
/// product are sorted, nested sums merge, and primes, casing, spacing and
/// grouping are dropped. Accepts rendered output as well as typeset
/// formulas (`P(Y { \, | \, } \textrm{do}(X))`). `None` if unparsable.
pub fn canonical_form(latex: &str, scope: SumScope) -> Option<String> {
    let mut s = strip_braced_command(latex, "\\vphantom");
    for (from, to) in [
        ("{ \\, | \\, }", "|"),
        ("\\mid", "|"),
        ("\\textrm{do}", "do"),
        ("\\left(", "("),
        ("\\right)", ")"),
        ("\\left[", "("),
        ("\\right]", ")"),
        ("\\left.", ""),
        ("\\right.", ""),
        ("\\times", ""),
        ("^{\\prime}", ""),
        ("^\\prime", ""),
        ("\\prime", ""),
        ("\\!", ""),
        ("\\,", ""),
        ("\\;", ""),
        ("\\\\", ""),
        ("&", ""),
        ("^{}", ""),
        ("'", ""),
    ] {
        s = s.replace(from, to);
    }
    let s: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .replace("^_", "_")
        .replace('[', "(")
        .replace(']', ")")
        .to_lowercase();
    let s = s.strip_suffix('.').unwrap_or(&s).to_string();
    let tree = CanonParser {
        s: s.as_bytes(),
        pos: 0,
        scope,
    }
    .all()?;
    Some(tree.normalize().to_string())
}

/// Symbolic comparison of two rendered estimands modulo argument order.
pub fn canonical_latex(s: &str) -> String {
    canonical_form(s, SumScope::NextTerm).unwrap_or_else(|| s.replace([' ', '\'', '\n'], ""))
}

fn canonical_atom(body: &str) -> String {
    let clean = body.replace([' ', '\''], "");
    let (left, right) = match clean.split_once('|') {
        Some((l, r)) => (l.to_string(), r.to_string()),
        None => (clean.clone(), String::new()),
    };
    let mut l: Vec<&str> = left.split(',').collect();
    l.sort();
    let mut dos: Vec<String> = Vec::new();
    let mut cond: Vec<String> = Vec::new();
    let mut r = right.as_str();
    while !r.is_empty() {
        if let Some(x) = r.strip_prefix("do(") {
            let end = x.find(')').unwrap_or(x.len());
            dos.extend(x[..end].split(',').map(String::from));
            r = x.get(end + 1..).unwrap_or("");
            r = r.strip_prefix(',').unwrap_or(r);
        } else {
            let end = r.find(",do(").unwrap_or(r.len());
            cond.extend(
                r[..end]
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(String::from),
            );
            r = r.get(end..).unwrap_or("");
            r = r.strip_prefix(',').unwrap_or(r);
        }
    }
    dos.sort();
    cond.sort();
    let mut s = l.join(",");
    if !dos.is_empty() || !cond.is_empty() {
        s.push('|');
        let mut rhs = Vec::new();
        if !dos.is_empty() {
            rhs.push(format!("do({})", dos.join(",")));
        }
        rhs.extend(cond);
        s.push_str(&rhs.join(","));
    }
    s
}
