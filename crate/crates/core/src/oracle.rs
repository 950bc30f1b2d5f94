//! Random discrete structural models and exact evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::Distribution;
use crate::formula::{Atom, Expr};
use crate::graph::{LabeledGraph, Role};
use crate::varset::VarSet;

/// Smallest probability a sampled CPT entry may take.
pub const FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("conditioning event has probability zero")]
    ZeroProbability,
    #[error("atom refers to input {0}, which has no table")]
    MissingTable(usize),
    #[error("table for {0} does not match its scope")]
    BadTable(String),
}

/// A nonnegative function of discrete variables. Variables are identified by
/// ids (vertex indices, latents above them) kept in ascending order; the last
/// variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    vars: Vec<usize>,
    cards: Vec<usize>,
    data: Vec<f64>,
}

/// Odometer over the joint states of `cards`, tracking one flat offset per
/// stride vector.
struct Odometer<'a, const K: usize> {
    cards: &'a [usize],
    digits: Vec<usize>,
    strides: [Vec<usize>; K],
    offsets: [usize; K],
    done: bool,
}

impl<'a, const K: usize> Odometer<'a, K> {
    fn new(cards: &'a [usize], strides: [Vec<usize>; K]) -> Self {
        let done = cards.contains(&0);
        Odometer {
            cards,
            digits: vec![0; cards.len()],
            strides,
            offsets: [0; K],
            done,
        }
    }

    fn advance(&mut self) {
        for k in (0..self.cards.len()).rev() {
            self.digits[k] += 1;
            for j in 0..K {
                self.offsets[j] += self.strides[j][k];
            }
            if self.digits[k] < self.cards[k] {
                return;
            }
            for j in 0..K {
                self.offsets[j] -= self.strides[j][k] * self.cards[k];
            }
            self.digits[k] = 0;
        }
        self.done = true;
    }
}

impl Table {
    pub fn scalar(x: f64) -> Self {
        Table {
            vars: Vec::new(),
            cards: Vec::new(),
            data: vec![x],
        }
    }

    /// Builds a table from `f` evaluated on every joint state, in the
    /// table's storage order. `vars` must be ascending.
    pub fn from_fn(
        vars: Vec<usize>,
        cards: Vec<usize>,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Self {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        let n: usize = cards.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut od = Odometer::new(&cards, [vec![0; cards.len()]]);
        while !od.done {
            data.push(f(&od.digits));
            od.advance();
        }
        Table { vars, cards, data }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.vars.len()];
        for k in (0..self.vars.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.cards[k + 1];
        }
        s
    }

    fn pos(&self, v: usize) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    /// Strides of this table laid out along `vars` (0 where absent).
    fn strides_along(&self, vars: &[usize]) -> Vec<usize> {
        let st = self.strides();
        vars.iter()
            .map(|v| self.pos(*v).map(|p| st[p]).unwrap_or(0))
            .collect()
    }

    pub fn card_of(&self, v: usize) -> Option<usize> {
        self.pos(v).map(|p| self.cards[p])
    }

    /// Value at a full assignment given as `(var, state)` pairs; variables
    /// not in the table are ignored.
    pub fn value(&self, assignment: &[(usize, usize)]) -> f64 {
        let st = self.strides();
        let mut off = 0;
        for (k, v) in self.vars.iter().enumerate() {
            let s = assignment
                .iter()
                .find(|(w, _)| w == v)
                .map(|(_, s)| *s)
                .expect("assignment misses a table variable");
            off += s * st[k];
        }
        self.data[off]
    }

    /// Pointwise combination over the union of scopes.
    pub fn combine(&self, other: &Table, op: impl Fn(f64, f64) -> f64) -> Table {
        let mut vars = Vec::new();
        let mut cards = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.vars.len() || j < other.vars.len() {
            let take_self =
                j >= other.vars.len() || (i < self.vars.len() && self.vars[i] <= other.vars[j]);
            if take_self {
                if j < other.vars.len() && other.vars[j] == self.vars[i] {
                    j += 1;
                }
                vars.push(self.vars[i]);
                cards.push(self.cards[i]);
                i += 1;
            } else {
                vars.push(other.vars[j]);
                cards.push(other.cards[j]);
                j += 1;
            }
        }
        let sa = self.strides_along(&vars);
        let sb = other.strides_along(&vars);
        let n: usize = cards.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut od = Odometer::new(&cards, [sa, sb]);
        while !od.done {
            data.push(op(self.data[od.offsets[0]], other.data[od.offsets[1]]));
            od.advance();
        }
        Table { vars, cards, data }
    }

    /// Product with `0 * undefined = 0`, so conditionals on null events
    /// vanish when weighted by their zero probability.
    pub fn mul(&self, other: &Table) -> Table {
        self.combine(other, |a, b| if a == 0.0 || b == 0.0 { 0.0 } else { a * b })
    }

    /// Division; `x/0` is undefined (NaN) and `0/undefined = 0`, matching
    /// [`Table::mul`].
    pub fn div(&self, other: &Table) -> Table {
        self.combine(other, |a, b| {
            if b.is_nan() && a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::NAN
            } else {
                a / b
            }
        })
    }

    /// Sums out the listed variables; variables outside the scope contribute
    /// a factor equal to their cardinality, taken from `card`.
    pub fn sum_out(&self, vars: &[usize], card: impl Fn(usize) -> usize) -> Table {
        let mut factor = 1.0;
        for v in vars {
            if self.pos(*v).is_none() {
                factor *= card(*v) as f64;
            }
        }
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|&k| !vars.contains(&self.vars[k]))
            .collect();
        let out_vars: Vec<usize> = keep.iter().map(|&k| self.vars[k]).collect();
        let out_cards: Vec<usize> = keep.iter().map(|&k| self.cards[k]).collect();
        let mut out = vec![0.0; out_cards.iter().product()];
        let mut dst = vec![0; self.vars.len()];
        let mut s = 1;
        for k in (0..self.vars.len()).rev() {
            if keep.contains(&k) {
                dst[k] = s;
                s *= self.cards[k];
            }
        }
        let mut od = Odometer::new(&self.cards, [dst]);
        let mut i = 0;
        while !od.done {
            let x = self.data[i];
            out[od.offsets[0]] += x;
            i += 1;
            od.advance();
        }
        if factor != 1.0 {
            out.iter_mut().for_each(|x| *x *= factor);
        }
        Table {
            vars: out_vars,
            cards: out_cards,
            data: out,
        }
    }

    /// Fixes `v` to `state` and drops it from the scope. No-op if absent.
    pub fn slice(&self, v: usize, state: usize) -> Table {
        let Some(p) = self.pos(v) else {
            return self.clone();
        };
        let st = self.strides();
        let base = state * st[p];
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        let mut sv = st.clone();
        sv.remove(p);
        let mut data = Vec::with_capacity(cards.iter().product());
        let mut od = Odometer::new(&cards, [sv]);
        while !od.done {
            data.push(self.data[base + od.offsets[0]]);
            od.advance();
        }
        Table { vars, cards, data }
    }

    /// Keeps the first `keep` states of `from` and calls the variable `to`.
    pub fn relabel(&self, from: usize, to: usize, keep: usize) -> Table {
        let Some(p) = self.pos(from) else {
            return self.clone();
        };
        let mut vars: Vec<usize> = self
            .vars
            .iter()
            .map(|&v| if v == from { to } else { v })
            .collect();
        let mut cards = self.cards.clone();
        cards[p] = keep;
        let st = self.strides();
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&k| vars[k]);
        let src_strides: Vec<usize> = order.iter().map(|&k| st[k]).collect();
        vars = order.iter().map(|&k| vars[k]).collect();
        cards = order.iter().map(|&k| cards[k]).collect();
        let mut data = Vec::with_capacity(cards.iter().product());
        let mut od = Odometer::new(&cards, [src_strides]);
        while !od.done {
            data.push(self.data[od.offsets[0]]);
            od.advance();
        }
        Table { vars, cards, data }
    }

    /// Compares a reference (`self`) with a candidate over the union scope.
    /// Candidate variables outside the reference scope are checked at every
    /// value.
    pub fn compare(&self, other: &Table) -> Comparison {
        let d = self.combine(other, |a, b| {
            if a.is_nan() || b.is_nan() {
                0.0
            } else {
                (a - b).abs()
            }
        });
        let max_diff = d.data.iter().cloned().fold(0.0, f64::max);
        let cover = self.combine(
            other,
            |a, b| {
                if a.is_nan() || !b.is_nan() {
                    1.0
                } else {
                    0.0
                }
            },
        );
        let extra: Vec<usize> = other
            .vars
            .iter()
            .copied()
            .filter(|v| self.pos(*v).is_none())
            .collect();
        let cover = cover.sum_out(&extra, |_| 1);
        Comparison {
            max_diff,
            uncovered: cover.data.iter().filter(|&&c| c == 0.0).count(),
        }
    }

    /// Largest difference, infinite if the candidate is undefined on a
    /// reference position for every value of its extra variables.
    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        let c = self.compare(other);
        if c.uncovered > 0 {
            f64::INFINITY
        } else {
            c.max_diff
        }
    }

    pub fn has_undefined(&self) -> bool {
        self.data.iter().any(|x| x.is_nan())
    }

    pub fn to_json(&self, names: impl Fn(usize) -> String) -> Value {
        json!({
            "vars": self.vars.iter().map(|&v| names(v)).collect::<Vec<_>>(),
            "cards": self.cards,
            "data": self.data,
        })
    }
}

/// Result of [`Table::compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// Largest difference where both sides are defined.
    pub max_diff: f64,
    /// Reference positions where the candidate is undefined throughout.
    pub uncovered: usize,
}

/// A discrete SCM over a labeled graph with one binary latent per
/// bidirected edge.
#[derive(Debug, Clone)]
pub struct DiscreteScm {
    graph: LabeledGraph,
    cards: Vec<usize>,
    /// Latent `k` has id `num_vertices + k` and confounds the pair.
    latents: Vec<(usize, usize)>,
    latent_priors: Vec<Table>,
    /// One table per observed vertex over the vertex, its parents and its
    /// latents. Empty for transportability vertices.
    cpts: Vec<Table>,
}

fn latent_pairs(g: &LabeledGraph) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for v in g.observed().iter() {
        for w in g.spouses(v).iter() {
            if v < w {
                out.push((v, w));
            }
        }
    }
    out
}

fn cardinalities(g: &LabeledGraph, card: usize) -> Vec<usize> {
    (0..g.num_vertices())
        .map(|v| match g.role(v) {
            Role::Ordinary => card,
            Role::Proxy => card + 1,
            _ => 2,
        })
        .collect()
}

/// Dirichlet(1) draw mixed with the uniform floor so every entry is at
/// least [`FLOOR`].
fn dirichlet_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = g.iter().sum();
    let mass = 1.0 - FLOOR * k as f64;
    g.into_iter().map(|x| FLOOR + mass * x / s).collect()
}

impl DiscreteScm {
    /// Random model; identical seeds give identical tables.
    pub fn sample(graph: &LabeledGraph, seed: u64, card: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cards = cardinalities(graph, card);
        let latents = latent_pairs(graph);
        let n = graph.num_vertices();
        let latent_priors = (0..latents.len())
            .map(|k| {
                let row = dirichlet_row(&mut rng, 2);
                Table {
                    vars: vec![n + k],
                    cards: vec![2],
                    data: row,
                }
            })
            .collect();
        let mut scm = DiscreteScm {
            graph: graph.clone(),
            cards,
            latents,
            latent_priors,
            cpts: Vec::new(),
        };
        let cpts = graph
            .observed()
            .iter()
            .map(|v| scm.sample_cpt(v, &mut rng))
            .collect();
        scm.cpts = cpts;
        scm
    }

    /// Model with given tables. `cpts[v]` must range over `v`, its parents
    /// and the latents returned by [`DiscreteScm::latents_of`], normalized
    /// over `v`; `priors[k]` is the distribution of latent `k`.
    pub fn from_cpts(
        graph: &LabeledGraph,
        card: usize,
        priors: Vec<Vec<f64>>,
        cpts: Vec<Table>,
    ) -> Result<Self, OracleError> {
        let cards = cardinalities(graph, card);
        let latents = latent_pairs(graph);
        let n = graph.num_vertices();
        if priors.len() != latents.len() {
            return Err(OracleError::BadTable("latent priors".into()));
        }
        let latent_priors = priors
            .into_iter()
            .enumerate()
            .map(|(k, p)| Table {
                vars: vec![n + k],
                cards: vec![p.len()],
                data: p,
            })
            .collect();
        let scm = DiscreteScm {
            graph: graph.clone(),
            cards,
            latents,
            latent_priors,
            cpts,
        };
        for v in graph.observed().iter() {
            if graph.role(v) == Role::Transportability {
                continue;
            }
            let mut scope = scm.scope_of(v);
            scope.sort_unstable();
            if scm.cpts.get(v).map(|t| t.vars.clone()) != Some(scope) {
                return Err(OracleError::BadTable(graph.name(v).to_string()));
            }
        }
        Ok(scm)
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn card(&self, v: usize) -> usize {
        if v < self.cards.len() {
            self.cards[v]
        } else {
            2
        }
    }

    /// Ids of the latents pointing into `v`.
    pub fn latents_of(&self, v: usize) -> Vec<usize> {
        let n = self.graph.num_vertices();
        self.latents
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| *a == v || *b == v)
            .map(|(k, _)| n + k)
            .collect()
    }

    fn scope_of(&self, v: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.graph.parents(v).iter().collect();
        s.extend(self.latents_of(v));
        s.push(v);
        s.sort_unstable();
        s
    }

    fn sample_cpt(&self, v: usize, rng: &mut ChaCha8Rng) -> Table {
        let g = &self.graph;
        match g.role(v) {
            Role::Transportability => return Table::scalar(1.0),
            Role::Proxy => {
                let t = g.true_of_proxy(v).expect("proxy without true variable");
                let r = g.indicator_of(t).expect("proxy without indicator");
                let na = self.cards[t];
                let vars = self.scope_of(v);
                let cards: Vec<usize> = vars.iter().map(|&u| self.card(u)).collect();
                let (pt, pr, pv) = (
                    vars.iter().position(|&u| u == t).unwrap(),
                    vars.iter().position(|&u| u == r).unwrap(),
                    vars.iter().position(|&u| u == v).unwrap(),
                );
                return Table::from_fn(vars, cards, |d| {
                    let want = if d[pr] == 1 { d[pt] } else { na };
                    if d[pv] == want {
                        1.0
                    } else {
                        0.0
                    }
                });
            }
            _ => {}
        }
        let vars = self.scope_of(v);
        let cards: Vec<usize> = vars.iter().map(|&u| self.card(u)).collect();
        let pv = vars.iter().position(|&u| u == v).unwrap();
        let kv = cards[pv];
        let n_rows: usize = cards.iter().product::<usize>() / kv;
        let rows: Vec<Vec<f64>> = (0..n_rows).map(|_| dirichlet_row(rng, kv)).collect();
        // row index = the flat index of the parent configuration
        let mut parent_strides = vec![0; vars.len()];
        let mut s = 1;
        for k in (0..vars.len()).rev() {
            if k != pv {
                parent_strides[k] = s;
                s *= cards[k];
            }
        }
        Table::from_fn(vars, cards, |d| {
            let row: usize = d.iter().zip(&parent_strides).map(|(x, s)| x * s).sum();
            rows[row][d[pv]]
        })
    }

    /// Free variables of a term as table scope: everything mentioned except
    /// fixed indicators and transportability/selection vertices.
    fn scope_of_term(&self, d: &Distribution) -> VarSet {
        d.free() - self.graph.transport() - self.graph.selection()
    }

    /// Exact `P(A | do(B), C)` with active indicators at 1, present
    /// transportability vertices at 1 and absent ones at 0, present selection
    /// vertices at 1 and absent ones marginalized. Undefined conditionals are
    /// NaN.
    pub fn eval_query(&self, d: &Distribution) -> Table {
        let g = &self.graph;
        let t_all = g.transport();
        let cut = d.b | t_all;
        let mentioned = d.a | d.c;
        let relevant = g.ancestors(mentioned, cut) & g.observed();
        let n = g.num_vertices();
        let mut factors: Vec<Table> = Vec::new();
        for v in (relevant - cut).iter() {
            factors.push(self.cpts[v].clone());
        }
        for (k, (a, b)) in self.latents.iter().enumerate() {
            let live = |x: usize| relevant.contains(x) && !cut.contains(x);
            if live(*a) || live(*b) {
                factors.push(self.latent_priors[k].clone());
            }
        }
        for t in t_all.iter() {
            let state = usize::from((d.b | d.c).contains(t));
            factors = factors.into_iter().map(|f| f.slice(t, state)).collect();
        }
        for k in 0..self.latents.len() {
            let u = n + k;
            let (with, without): (Vec<Table>, Vec<Table>) =
                factors.into_iter().partition(|f| f.pos(u).is_some());
            factors = without;
            if with.is_empty() {
                continue;
            }
            let prod = with
                .iter()
                .skip(1)
                .fold(with[0].clone(), |acc, f| acc.mul(f));
            factors.push(prod.sum_out(&[u], |_| 2));
        }
        let mut joint = factors.iter().fold(Table::scalar(1.0), |acc, f| acc.mul(f));
        let drop: Vec<usize> = joint
            .vars
            .iter()
            .copied()
            .filter(|&v| !(d.a | d.b | d.c).contains(v))
            .collect();
        joint = joint.sum_out(&drop, |v| self.card(v));
        let sel = g.selection() & d.c;
        let c_fixed = (d.r1 - d.a) | sel;
        for v in c_fixed.iter() {
            joint = joint.slice(v, 1);
        }
        let a_vars: Vec<usize> = d.a.iter().collect();
        let den = joint.sum_out(&a_vars, |v| self.card(v));
        for v in (d.r1 & d.a).iter() {
            joint = joint.slice(v, 1);
        }
        let out = joint.div(&den);
        debug_assert!(out.vars.iter().all(|v| self.scope_of_term(d).contains(*v)));
        out
    }

    /// Like [`DiscreteScm::eval_query`] but fails on undefined entries.
    pub fn eval_query_strict(&self, d: &Distribution) -> Result<Table, OracleError> {
        let t = self.eval_query(d);
        if t.has_undefined() {
            Err(OracleError::ZeroProbability)
        } else {
            Ok(t)
        }
    }

    /// Tables for each input term.
    pub fn input_tables(&self, inputs: &[Distribution]) -> Vec<Table> {
        inputs.iter().map(|d| self.eval_query(d)).collect()
    }

    pub fn to_json(&self) -> Value {
        let g = &self.graph;
        let n = g.num_vertices();
        let name = |v: usize| {
            if v < n {
                g.name(v).to_string()
            } else {
                let (a, b) = self.latents[v - n];
                format!("U[{},{}]", g.name(a), g.name(b))
            }
        };
        json!({
            "cards": g.observed().iter().map(|v| json!([g.name(v), self.cards[v]])).collect::<Vec<_>>(),
            "latents": self.latent_priors.iter().map(|t| t.to_json(name)).collect::<Vec<_>>(),
            "cpts": g.observed().iter().map(|v| json!([g.name(v), self.cpts[v].to_json(name)])).collect::<Vec<_>>(),
        })
    }
}

/// Evaluates an estimand on input tables.
pub fn eval_expression(
    e: &Expr,
    g: &LabeledGraph,
    inputs: &[Distribution],
    tables: &[Table],
    card: impl Fn(usize) -> usize + Copy,
) -> Result<Table, OracleError> {
    Ok(match e {
        Expr::Atom(a) => eval_atom(a, g, inputs, tables, card)?,
        Expr::Product(v) => {
            let mut acc = Table::scalar(1.0);
            for x in v {
                acc = acc.mul(&eval_expression(x, g, inputs, tables, card)?);
            }
            acc
        }
        Expr::Quotient { num, den, .. } => {
            let n = eval_expression(num, g, inputs, tables, card)?;
            let d = eval_expression(den, g, inputs, tables, card)?;
            n.div(&d)
        }
        Expr::Sum { over, body } => {
            let b = eval_expression(body, g, inputs, tables, card)?;
            let vars: Vec<usize> = over.iter().collect();
            b.sum_out(&vars, card)
        }
    })
}

/// An atom is its input viewed through marginalization, conditioning,
/// activation and proxy exchange.
fn eval_atom(
    a: &Atom,
    g: &LabeledGraph,
    inputs: &[Distribution],
    tables: &[Table],
    card: impl Fn(usize) -> usize + Copy,
) -> Result<Table, OracleError> {
    let src_term = inputs
        .get(a.input)
        .ok_or(OracleError::MissingTable(a.input))?;
    let mut t = tables
        .get(a.input)
        .ok_or(OracleError::MissingTable(a.input))?
        .clone();
    let src_vars = src_term.vars();
    let src = |v: usize| -> usize {
        if src_vars.contains(v) {
            v
        } else {
            g.proxy_of(v).filter(|p| src_vars.contains(*p)).unwrap_or(v)
        }
    };
    let map = |s: VarSet| -> VarSet { s.iter().map(src).collect() };
    let view = a.term;
    let left = map(view.a);
    let moved = map(view.c) & src_term.a;
    let drop: Vec<usize> = (src_term.a - left - moved).iter().collect();
    t = t.sum_out(&drop, card);
    let fresh = view.r1 - src_term.r1;
    for r in (fresh - view.a).iter() {
        t = t.slice(r, 1);
    }
    if !moved.is_empty() {
        let l: Vec<usize> = left.iter().collect();
        let den = t.sum_out(&l, card);
        for r in (fresh & view.a).iter() {
            t = t.slice(r, 1);
        }
        t = t.div(&den);
    } else {
        for r in (fresh & view.a).iter() {
            t = t.slice(r, 1);
        }
    }
    for v in view.vars().iter() {
        let s = src(v);
        if s != v {
            t = t.relabel(s, v, card(v));
        }
    }
    Ok(t)
}

/// Agreement of an estimand with the exact query over a range of models.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Verification {
    pub models: usize,
    /// Largest difference over all models, infinite when some defined
    /// reference entry has no defined counterpart.
    pub max_deviation: f64,
    pub worst_seed: u64,
}

/// Compares `e` with the exact value of `query` on models sampled with
/// seeds `seeds`.
pub fn verify_expression(
    e: &Expr,
    g: &LabeledGraph,
    inputs: &[Distribution],
    query: &Distribution,
    seeds: std::ops::Range<u64>,
    card: usize,
) -> Result<Verification, OracleError> {
    let mut v = Verification {
        models: 0,
        max_deviation: 0.0,
        worst_seed: seeds.start,
    };
    for seed in seeds {
        let m = DiscreteScm::sample(g, seed, card);
        let tables = m.input_tables(inputs);
        let got = eval_expression(e, g, inputs, &tables, |u| m.card(u))?;
        let d = m.eval_query(query).max_abs_diff(&got);
        v.models += 1;
        if d > v.max_deviation || d.is_nan() {
            v.max_deviation = if d.is_nan() { f64::INFINITY } else { d };
            v.worst_seed = seed;
        }
    }
    Ok(v)
}
