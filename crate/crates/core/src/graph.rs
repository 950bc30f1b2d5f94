//! Labeled semi-Markovian graphs, augmentation and m-separation.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::parser::{GraphSpec, MissingnessSpec};
use crate::varset::{VarSet, MAX_VERTICES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ordinary,
    Transportability,
    Selection,
    Proxy,
    ResponseIndicator,
    Intervention,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("the directed part of the graph has a cycle through {0}")]
    Cycle(String),
    #[error("selection vertex {0} has an outgoing edge to {1}")]
    SelectionNotSink(String, String),
    #[error("transportability vertex {0} has an incoming edge from {1}")]
    TransportNotRoot(String, String),
    #[error("missingness mechanism declared for special vertex {0}")]
    MissingnessOnSpecial(String),
    #[error("vertex {0} is declared both as transportability and selection vertex")]
    ConflictingRoles(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("proxy {0} clashes with an existing vertex name")]
    ProxyNameClash(String),
    #[error("graph needs {0} vertices after augmentation, at most {MAX_VERTICES} are supported")]
    TooLarge(usize),
    #[error("overlapping separation arguments")]
    Overlap,
}

/// The augmented graph. Vertex indices are fixed at build time.
///
/// Observed vertices come first, intervention vertices `I_v` follow. Every
/// non-proxy observed vertex `v` has an intervention vertex with the single
/// edge `I_v -> v`.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    names: Vec<String>,
    roles: Vec<Role>,
    parents: Vec<VarSet>,
    children: Vec<VarSet>,
    spouses: Vec<VarSet>,
    index: HashMap<String, usize>,
    proxy_of: Vec<Option<usize>>,
    true_of_proxy: Vec<Option<usize>>,
    indicator_of: Vec<Option<usize>>,
    true_of_indicator: Vec<Option<usize>>,
    intervention_of: Vec<Option<usize>>,
    n_observed: usize,
    observed: VarSet,
    proxies: VarSet,
    indicators: VarSet,
    md_trues: VarSet,
    transport: VarSet,
    selection: VarSet,
    intervenable: VarSet,
}

fn push_unique(order: &mut Vec<String>, n: &str) {
    if !order.iter().any(|m| m == n) {
        order.push(n.to_string());
    }
}

/// Assembles and augments the graph.
///
/// `extra_names` are vertices that only occur in terms; they become isolated
/// ordinary vertices. Vertex order: heads of directed edges, their tails,
/// endpoints of bidirected edges, isolated names, then `extra_names`;
/// mechanism variables are moved behind the fully observed ones as
/// `V, R_V` pairs in declaration order, followed by proxies, transportability
/// and selection vertices.
pub fn build_graph(
    g: &GraphSpec,
    m: &MissingnessSpec,
    transport: &[String],
    selection: &[String],
    extra_names: &[String],
) -> Result<LabeledGraph, GraphError> {
    let mut base: Vec<String> = Vec::new();
    for (_, h) in &g.directed_edges {
        push_unique(&mut base, h);
    }
    for (t, _) in &g.directed_edges {
        push_unique(&mut base, t);
    }
    for (a, b) in &g.bidirected_edges {
        push_unique(&mut base, a);
        push_unique(&mut base, b);
    }
    for n in &g.isolated_names {
        push_unique(&mut base, n);
    }
    for (r, v) in &m.mechanisms {
        push_unique(&mut base, v);
        push_unique(&mut base, r);
    }
    for n in transport.iter().chain(selection) {
        push_unique(&mut base, n);
    }
    for n in extra_names {
        if !n.ends_with('*') {
            push_unique(&mut base, n);
        }
    }
    for n in transport {
        if selection.contains(n) {
            return Err(GraphError::ConflictingRoles(n.clone()));
        }
    }
    for (r, v) in &m.mechanisms {
        for x in [r, v] {
            if transport.contains(x) || selection.contains(x) {
                return Err(GraphError::MissingnessOnSpecial(x.clone()));
            }
        }
    }
    let is_md = |n: &String| m.mechanisms.iter().any(|(r, v)| r == n || v == n);
    let mut order: Vec<String> = base
        .iter()
        .filter(|n| !is_md(n) && !transport.contains(n) && !selection.contains(n))
        .cloned()
        .collect();
    for (r, v) in &m.mechanisms {
        order.push(v.clone());
        order.push(r.clone());
    }
    let mut proxy_names = Vec::new();
    for (_, v) in &m.mechanisms {
        let p = format!("{}*", v);
        if base.contains(&p) {
            return Err(GraphError::ProxyNameClash(p));
        }
        proxy_names.push(p.clone());
        order.push(p);
    }
    order.extend(transport.iter().cloned());
    order.extend(selection.iter().cloned());
    let n_observed = order.len();
    let n_interv = n_observed - proxy_names.len();
    let total = n_observed + n_interv;
    if total > MAX_VERTICES {
        return Err(GraphError::TooLarge(total));
    }

    let index: HashMap<String, usize> = order
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let mut roles = vec![Role::Ordinary; total];
    let mut names = order.clone();
    let mut proxy_of = vec![None; total];
    let mut true_of_proxy = vec![None; total];
    let mut indicator_of = vec![None; total];
    let mut true_of_indicator = vec![None; total];
    let mut intervention_of = vec![None; total];
    let mut parents = vec![VarSet::EMPTY; total];
    let mut children = vec![VarSet::EMPTY; total];
    let mut spouses = vec![VarSet::EMPTY; total];

    let add_edge = |p: usize, c: usize, parents: &mut Vec<VarSet>, children: &mut Vec<VarSet>| {
        parents[c].insert(p);
        children[p].insert(c);
    };
    for (t, h) in &g.directed_edges {
        add_edge(index[t], index[h], &mut parents, &mut children);
    }
    for (a, b) in &g.bidirected_edges {
        let (a, b) = (index[a], index[b]);
        spouses[a].insert(b);
        spouses[b].insert(a);
    }
    for ((r, v), p) in m.mechanisms.iter().zip(&proxy_names) {
        let (r, v, p) = (index[r], index[v], index[p]);
        roles[r] = Role::ResponseIndicator;
        roles[p] = Role::Proxy;
        proxy_of[v] = Some(p);
        true_of_proxy[p] = Some(v);
        indicator_of[v] = Some(r);
        true_of_indicator[r] = Some(v);
        add_edge(v, p, &mut parents, &mut children);
        add_edge(r, p, &mut parents, &mut children);
    }
    for t in transport {
        roles[index[t]] = Role::Transportability;
    }
    for s in selection {
        roles[index[s]] = Role::Selection;
    }

    let mut next = n_observed;
    for v in 0..n_observed {
        if roles[v] == Role::Proxy {
            continue;
        }
        roles[next] = Role::Intervention;
        names.push(format!("I[{}]", order[v]));
        intervention_of[v] = Some(next);
        add_edge(next, v, &mut parents, &mut children);
        next += 1;
    }

    let mut gr = LabeledGraph {
        names,
        roles,
        parents,
        children,
        spouses,
        index,
        proxy_of,
        true_of_proxy,
        indicator_of,
        true_of_indicator,
        intervention_of,
        n_observed,
        observed: VarSet::full(n_observed),
        proxies: VarSet::EMPTY,
        indicators: VarSet::EMPTY,
        md_trues: VarSet::EMPTY,
        transport: VarSet::EMPTY,
        selection: VarSet::EMPTY,
        intervenable: VarSet::EMPTY,
    };
    for v in 0..n_observed {
        match gr.roles[v] {
            Role::Proxy => gr.proxies.insert(v),
            Role::ResponseIndicator => gr.indicators.insert(v),
            Role::Transportability => gr.transport.insert(v),
            Role::Selection => gr.selection.insert(v),
            _ => {}
        }
        if gr.proxy_of[v].is_some() {
            gr.md_trues.insert(v);
        }
    }
    gr.intervenable = gr.observed - gr.proxies;

    for s in gr.selection.iter() {
        if let Some(c) = (gr.children[s] & gr.observed).first() {
            return Err(GraphError::SelectionNotSink(
                gr.names[s].clone(),
                gr.names[c].clone(),
            ));
        }
    }
    for t in gr.transport.iter() {
        if let Some(p) = (gr.parents[t] & gr.observed).first() {
            return Err(GraphError::TransportNotRoot(
                gr.names[t].clone(),
                gr.names[p].clone(),
            ));
        }
        if let Some(p) = gr.spouses[t].first() {
            return Err(GraphError::TransportNotRoot(
                gr.names[t].clone(),
                gr.names[p].clone(),
            ));
        }
    }
    if let Some(v) = gr.find_cycle() {
        return Err(GraphError::Cycle(gr.names[v].clone()));
    }
    Ok(gr)
}

impl LabeledGraph {
    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    /// Vertices that are not intervention nodes.
    pub fn num_observed(&self) -> usize {
        self.n_observed
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn role(&self, v: usize) -> Role {
        self.roles[v]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn parents(&self, v: usize) -> VarSet {
        self.parents[v]
    }

    pub fn children(&self, v: usize) -> VarSet {
        self.children[v]
    }

    pub fn spouses(&self, v: usize) -> VarSet {
        self.spouses[v]
    }

    pub fn observed(&self) -> VarSet {
        self.observed
    }

    pub fn proxies(&self) -> VarSet {
        self.proxies
    }

    /// Response indicators of declared mechanisms.
    pub fn indicators(&self) -> VarSet {
        self.indicators
    }

    /// True variables with a declared mechanism.
    pub fn md_trues(&self) -> VarSet {
        self.md_trues
    }

    pub fn transport(&self) -> VarSet {
        self.transport
    }

    pub fn selection(&self) -> VarSet {
        self.selection
    }

    /// Observed vertices that own an intervention node.
    pub fn intervenable(&self) -> VarSet {
        self.intervenable
    }

    pub fn has_missingness(&self) -> bool {
        !self.proxies.is_empty()
    }

    pub fn proxy_of(&self, v: usize) -> Option<usize> {
        self.proxy_of[v]
    }

    pub fn true_of_proxy(&self, p: usize) -> Option<usize> {
        self.true_of_proxy[p]
    }

    pub fn indicator_of(&self, v: usize) -> Option<usize> {
        self.indicator_of[v]
    }

    pub fn true_of_indicator(&self, r: usize) -> Option<usize> {
        self.true_of_indicator[r]
    }

    pub fn intervention_of(&self, v: usize) -> Option<usize> {
        self.intervention_of[v]
    }

    /// `Z^(t->*)`: proxies of the mechanism variables in `z`.
    pub fn to_proxies(&self, z: VarSet) -> VarSet {
        (z & self.md_trues)
            .iter()
            .filter_map(|v| self.proxy_of[v])
            .collect()
    }

    /// `Z^(*->t)`: true variables of the proxies in `z`.
    pub fn to_trues(&self, z: VarSet) -> VarSet {
        (z & self.proxies)
            .iter()
            .filter_map(|p| self.true_of_proxy[p])
            .collect()
    }

    /// `R_Z`: indicators of the mechanism variables in `z`.
    pub fn indicators_of(&self, z: VarSet) -> VarSet {
        (z & self.md_trues)
            .iter()
            .filter_map(|v| self.indicator_of[v])
            .collect()
    }

    /// Indicators of the proxies in `z`.
    pub fn proxy_indicators(&self, z: VarSet) -> VarSet {
        self.indicators_of(self.to_trues(z))
    }

    /// `I_Z` for the intervenable members of `z`.
    pub fn interventions(&self, z: VarSet) -> VarSet {
        z.iter().filter_map(|v| self.intervention_of[v]).collect()
    }

    pub fn set_names(&self, s: VarSet) -> Vec<&str> {
        s.iter().map(|v| self.names[v].as_str()).collect()
    }

    fn find_cycle(&self) -> Option<usize> {
        // Kahn's algorithm; leftovers lie on or behind a cycle.
        let n = self.num_vertices();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for c in self.children[v].iter() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&v| indeg[v] > 0)
        }
    }

    /// Observed vertices in a topological order (parents first).
    pub fn topological_order(&self) -> Vec<usize> {
        let mut done = VarSet::EMPTY;
        let mut out = Vec::with_capacity(self.n_observed);
        while out.len() < self.n_observed {
            for v in 0..self.n_observed {
                if !done.contains(v) && (self.parents[v] & self.observed).is_subset(done) {
                    done.insert(v);
                    out.push(v);
                }
            }
        }
        out
    }

    /// Ancestors of `s` (including `s`) once edges into `cut` are removed.
    pub fn ancestors(&self, s: VarSet, cut: VarSet) -> VarSet {
        let mut an = s;
        let mut frontier = s;
        while let Some(v) = frontier.first() {
            frontier.remove(v);
            if cut.contains(v) {
                continue;
            }
            let new = self.parents[v] - an;
            an |= new;
            frontier |= new;
        }
        an
    }

    /// Checked variant of [`LabeledGraph::m_separated`].
    pub fn try_m_separated(
        &self,
        y: VarSet,
        z: VarSet,
        c: VarSet,
        cut: VarSet,
    ) -> Result<bool, GraphError> {
        if y.intersects(z) || y.intersects(c) || z.intersects(c) {
            return Err(GraphError::Overlap);
        }
        Ok(self.m_separated(y, z, c, cut))
    }

    /// `y ⫫ z | c` in the graph without edges into `cut`.
    ///
    /// Reachability over (vertex, direction) states: `up` means the walk
    /// entered through a tail from a child, `down` means it entered through
    /// an arrowhead.
    pub fn m_separated(&self, y: VarSet, z: VarSet, c: VarSet, cut: VarSet) -> bool {
        debug_assert!(y.is_disjoint(z) && y.is_disjoint(c) && z.is_disjoint(c));
        if y.is_empty() || z.is_empty() {
            return true;
        }
        let an = self.ancestors(c, cut);
        let mut vis_up = y;
        let mut vis_down = VarSet::EMPTY;
        let mut fu = y;
        let mut fd = VarSet::EMPTY;
        loop {
            if let Some(v) = fu.first() {
                fu.remove(v);
                if c.contains(v) {
                    continue;
                }
                let (pa, sp) = if cut.contains(v) {
                    (VarSet::EMPTY, VarSet::EMPTY)
                } else {
                    (self.parents[v], self.spouses[v] - cut)
                };
                let ch = self.children[v] - cut;
                let nu = pa - vis_up;
                vis_up |= nu;
                fu |= nu;
                let nd = (ch | sp) - vis_down;
                vis_down |= nd;
                fd |= nd;
            } else if let Some(v) = fd.first() {
                fd.remove(v);
                if !c.contains(v) {
                    let nd = (self.children[v] - cut) - vis_down;
                    vis_down |= nd;
                    fd |= nd;
                }
                if an.contains(v) && !cut.contains(v) {
                    let nu = self.parents[v] - vis_up;
                    vis_up |= nu;
                    fu |= nu;
                    let nd = (self.spouses[v] - cut) - vis_down;
                    vis_down |= nd;
                    fd |= nd;
                }
            } else {
                break;
            }
            if (vis_up | vis_down).intersects(z) {
                return false;
            }
        }
        true
    }

    /// Graphviz rendering of the augmented graph.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph G {\n");
        for v in 0..self.num_vertices() {
            let shape = match self.roles[v] {
                Role::Intervention => "box",
                Role::Proxy => "doublecircle",
                Role::Transportability | Role::Selection => "square",
                _ => "ellipse",
            };
            let _ = writeln!(
                s,
                "  v{} [label=\"{}\", shape={}];",
                v, self.names[v], shape
            );
        }
        for v in 0..self.num_vertices() {
            for c in self.children[v].iter() {
                let _ = writeln!(s, "  v{} -> v{};", v, c);
            }
            for w in self.spouses[v].iter().filter(|&w| w > v) {
                let _ = writeln!(s, "  v{} -> v{} [dir=both, style=dashed];", v, w);
            }
        }
        s.push_str("}\n");
        s
    }
}
