//! Forward search over the rule closure.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{
    Candidate, DerivationNode, Distribution, DistributionStore, Engine, NodeId, Rejection,
    Requirement, RuleId, RuleSet,
};
use crate::graph::LabeledGraph;
use crate::varset::VarSet;

/// Order in which rules are tried when a term is expanded.
pub const DEFAULT_RULE_ORDER: [RuleId; 18] = [
    RuleId::R9Minus,
    RuleId::R9Plus,
    RuleId::R4,
    RuleId::R5,
    RuleId::R7Minus,
    RuleId::R7Plus,
    RuleId::R2Minus,
    RuleId::R2Plus,
    RuleId::R3Minus,
    RuleId::R3Plus,
    RuleId::R6Minus,
    RuleId::R6Plus,
    RuleId::R8Minus,
    RuleId::R8Plus,
    RuleId::R10Minus,
    RuleId::R10Plus,
    RuleId::R1Minus,
    RuleId::R1Plus,
];

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// `None` picks the default: on unless the graph has missingness.
    pub heuristic: Option<bool>,
    /// `None` picks [`RuleSet::default_for`].
    pub rules: Option<RuleSet>,
    /// Skip rule applications whose termination condition holds.
    pub termination_checks: bool,
    pub find_all_paths: bool,
    pub time_budget: Option<Duration>,
    pub trace: bool,
    pub rule_order: Vec<RuleId>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            heuristic: None,
            rules: None,
            termination_checks: true,
            find_all_paths: false,
            time_budget: None,
            trace: false,
            rule_order: DEFAULT_RULE_ORDER.to_vec(),
        }
    }
}

impl SearchOptions {
    pub fn heuristic(mut self, on: bool) -> Self {
        self.heuristic = Some(on);
        self
    }

    pub fn rules(mut self, r: RuleSet) -> Self {
        self.rules = Some(r);
        self
    }

    /// Turns off the search-space reductions: rules 1± are added and the
    /// termination checks are skipped.
    pub fn without_improvements(mut self, missing: bool) -> Self {
        let base = self.rules.unwrap_or_else(|| RuleSet::default_for(missing));
        self.rules = Some(base.with(RuleId::R1Plus).with(RuleId::R1Minus));
        self.termination_checks = false;
        self
    }

    pub fn find_all_paths(mut self, on: bool) -> Self {
        self.find_all_paths = on;
        self
    }

    pub fn time_budget(mut self, d: Duration) -> Self {
        self.time_budget = Some(d);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identifiable,
    NotIdentifiable,
    /// The time budget ran out before a proof or a refutation.
    Indeterminate,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub derived: usize,
    pub expanded: usize,
    pub attempts: usize,
    pub separation_checks: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub verdict: Verdict,
    /// Store index of the target when identifiable.
    pub target: Option<NodeId>,
    pub store: DistributionStore,
    pub stats: SearchStats,
    /// Decided by the left-side coverage test alone.
    pub trivially_nonidentifiable: bool,
    /// Further derivations of the target found with `find_all_paths`.
    pub alternatives: Vec<DerivationNode>,
    pub trace: Vec<String>,
}

impl SearchResult {
    pub fn identifiable(&self) -> bool {
        self.verdict == Verdict::Identifiable
    }
}

/// True when some target variable occurs on no input's left side, even
/// through a proxy.
pub fn trivially_nonidentifiable(
    inputs: &[Distribution],
    query: &Distribution,
    g: &LabeledGraph,
) -> bool {
    let mut cover = VarSet::EMPTY;
    for d in inputs {
        cover |= d.a | g.to_trues(d.a);
    }
    !query.a.is_subset(cover)
}

/// Closeness of `source` to `target`; larger is closer.
pub fn proximity(target: &Distribution, source: &Distribution) -> i32 {
    let n = |s: VarSet| s.len() as i32;
    let (t, s) = (target, source);
    10 * n(t.a & s.a) + 5 * n(t.b & s.b) + 3 * n(t.c & s.c)
        - 2 * n(t.a - s.a)
        - 2 * n(t.b - s.b)
        - 2 * n(s.b - t.b)
        - n(t.c - s.c)
        - n(s.c - t.c)
}

enum Frontier {
    Fifo(usize),
    Heap(BinaryHeap<(i32, Reverse<NodeId>)>),
}

impl Frontier {
    fn push(&mut self, id: NodeId, h: i32) {
        if let Frontier::Heap(q) = self {
            q.push((h, Reverse(id)));
        }
    }

    fn pop(&mut self, store: &DistributionStore) -> Option<NodeId> {
        match self {
            Frontier::Fifo(next) => {
                if *next < store.len() {
                    *next += 1;
                    Some((*next - 1) as NodeId)
                } else {
                    None
                }
            }
            Frontier::Heap(q) => q.pop().map(|(_, Reverse(i))| i),
        }
    }
}

struct Searcher<'a> {
    engine: Engine<'a>,
    opts: &'a SearchOptions,
    rules: RuleSet,
    target: Distribution,
    store: DistributionStore,
    stats: SearchStats,
    alternatives: Vec<DerivationNode>,
    trace: Vec<String>,
    found: Option<NodeId>,
}

/// Runs the search for `query` from `inputs`.
pub fn run_search(
    inputs: &[Distribution],
    query: &Distribution,
    g: &LabeledGraph,
    opts: &SearchOptions,
) -> SearchResult {
    let start = Instant::now();
    let missing = g.has_missingness();
    let heuristic = opts.heuristic.unwrap_or(!missing) && !missing;
    let rules = opts.rules.unwrap_or_else(|| RuleSet::default_for(missing));
    let mut s = Searcher {
        engine: Engine::new(g),
        opts,
        rules,
        target: *query,
        store: DistributionStore::new(),
        stats: SearchStats::default(),
        alternatives: Vec::new(),
        trace: Vec::new(),
        found: None,
    };
    for (i, d) in inputs.iter().enumerate() {
        s.store.insert_input(*d, i);
    }
    if let Some(i) = s.store.get(query) {
        s.found = Some(i);
        return s.finish(Verdict::Identifiable, false, start);
    }
    if trivially_nonidentifiable(inputs, query, g) {
        return s.finish(Verdict::NotIdentifiable, true, start);
    }
    let mut frontier = if heuristic {
        let mut q = BinaryHeap::new();
        for i in 0..s.store.len() as NodeId {
            q.push((proximity(query, &s.store.node(i).dist), Reverse(i)));
        }
        Frontier::Heap(q)
    } else {
        Frontier::Fifo(0)
    };
    let deadline = opts.time_budget.map(|b| start + b);
    while let Some(id) = frontier.pop(&s.store) {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return s.finish(Verdict::Indeterminate, false, start);
            }
        }
        let before = s.store.len();
        let done = s.expand(id, deadline);
        if heuristic {
            for j in before..s.store.len() {
                let j = j as NodeId;
                frontier.push(j, proximity(query, &s.store.node(j).dist));
            }
        }
        match done {
            Expansion::Continue => {}
            Expansion::Found => return s.finish(Verdict::Identifiable, false, start),
            Expansion::OutOfTime => return s.finish(Verdict::Indeterminate, false, start),
        }
    }
    let v = if s.found.is_some() {
        Verdict::Identifiable
    } else {
        Verdict::NotIdentifiable
    };
    s.finish(v, false, start)
}

enum Expansion {
    Continue,
    Found,
    OutOfTime,
}

impl<'a> Searcher<'a> {
    fn finish(mut self, verdict: Verdict, trivial: bool, start: Instant) -> SearchResult {
        self.stats.elapsed = start.elapsed();
        self.stats.derived = self
            .store
            .nodes()
            .iter()
            .filter(|n| n.input.is_none())
            .count();
        SearchResult {
            verdict,
            target: self.found.filter(|_| verdict == Verdict::Identifiable),
            store: self.store,
            stats: self.stats,
            trivially_nonidentifiable: trivial,
            alternatives: self.alternatives,
            trace: self.trace,
        }
    }

    fn expand(&mut self, id: NodeId, deadline: Option<Instant>) -> Expansion {
        let d = self.store.node(id).dist;
        self.store.node_mut(id).expanded = true;
        self.stats.expanded += 1;
        if self.opts.trace {
            self.trace
                .push(format!("expand #{id} {}", d.display(self.engine.g)));
        }
        let opts = self.opts;
        for &rule in &opts.rule_order {
            if !self.rules.contains(rule) {
                continue;
            }
            if opts.termination_checks && !self.engine.termination_applicable(&d, rule) {
                continue;
            }
            let mut result = Expansion::Continue;
            let engine = &self.engine;
            let mut tick = 0u32;
            engine.for_each_subset(&d, rule, |z| {
                engine.apply(&d, rule, z, |cand| {
                    tick = tick.wrapping_add(1);
                    if tick.is_multiple_of(4096) {
                        if let Some(dl) = deadline {
                            if Instant::now() >= dl {
                                result = Expansion::OutOfTime;
                                return false;
                            }
                        }
                    }
                    match Self::consider(
                        engine,
                        &mut self.store,
                        &mut self.stats,
                        &mut self.alternatives,
                        &self.target,
                        opts.find_all_paths,
                        id,
                        &cand,
                    ) {
                        Some(found) => {
                            if self.found.is_none() {
                                self.found = Some(found);
                            }
                            if opts.trace {
                                self.trace.push(format!(
                                    "  {} z={:?} -> {}",
                                    rule,
                                    engine.g.set_names(z),
                                    cand.output.display(engine.g)
                                ));
                            }
                            if !opts.find_all_paths {
                                result = Expansion::Found;
                                return false;
                            }
                            true
                        }
                        None => true,
                    }
                })
            });
            if !matches!(result, Expansion::Continue) {
                return result;
            }
        }
        Expansion::Continue
    }

    /// Returns the target index when `cand` derives the target.
    #[allow(clippy::too_many_arguments)]
    fn consider(
        engine: &Engine<'_>,
        store: &mut DistributionStore,
        stats: &mut SearchStats,
        alternatives: &mut Vec<DerivationNode>,
        target: &Distribution,
        find_all: bool,
        parent: NodeId,
        cand: &Candidate,
    ) -> Option<NodeId> {
        stats.attempts += 1;
        let is_target = cand.output == *target;
        if store.contains(&cand.output) && !(find_all && is_target) {
            return None;
        }
        if matches!(cand.requirement, Requirement::Separation { .. }) {
            stats.separation_checks += 1;
        }
        let second = match engine.check(cand, store) {
            Ok(p) => p,
            Err(Rejection::SeparationFailed)
            | Err(Rejection::MissingSecondInput)
            | Err(Rejection::InvariantWouldBreak) => return None,
        };
        if let Some(existing) = store.get(&cand.output) {
            alternatives.push(DerivationNode {
                dist: cand.output,
                rule: cand.rule,
                z: cand.z,
                parents: [Some(parent), second],
                expanded: false,
                order: store.len() as u32,
                input: None,
            });
            return Some(existing);
        }
        let (id, _) =
            store.canonical_insert(cand.output, cand.rule, cand.z, [Some(parent), second]);
        if is_target {
            Some(id)
        } else {
            None
        }
    }
}

/// The part of the derivation DAG needed for one node.
#[derive(Debug, Clone, Serialize)]
pub struct Derivation {
    /// Nodes in ascending store order; the last one is the target.
    pub nodes: Vec<DerivationStep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivationStep {
    pub id: NodeId,
    pub term: String,
    pub rule: String,
    pub z: Vec<String>,
    pub parents: Vec<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<usize>,
}

/// Collects the ancestors of `target` in the store.
pub fn backtrack_derivation(
    store: &DistributionStore,
    target: NodeId,
    g: &LabeledGraph,
) -> Derivation {
    let mut seen = vec![false; store.len()];
    let mut stack = vec![target];
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut seen[i as usize], true) {
            continue;
        }
        for p in store.node(i).parents.iter().flatten() {
            stack.push(*p);
        }
    }
    let nodes = (0..store.len())
        .filter(|&i| seen[i])
        .map(|i| {
            let n = store.node(i as NodeId);
            DerivationStep {
                id: i as NodeId,
                term: n.dist.display(g),
                rule: n.rule.label().to_string(),
                z: g.set_names(n.z).into_iter().map(String::from).collect(),
                parents: n.parents.iter().flatten().copied().collect(),
                input: n.input,
            }
        })
        .collect();
    Derivation { nodes }
}

impl Derivation {
    pub fn leaves(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.parents.is_empty())
            .map(|n| n.id)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph derivation {\n");
        for n in &self.nodes {
            s.push_str(&format!(
                "  n{} [label=\"{}\"{}];\n",
                n.id,
                n.term.replace('"', "\\\""),
                if n.input.is_some() { ", shape=box" } else { "" }
            ));
        }
        for n in &self.nodes {
            for p in &n.parents {
                let z = if n.z.is_empty() {
                    String::new()
                } else {
                    format!(" {{{}}}", n.z.join(","))
                };
                s.push_str(&format!(
                    "  n{} -> n{} [label=\"{}{}\"];\n",
                    p, n.id, n.rule, z
                ));
            }
        }
        s.push_str("}\n");
        s
    }
}
