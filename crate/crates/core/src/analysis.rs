//! Systematic studies: the bivariate missingness enumeration, random
//! instances for benchmarking and rule ablation.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{RuleId, RuleSet};
use crate::instance::{Problem, ProblemError, ProblemText};
use crate::search::{run_search, SearchOptions, SearchStats, Verdict};

/// Edge universe of the bivariate graphs, in mask bit order.
pub const BIVARIATE_EDGES: [&str; 13] = [
    "x -> y",
    "x -> r_x",
    "x -> r_y",
    "y -> r_x",
    "y -> r_y",
    "r_x -> r_y",
    "r_y -> r_x",
    "x <-> y",
    "x <-> r_x",
    "x <-> r_y",
    "y <-> r_x",
    "y <-> r_y",
    "r_x <-> r_y",
];

pub const BIVARIATE_QUERIES: [&str; 5] = ["p(x,y)", "p(x)", "p(y)", "p(y|x)", "p(y|do(x))"];
pub const BIVARIATE_DATA: &str = "p(x*,y*,r_x,r_y)";
pub const BIVARIATE_MD: &str = "r_x : x, r_y : y";

const RXRY: u16 = 1 << 5 | 1 << 6;

/// Masks of all admissible bivariate graphs in ascending order; the position
/// in this list is the graph id.
pub fn bivariate_masks() -> Vec<u16> {
    (0u16..1 << 13).filter(|m| m & RXRY != RXRY).collect()
}

pub fn mask_edges(mask: u16) -> Vec<&'static str> {
    BIVARIATE_EDGES
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, e)| *e)
        .collect()
}

/// Inverse of [`mask_edges`]; `None` on an edge outside the universe.
pub fn edges_mask<S: AsRef<str>>(edges: &[S]) -> Option<u16> {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut m = 0u16;
    for e in edges {
        let i = BIVARIATE_EDGES
            .iter()
            .position(|b| *b == norm(e.as_ref()))?;
        m |= 1 << i;
    }
    Some(m)
}

/// Relabels x with y and r_x with r_y. Only meaningful without an x–y
/// directed edge.
pub fn swap_xy(mask: u16) -> u16 {
    const PERM: [usize; 13] = [0, 4, 3, 2, 1, 6, 5, 7, 11, 10, 9, 8, 12];
    (0..13)
        .filter(|i| mask >> i & 1 == 1)
        .fold(0, |m, i| m | 1 << PERM[i])
}

pub fn bivariate_problem(mask: u16, query: &str) -> ProblemText {
    ProblemText::new(BIVARIATE_DATA, query, &mask_edges(mask).join("\n")).missing_data(BIVARIATE_MD)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BivariateRecord {
    pub id: usize,
    pub mask: u16,
    pub has_x_to_y: bool,
    pub k: u32,
    pub edges: Vec<&'static str>,
    /// One verdict per entry of [`BIVARIATE_QUERIES`].
    pub identifiable: [bool; 5],
}

fn bivariate_record(id: usize, mask: u16) -> BivariateRecord {
    let mut identifiable = [false; 5];
    for (q, slot) in BIVARIATE_QUERIES.iter().zip(identifiable.iter_mut()) {
        let p = bivariate_problem(mask, q)
            .resolve()
            .expect("bivariate problems are well formed");
        *slot = run_search(&p.inputs, &p.query, &p.graph, &SearchOptions::default()).identifiable();
    }
    BivariateRecord {
        id,
        mask,
        has_x_to_y: mask & 1 == 1,
        k: mask.count_ones(),
        edges: mask_edges(mask),
        identifiable,
    }
}

/// Solves the five queries on every bivariate graph. Records come back in
/// id order.
pub fn enumerate_bivariate() -> Vec<BivariateRecord> {
    bivariate_masks()
        .into_par_iter()
        .enumerate()
        .map(|(id, m)| bivariate_record(id, m))
        .collect()
}

pub fn write_bivariate_csv<W: Write>(records: &[BivariateRecord], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["id", "mask", "has_x_to_y", "k", "edges"];
    header.extend(BIVARIATE_QUERIES);
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.id.to_string(),
            r.mask.to_string(),
            r.has_x_to_y.to_string(),
            r.k.to_string(),
            r.edges.join("; "),
        ];
        row.extend(r.identifiable.iter().map(|b| b.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct VennSummary {
    pub total: usize,
    pub with_x_to_y: usize,
    /// Identifiable count per query.
    pub identifiable: BTreeMap<String, usize>,
    /// Records per set of identifiable queries, keyed by the queries joined
    /// with " & " ("none" for the empty set). Split by presence of x -> y.
    pub regions_x_to_y: BTreeMap<String, usize>,
    pub regions_no_edge: BTreeMap<String, usize>,
}

pub fn venn_summary(records: &[BivariateRecord]) -> VennSummary {
    let mut s = VennSummary {
        total: records.len(),
        with_x_to_y: records.iter().filter(|r| r.has_x_to_y).count(),
        identifiable: BivariateRecord::query_names().map(|q| (q, 0)).collect(),
        regions_x_to_y: BTreeMap::new(),
        regions_no_edge: BTreeMap::new(),
    };
    for r in records {
        let ids: Vec<&str> = BIVARIATE_QUERIES
            .iter()
            .zip(r.identifiable)
            .filter(|(_, b)| *b)
            .map(|(q, _)| *q)
            .collect();
        for q in &ids {
            *s.identifiable.get_mut(*q).unwrap() += 1;
        }
        let key = if ids.is_empty() {
            "none".to_string()
        } else {
            ids.join(" & ")
        };
        let regions = if r.has_x_to_y {
            &mut s.regions_x_to_y
        } else {
            &mut s.regions_no_edge
        };
        *regions.entry(key).or_default() += 1;
    }
    s
}

impl BivariateRecord {
    fn query_names() -> impl Iterator<Item = String> {
        BIVARIATE_QUERIES.iter().map(|q| q.to_string())
    }

    pub fn verdict(&self, query: &str) -> Option<bool> {
        BIVARIATE_QUERIES
            .iter()
            .position(|q| *q == query)
            .map(|i| self.identifiable[i])
    }
}

/// A random graph over `x`, `y` and `z_1..z_{n-2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomGraph {
    pub names: Vec<String>,
    /// Pairs `(parent, child)` by index into `names`.
    pub directed: Vec<(usize, usize)>,
    pub bidirected: Vec<(usize, usize)>,
}

impl RandomGraph {
    pub fn text(&self) -> String {
        let d = self
            .directed
            .iter()
            .map(|&(a, b)| format!("{} -> {}", self.names[a], self.names[b]));
        let b = self
            .bidirected
            .iter()
            .map(|&(a, b)| format!("{} <-> {}", self.names[a], self.names[b]));
        d.chain(b).collect::<Vec<_>>().join("\n")
    }

    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.directed.iter().filter(|e| e.0 == v).map(|e| e.1));
        }
        false
    }
}

/// Edge probabilities of the random graphs.
pub const DIRECTED_PROB: f64 = 0.3;
pub const BIDIRECTED_PROB: f64 = 0.15;

pub fn vertex_names(n: usize) -> Vec<String> {
    let mut v = vec!["x".to_string(), "y".to_string()];
    v.extend((1..=n.saturating_sub(2)).map(|i| format!("z_{i}")));
    v
}

/// Random topological order followed by random lower triangular directed
/// and bidirected adjacency matrices.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> RandomGraph {
    let names = vertex_names(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(DIRECTED_PROB) {
                directed.push((order[j], order[i]));
            }
            if rng.gen_bool(BIDIRECTED_PROB) {
                bidirected.push((order[j], order[i]));
            }
        }
    }
    RandomGraph {
        names,
        directed,
        bidirected,
    }
}

/// A random term `p(A|do(B),C)` with disjoint `A`, `B`, `C` and `A`
/// non-empty, uniform over all such triples.
pub fn random_term<R: Rng>(rng: &mut R, names: &[String]) -> String {
    loop {
        let mut parts: [Vec<&str>; 3] = Default::default();
        for n in names {
            let k = rng.gen_range(0..4);
            if k < 3 {
                parts[k].push(n);
            }
        }
        if !parts[0].is_empty() {
            return term_text(&parts[0], &parts[1], &parts[2]);
        }
    }
}

pub fn term_text(a: &[&str], b: &[&str], c: &[&str]) -> String {
    let mut right = Vec::new();
    if !b.is_empty() {
        right.push(format!("do({})", b.join(",")));
    }
    right.extend(c.iter().map(|s| s.to_string()));
    if right.is_empty() {
        format!("p({})", a.join(","))
    } else {
        format!("p({}|{})", a.join(","), right.join(","))
    }
}

pub const INSTANCE_QUERY: &str = "p(y|do(x))";

/// Upper bound on the number of sampled inputs per instance.
pub const MAX_INPUTS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigStats {
    pub heuristic: bool,
    pub improvements: bool,
    pub verdict: Verdict,
    pub seconds: f64,
    #[serde(flatten)]
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub seed: u64,
    pub vertices: usize,
    pub graph: RandomGraph,
    pub inputs: Vec<String>,
    pub query: String,
    pub verdict: Verdict,
    pub configs: Vec<ConfigStats>,
}

impl InstanceRecord {
    pub fn problem(&self) -> ProblemText {
        ProblemText::new(&self.inputs.join("\n"), &self.query, &self.graph.text())
    }

    pub fn resolve(&self) -> Result<Problem, ProblemError> {
        self.problem().resolve()
    }
}

/// Last non-identifiable and first identifiable input sets of one random
/// graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstancePair {
    pub non_identifiable: InstanceRecord,
    pub identifiable: InstanceRecord,
}

fn solve_default(inputs: &[String], query: &str, graph: &str, budget: Option<Duration>) -> Verdict {
    let p = ProblemText::new(&inputs.join("\n"), query, graph)
        .resolve()
        .expect("generated problems are well formed");
    let opts = SearchOptions {
        time_budget: budget,
        ..SearchOptions::default()
    };
    run_search(&p.inputs, &p.query, &p.graph, &opts).verdict
}

/// Draws graphs until one has a directed path from x to y, then adds random
/// inputs one at a time until `p(y|do(x))` becomes identifiable. Attempts
/// where the very first input already identifies the query, or where no
/// identification happens within [`MAX_INPUTS`] inputs, are redrawn.
/// `budget` bounds each search; an indeterminate search also forces a redraw.
pub fn generate_instance(seed: u64, n: usize, budget: Option<Duration>) -> InstancePair {
    assert!(n >= 3, "instances need at least three vertices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'retry: loop {
        let g = random_graph(&mut rng, n);
        if !g.has_directed_path(0, 1) {
            continue;
        }
        let text = g.text();
        let mut inputs = Vec::new();
        while inputs.len() < MAX_INPUTS {
            inputs.push(random_term(&mut rng, &g.names));
            match solve_default(&inputs, INSTANCE_QUERY, &text, budget) {
                Verdict::NotIdentifiable => continue,
                Verdict::Indeterminate => continue 'retry,
                Verdict::Identifiable if inputs.len() == 1 => continue 'retry,
                Verdict::Identifiable => {
                    let rec = |inputs: Vec<String>, verdict| InstanceRecord {
                        seed,
                        vertices: n,
                        graph: g.clone(),
                        inputs,
                        query: INSTANCE_QUERY.to_string(),
                        verdict,
                        configs: Vec::new(),
                    };
                    let before = inputs[..inputs.len() - 1].to_vec();
                    return InstancePair {
                        non_identifiable: rec(before, Verdict::NotIdentifiable),
                        identifiable: rec(inputs, Verdict::Identifiable),
                    };
                }
            }
        }
    }
}

/// Runs the four heuristic × improvements configurations.
pub fn benchmark_instance(rec: &mut InstanceRecord, budget: Option<Duration>) {
    let p = rec.resolve().expect("generated problems are well formed");
    rec.configs.clear();
    for (heuristic, improvements) in [(false, false), (true, false), (false, true), (true, true)] {
        let mut opts = SearchOptions::default().heuristic(heuristic);
        if !improvements {
            opts = opts.without_improvements(false);
        }
        opts.time_budget = budget;
        let r = run_search(&p.inputs, &p.query, &p.graph, &opts);
        rec.configs.push(ConfigStats {
            heuristic,
            improvements,
            verdict: r.verdict,
            seconds: r.stats.elapsed.as_secs_f64(),
            stats: r.stats,
        });
    }
}

/// Instance pairs for seeds `first..first + count`, in seed order.
pub fn simulate(
    first: u64,
    count: usize,
    n: usize,
    budget: Option<Duration>,
    bench: bool,
) -> Vec<InstancePair> {
    (first..first + count as u64)
        .into_par_iter()
        .map(|seed| {
            let mut pair = generate_instance(seed, n, budget);
            if bench {
                benchmark_instance(&mut pair.non_identifiable, budget);
                benchmark_instance(&mut pair.identifiable, budget);
            }
            pair
        })
        .collect()
}

/// Verdict of the default search with `rule` removed from the rule set.
pub fn run_ablation(problem: &Problem, rule: Option<RuleId>) -> Verdict {
    let missing = problem.graph.has_missingness();
    let mut rules = RuleSet::default_for(missing);
    if let Some(r) = rule {
        rules.remove(r);
    }
    let opts = SearchOptions::default().rules(rules);
    run_search(&problem.inputs, &problem.query, &problem.graph, &opts).verdict
}
