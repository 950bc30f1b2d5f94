//! Acceptance criteria. Every test prints one `[PASS]`/`[FAIL]` line for its
//! criterion, followed by indented details.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use idsearch::analysis::{
    self, bivariate_masks, bivariate_problem, edges_mask, enumerate_bivariate, generate_instance,
    random_graph, run_ablation, swap_xy, InstancePair, BIVARIATE_QUERIES,
};
use idsearch::engine::RuleId;
use idsearch::formula::{
    build_expression, canonical_form, render_latex, FormulaError, RenderOptions, SumScope,
    MAX_EXPR_SIZE,
};
use idsearch::instance::{Problem, ProblemText};
use idsearch::oracle::{DiscreteScm, Table};
use idsearch::search::{run_search, SearchOptions, Verdict};
use idsearch::{RuleSet, VarSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const TOL: f64 = 1e-9;

/// Writes past the test harness capture so the lines show in plain runs.
fn report(id: &str, title: &str, pass: bool, details: &[String]) {
    let mut s = format!("[{}] {id}. {title}\n", if pass { "PASS" } else { "FAIL" });
    for d in details {
        s.push_str(&format!("       {d}\n"));
    }
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes()).expect("stdout");
    out.flush().expect("stdout");
}

/// Worked examples whose reference formula groups the estimand differently
/// from ours; numerically equal, not symbolically.
const KNOWN_SYMBOLIC: [&str; 2] = ["two outcomes a", "two outcomes b"];

#[test]
fn c1_worked_formulas() {
    let mut details = Vec::new();
    let mut symbolic_misses = Vec::new();
    let mut hard_fail = false;
    for c in worked_examples() {
        let p = c.problem().resolve().unwrap();
        let t = Instant::now();
        let (r, e) = solve(&p, &SearchOptions::default().heuristic(c.heuristic));
        let elapsed = t.elapsed();
        let Some(e) = e else {
            details.push(format!("{}: not identified ({:?})", c.name, r.verdict));
            hard_fail = true;
            continue;
        };
        let latex = render_latex(&e, &p.graph, &RenderOptions::default());
        let got = canonical_form(&latex, SumScope::NextTerm).expect("own output parses");
        let want = canonical_form(c.expected, c.scope).expect("reference formula parses");
        let symbolic = got == want;
        let v = check(&p, &e, 0..20);
        let numeric = v.max_deviation < TOL;
        let fast = elapsed < Duration::from_secs(5);
        if !symbolic {
            symbolic_misses.push(c.name);
        }
        hard_fail |= !numeric || !fast;
        details.push(format!(
            "{}: symbolic {}, numeric max dev {:.1e} over {} models, {:.3} s",
            c.name,
            if symbolic { "match" } else { "MISMATCH" },
            v.max_deviation,
            v.models,
            elapsed.as_secs_f64()
        ));
        if !symbolic {
            details.push(format!("  ours:      {latex}"));
        }
    }
    let pass = !hard_fail && symbolic_misses.is_empty();
    if !symbolic_misses.is_empty() {
        details.push(format!(
            "symbolic mismatches (numerically equal): {symbolic_misses:?}"
        ));
    }
    report("1", "worked-formula regression", pass, &details);
    assert!(!hard_fail);
    for m in &symbolic_misses {
        assert!(
            KNOWN_SYMBOLIC.contains(m),
            "unexpected symbolic mismatch {m}"
        );
    }
}

fn bow_models(p: &Problem) -> (DiscreteScm, DiscreteScm) {
    let g = &p.graph;
    let x = g.index_of("x").unwrap();
    let y = g.index_of("y").unwrap();
    let u = g.num_vertices();
    // P(u) = 0.5, P(x = u) = 0.9; intervention vertices are uniform and ignored
    let table = |v: usize, f: &dyn Fn(usize, usize, usize, usize) -> f64| {
        let mut vars: Vec<usize> = g.parents(v).iter().collect();
        if v == x || v == y {
            vars.push(u);
        }
        vars.push(v);
        vars.sort_unstable();
        let at = |d: &[usize], w: usize| vars.iter().position(|&z| z == w).map_or(0, |i| d[i]);
        Table::from_fn(vars.clone(), vec![2; vars.len()], |d| {
            f(at(d, v), at(d, x), at(d, y), at(d, u))
        })
    };
    let px = |_: usize, xv: usize, _: usize, uv: usize| if xv == uv { 0.9 } else { 0.1 };
    let uniform = |_: usize, _: usize, _: usize, _: usize| 0.5;
    // model a: y ignores the confounder
    let ya = |_: usize, xv: usize, yv: usize, _: usize| if yv == xv { 0.8 } else { 0.2 };
    // model b: same observational joint, y leans on the confounder
    let yb = |_: usize, xv: usize, yv: usize, uv: usize| {
        let p_same = if uv == xv { 0.88 } else { 0.08 };
        if yv == xv {
            p_same
        } else {
            1.0 - p_same
        }
    };
    let mk = |fy: &dyn Fn(usize, usize, usize, usize) -> f64| {
        let cpts = (0..g.num_observed())
            .map(|v| {
                if v == x {
                    table(v, &px)
                } else if v == y {
                    table(v, fy)
                } else {
                    table(v, &uniform)
                }
            })
            .collect();
        DiscreteScm::from_cpts(g, 2, vec![vec![0.5, 0.5]], cpts).unwrap()
    };
    (mk(&ya), mk(&yb))
}

#[test]
fn c2_nonidentifiability() {
    let mut details = Vec::new();
    let hr = ProblemText::new("p(y,b,e,x)\np(a,b,x)", "p(y,b,e,x,a)", HR)
        .resolve()
        .unwrap();
    let (r, _) = solve(&hr, &SearchOptions::default());
    let hr_ok = r.verdict == Verdict::NotIdentifiable;
    details.push(format!("HR joint p(y,b,e,x,a): {:?}", r.verdict));

    let bow = ProblemText::new("p(x,y)", "p(y|do(x))", "x -> y\nx <-> y")
        .resolve()
        .unwrap();
    let (r, _) = solve(&bow, &SearchOptions::default());
    let bow_ok = r.verdict == Verdict::NotIdentifiable;
    details.push(format!("bow p(y|do(x)) from p(x,y): {:?}", r.verdict));
    let (a, b) = bow_models(&bow);
    let joint = bow.inputs[0];
    let same = a.eval_query(&joint).max_abs_diff(&b.eval_query(&joint));
    let apart = a
        .eval_query(&bow.query)
        .max_abs_diff(&b.eval_query(&bow.query));
    let witness_ok = same < TOL && apart > 0.05;
    details.push(format!(
        "two-model witness: |Δ p(x,y)| = {same:.1e}, |Δ p(y|do(x))| = {apart:.3}"
    ));
    let pass = hr_ok && bow_ok && witness_ok;
    report("2", "non-identifiability regressions", pass, &details);
    assert!(pass);
}

pub const NECESSITY_GRAPH: &str = "x_1 -> z_1\nx_1 -> z_2\nx_2 -> z_1\nx_2 -> z_2\nz_1 -> y\nz_2 -> y\nz_1 -> w\nz_2 -> w\nx_1 -> w\nx_2 -> w";
pub const NECESSITY_DATA: &str = "p(w|do(x_2),y,x_1)\np(y|do(x_2),z_1,z_2,x_1)\np(x_1|do(x_2),w)\np(z_2,x_2|do(x_1))\np(z_1|do(x_1,y),x_2)";

#[test]
fn c3_rule_necessity() {
    let t = Instant::now();
    let p = ProblemText::new(NECESSITY_DATA, "p(y,x_1|do(x_2),w)", NECESSITY_GRAPH)
        .resolve()
        .unwrap();
    let mut details = Vec::new();
    let full = run_ablation(&p, None);
    details.push(format!("all rules: {full:?}"));
    let mut pass = full == Verdict::Identifiable;
    for r in ["2+", "2-", "3+", "3-", "4", "5", "6+", "6-"] {
        let v = run_ablation(&p, Some(r.parse::<RuleId>().unwrap()));
        pass &= v == Verdict::NotIdentifiable;
        details.push(format!("without {r}: {v:?}"));
    }
    let v = run_ablation(&p, Some(RuleId::R1Plus));
    details.push(format!("without 1+ (not in the default set): {v:?}"));
    pass &= v == Verdict::Identifiable;
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    details.push(format!("total {:.3} s", elapsed.as_secs_f64()));
    report("3", "rule necessity", pass, &details);
    assert!(pass);
}

const JOINT_AND_EFFECT_5: [&str; 5] = [
    "r_x -> r_y",
    "x -> r_y",
    "x -> y",
    "x <-> r_y",
    "r_x <-> r_y",
];
const MARGINALS_ONLY_5: [&str; 5] = [
    "r_y -> r_x",
    "x -> y",
    "x <-> y",
    "y <-> r_x",
    "r_x <-> r_y",
];

#[test]
fn c4_bivariate_enumeration() {
    let t = Instant::now();
    let recs = enumerate_bivariate();
    let elapsed = t.elapsed();
    let mut details = Vec::new();
    let mut pass = true;
    let with_edge = recs.iter().filter(|r| r.has_x_to_y).count();
    let counts_ok = recs.len() == 6144 && with_edge == 3072;
    pass &= counts_ok;
    details.push(format!("{} graphs, {} with x -> y", recs.len(), with_edge));

    let q = |name: &str| BIVARIATE_QUERIES.iter().position(|x| *x == name).unwrap();
    // y -> x never occurs in the universe, so every record qualifies
    let max_k = |qi: usize| {
        recs.iter()
            .filter(|r| r.identifiable[qi])
            .map(|r| r.k)
            .max()
            .unwrap_or(0)
    };
    for (name, bound) in [("p(x,y)", 5), ("p(x)", 9), ("p(y)", 8), ("p(y|x)", 8)] {
        let m = max_k(q(name));
        let ok = m == bound;
        pass &= ok;
        details.push(format!(
            "{name}: largest identifiable K = {m} (expected {bound})"
        ));
    }

    let joint_and_effect: Vec<_> = recs
        .iter()
        .filter(|r| {
            r.has_x_to_y
                && r.k == 5
                && r.identifiable[q("p(x,y)")]
                && r.identifiable[q("p(y|do(x))")]
        })
        .collect();
    let joint_and_effect_ok = joint_and_effect.len() == 1
        && Some(joint_and_effect[0].mask) == edges_mask(&JOINT_AND_EFFECT_5);
    pass &= joint_and_effect_ok;
    details.push(format!(
        "p(x,y) and p(y|do(x)) with 5 edges: {} graph(s) {:?}",
        joint_and_effect.len(),
        joint_and_effect
            .iter()
            .map(|r| r.edges.join(", "))
            .collect::<Vec<_>>()
    ));

    let marginals_only = |k: u32| {
        recs.iter()
            .filter(|r| {
                r.k == k
                    && r.identifiable[q("p(x)")]
                    && r.identifiable[q("p(y)")]
                    && !r.identifiable[q("p(x,y)")]
                    && !r.identifiable[q("p(y|do(x))")]
            })
            .collect::<Vec<_>>()
    };
    let five = marginals_only(5);
    let more: usize = (6..=12).map(|k| marginals_only(k).len()).sum();
    let marginals_only_ok =
        five.len() == 1 && Some(five[0].mask) == edges_mask(&MARGINALS_ONLY_5) && more == 0;
    pass &= marginals_only_ok;
    details.push(format!(
        "p(x), p(y) but not p(x,y), p(y|do(x)): {} five-edge graph(s) {:?}, {} larger",
        five.len(),
        five.iter().map(|r| r.edges.join(", ")).collect::<Vec<_>>(),
        more
    ));

    let venn_bad = recs
        .iter()
        .filter(|r| {
            r.identifiable[q("p(x,y)")]
                != (r.identifiable[q("p(x)")] && r.identifiable[q("p(y|x)")])
        })
        .count();
    pass &= venn_bad == 0;
    details.push(format!("venn consistency violations: {venn_bad}"));

    let masks = bivariate_masks();
    let sym_bad = recs
        .iter()
        .filter(|r| !r.has_x_to_y)
        .filter(|r| {
            let o = &recs[masks.binary_search(&swap_xy(r.mask)).unwrap()];
            o.identifiable[q("p(x)")] != r.identifiable[q("p(y)")]
        })
        .count();
    pass &= sym_bad == 0;
    details.push(format!("x/y symmetry violations: {sym_bad}"));

    pass &= elapsed < Duration::from_secs(30 * 60);
    details.push(format!("enumeration {:.1} s", elapsed.as_secs_f64()));
    report("4", "bivariate missingness enumeration", pass, &details);
    assert!(pass);
}

const MD_CONFOUNDED_XY: &str = "r_y -> r_x\nx -> r_y\ny -> r_x\nx -> y\nx <-> y";
const MD_CONFOUNDED_X_RY: &str = "r_y -> r_x\nx -> r_y\ny -> r_x\nx -> y\nx <-> r_y";
const MD_X_DRIVES_RX: &str = "r_x -> r_y\nx -> r_x\nx -> y\nx <-> y";

/// Largest deviation of `lhs` from `rhs(tables)` over 20 models; the terms
/// are evaluated exactly in each model.
fn identity_dev(
    graph: &str,
    lhs: &str,
    terms: &[&str],
    rhs: impl Fn(&Problem, &DiscreteScm, &[Table]) -> Table,
) -> f64 {
    let p = ProblemText::new(&terms.join("\n"), lhs, graph)
        .missing_data("r_x : x, r_y : y")
        .resolve()
        .unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let m = DiscreteScm::sample(&p.graph, seed, 2);
        let tabs: Vec<Table> = p.inputs.iter().map(|d| m.eval_query(d)).collect();
        let got = rhs(&p, &m, &tabs);
        worst = worst.max(m.eval_query(&p.query).max_abs_diff(&got));
    }
    worst
}

fn ratio_form(p: &Problem, m: &DiscreteScm, t: &[Table]) -> Table {
    let y = p.graph.index_of("y").unwrap();
    let num = t[0].mul(&t[1]);
    num.div(&num.sum_out(&[y], |v| m.card(v)))
}

#[test]
fn c5_missing_data_identities() {
    let mut details = Vec::new();
    let mut pass = true;
    let ratio_terms = ["p(y|r_y = 1)", "p(x|y,r_x = 1,r_y = 1)"];
    for (name, graph, query) in [
        ("confounded x,y: p(y|x)", MD_CONFOUNDED_XY, "p(y|x)"),
        ("confounded x,r_y: p(y|x)", MD_CONFOUNDED_X_RY, "p(y|x)"),
        (
            "confounded x,r_y: p(y|do(x))",
            MD_CONFOUNDED_X_RY,
            "p(y|do(x))",
        ),
    ] {
        let d = identity_dev(graph, query, &ratio_terms, ratio_form);
        pass &= d < TOL;
        details.push(format!("{name} = ratio form over y: max dev {d:.1e}"));
    }
    let d = identity_dev(
        MD_X_DRIVES_RX,
        "p(y)",
        &["p(y|x*,r_x,r_y = 1)", "p(x*,r_x)"],
        |p, m, t| {
            let xs = p.graph.index_of("x*").unwrap();
            let rx = p.graph.index_of("r_x").unwrap();
            t[0].mul(&t[1]).sum_out(&[xs, rx], |v| m.card(v))
        },
    );
    pass &= d < TOL;
    details.push(format!(
        "x -> r_x: p(y) = sum over r_x, x* including the missing stratum: max dev {d:.1e}"
    ));
    let d = identity_dev(
        MD_X_DRIVES_RX,
        "p(y|x)",
        &["p(y|x,r_x = 1,r_y = 1)"],
        |_, _, t| t[0].clone(),
    );
    pass &= d < TOL;
    details.push(format!(
        "x -> r_x: p(y|x) = p(y|x,r_x = 1,r_y = 1): max dev {d:.1e}"
    ));

    for (name, graph, query) in [
        ("confounded x,y", MD_CONFOUNDED_XY, "p(y|x)"),
        ("confounded x,r_y", MD_CONFOUNDED_X_RY, "p(y|do(x))"),
        ("x -> r_x", MD_X_DRIVES_RX, "p(y)"),
    ] {
        let p = ProblemText::new(analysis::BIVARIATE_DATA, query, graph)
            .missing_data(analysis::BIVARIATE_MD)
            .resolve()
            .unwrap();
        let (r, e) = solve(&p, &SearchOptions::default());
        let dev = e.as_ref().map(|e| check(&p, e, 0..20).max_deviation);
        let ok = r.identifiable() && dev.is_some_and(|d| d < TOL);
        pass &= ok;
        details.push(format!(
            "{name} {query} found by search: {:?}, estimand max dev {:?}",
            r.verdict, dev
        ));
    }
    report("5", "missing-data identities", pass, &details);
    assert!(pass);
}

/// Random term with `y` never on the left.
fn term_without_y<R: Rng>(rng: &mut R, names: &[String]) -> String {
    loop {
        let mut parts: [Vec<&str>; 3] = Default::default();
        for n in names {
            let k = rng.gen_range(0..4);
            if k < 3 {
                parts[k].push(n);
            }
        }
        if !parts[0].is_empty() && !parts[0].contains(&"y") {
            return analysis::term_text(&parts[0], &parts[1], &parts[2]);
        }
    }
}

#[test]
fn c6_fast_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    let t = Instant::now();
    for _ in 0..1000 {
        let g = random_graph(&mut rng, 10);
        let k = rng.gen_range(1..=5);
        let inputs: Vec<String> = (0..k).map(|_| term_without_y(&mut rng, &g.names)).collect();
        let p = ProblemText::new(&inputs.join("\n"), "p(y|do(x))", &g.text())
            .resolve()
            .unwrap();
        let (r, _) = solve(&p, &SearchOptions::default());
        if r.verdict != Verdict::NotIdentifiable
            || r.stats.attempts != 0
            || !r.trivially_nonidentifiable
        {
            bad += 1;
        }
    }
    let pass = bad == 0;
    report(
        "6",
        "early non-identifiability",
        pass,
        &[format!(
            "1000 instances, {bad} needed rule applications, {:.2} s",
            t.elapsed().as_secs_f64()
        )],
    );
    assert!(pass);
}

fn pairs(first: u64, count: u64, n: usize) -> Vec<InstancePair> {
    (first..first + count)
        .map(|s| generate_instance(s, n, None))
        .collect()
}

#[test]
fn c7a_heuristic_agreement() {
    let mut disagree = Vec::new();
    let mut unsound = 0;
    let mut checked = 0;
    for pair in pairs(0, 100, 6) {
        for rec in [&pair.non_identifiable, &pair.identifiable] {
            let p = rec.resolve().unwrap();
            let (on, e) = solve(&p, &SearchOptions::default().heuristic(true));
            let (off, _) = solve(&p, &SearchOptions::default().heuristic(false));
            if on.verdict != off.verdict || on.verdict != rec.verdict {
                disagree.push(rec.seed);
            }
            if let Some(e) = e {
                checked += 1;
                if check(&p, &e, 0..3).max_deviation >= TOL {
                    unsound += 1;
                }
            }
        }
    }
    let pass = disagree.is_empty() && unsound == 0;
    report(
        "7a",
        "heuristic on/off verdict agreement",
        pass,
        &[
            format!("200 random 6-vertex instances, disagreements at seeds {disagree:?}"),
            format!("{checked} estimands checked on 3 models, {unsound} unsound"),
        ],
    );
    assert!(pass);
}

const ORDER4: [&str; 4] = ["z", "x", "w", "y"];

/// Every 4-vertex graph with vertices in `ORDER4` topological order.
fn graphs4() -> impl Iterator<Item = String> {
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    (0u32..1 << 12).map(move |m| {
        let mut lines: Vec<String> = ORDER4.iter().map(|s| s.to_string()).collect();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if m >> k & 1 == 1 {
                lines.push(format!("{} -> {}", ORDER4[i], ORDER4[j]));
            }
            if m >> (k + 6) & 1 == 1 {
                lines.push(format!("{} <-> {}", ORDER4[i], ORDER4[j]));
            }
        }
        lines.join("\n")
    })
}

const INPUTS4: [&str; 2] = ["p(x,y,z,w)", "p(y,w|do(x))\np(x,z)"];

#[test]
fn c7b_termination_and_rule1_closure() {
    let mut term_bad = 0;
    let mut rule1_bad = 0;
    let mut total = 0;
    let base = SearchOptions::default().heuristic(false);
    let mut no_term = base.clone();
    no_term.termination_checks = false;
    let with_rule1 = base.clone().rules(
        RuleSet::default_for(false)
            .with(RuleId::R1Plus)
            .with(RuleId::R1Minus),
    );
    for g in graphs4() {
        for data in INPUTS4 {
            let p = ProblemText::new(data, "p(y|do(x))", &g).resolve().unwrap();
            let c = closure(&p, &base);
            total += 1;
            if closure(&p, &no_term) != c {
                term_bad += 1;
            }
            if closure(&p, &with_rule1) != c {
                rule1_bad += 1;
            }
        }
    }
    let pass_t = term_bad == 0;
    let pass_1 = rule1_bad == 0;
    report(
        "7b",
        "termination pruning leaves the closure unchanged",
        pass_t,
        &[format!(
            "{total} exhaustive 4-vertex instances, {term_bad} differ"
        )],
    );
    report(
        "7c",
        "rules 1± add nothing to the closure",
        pass_1,
        &[format!(
            "{total} exhaustive 4-vertex instances, {rule1_bad} differ"
        )],
    );
    assert!(pass_t && pass_1);
}

#[test]
fn c7d_m_separation_brute_force() {
    let t = Instant::now();
    let mut graphs = 0u64;
    let mut queries = 0u64;
    let mut bad = 0u64;
    for n in 2..=5usize {
        let names: Vec<String> = (0..n).map(|i| format!("v_{i}")).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
        let slots = 2 * pairs.len();
        for m in 0u32..1 << slots {
            if m.count_ones() > 8 {
                continue;
            }
            let mut lines = names.clone();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if m >> k & 1 == 1 {
                    lines.push(format!("{} -> {}", names[i], names[j]));
                }
                if m >> (k + pairs.len()) & 1 == 1 {
                    lines.push(format!("{} <-> {}", names[i], names[j]));
                }
            }
            let term = format!("p({})", names[0]);
            let p = ProblemText::new(&term, &term, &lines.join("\n"))
                .resolve()
                .unwrap();
            let g = &p.graph;
            let ix: Vec<usize> = names.iter().map(|s| g.index_of(s).unwrap()).collect();
            graphs += 1;
            for &(i, j) in &pairs {
                let (a, b) = (VarSet::singleton(ix[i]), VarSet::singleton(ix[j]));
                let rest: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
                for cm in 0u32..1 << rest.len() {
                    let c: VarSet = rest
                        .iter()
                        .enumerate()
                        .filter(|(bit, _)| cm >> bit & 1 == 1)
                        .map(|(_, &k)| ix[k])
                        .collect();
                    queries += 1;
                    if g.m_separated(a, b, c, VarSet::EMPTY)
                        != brute_m_separated(g, a, b, c, VarSet::EMPTY)
                    {
                        bad += 1;
                    }
                }
            }
        }
    }
    let pass = bad == 0;
    report(
        "7d",
        "m-separation agrees with path enumeration",
        pass,
        &[format!(
            "{graphs} graphs on 2-5 vertices with at most 8 edges, {queries} statements, {bad} disagreements, {:.1} s",
            t.elapsed().as_secs_f64()
        )],
    );
    assert!(pass);
}

#[test]
fn c7e_oracle_soundness() {
    let mut details = Vec::new();
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut note = |label: &str, n: usize, w: f64| {
        details.push(format!("{label}: {n} estimands, max dev {w:.1e}"));
    };
    // worked examples and the rule-necessity instance
    let mut w = 0.0f64;
    let mut n = 0;
    let mut problems: Vec<(Problem, bool)> = worked_examples()
        .iter()
        .map(|c| (c.problem().resolve().unwrap(), c.heuristic))
        .collect();
    problems.push((
        ProblemText::new(NECESSITY_DATA, "p(y,x_1|do(x_2),w)", NECESSITY_GRAPH)
            .resolve()
            .unwrap(),
        true,
    ));
    for (p, h) in &problems {
        if let (_, Some(e)) = solve(p, &SearchOptions::default().heuristic(*h)) {
            w = w.max(check(p, &e, 0..20).max_deviation);
            n += 1;
        }
    }
    note("worked examples, 20 models", n, w);
    checked += n;
    worst = worst.max(w);

    // a stride through the bivariate records
    let masks = bivariate_masks();
    let (mut w, mut n) = (0.0f64, 0);
    'outer: for (i, &m) in masks.iter().enumerate().step_by(7) {
        for q in BIVARIATE_QUERIES {
            let p = bivariate_problem(m, q).resolve().unwrap();
            if let (_, Some(e)) = solve(&p, &SearchOptions::default()) {
                w = w.max(check(&p, &e, i as u64..i as u64 + 5).max_deviation);
                n += 1;
                if n == 200 {
                    break 'outer;
                }
            }
        }
    }
    note("bivariate records, 5 models", n, w);
    checked += n;
    worst = worst.max(w);

    // random instances, including the heuristic-off and basic configurations
    let (mut w, mut n) = (0.0f64, 0);
    for pair in pairs(1000, 40, 6) {
        let p = pair.identifiable.resolve().unwrap();
        for o in [
            SearchOptions::default(),
            SearchOptions::default().heuristic(false),
            SearchOptions::default().without_improvements(false),
        ] {
            if let (_, Some(e)) = solve(&p, &o) {
                w = w.max(check(&p, &e, 0..3).max_deviation);
                n += 1;
            }
        }
    }
    note(
        "random 6-vertex instances, 3 configurations, 3 models",
        n,
        w,
    );
    checked += n;
    worst = worst.max(w);

    let pass = worst < TOL && checked > 0;
    report("7e", "end-to-end oracle soundness", pass, &details);
    assert!(pass);
}

#[test]
fn c8_completeness() {
    let names = ["v_0", "v_1", "v_2", "v_3"];
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let mut instances = 0;
    let mut id_bad = 0;
    let mut closure_bad = 0;
    let mut identifiable = 0;
    let exhaustive = SearchOptions::default()
        .heuristic(false)
        .without_improvements(false);
    for dm in 0u32..1 << 6 {
        for bm in 0u32..1 << 6 {
            if bm.count_ones() > 3 {
                continue;
            }
            let mut dir = [0u32; 4];
            let mut bi = [0u32; 4];
            let mut lines: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if dm >> k & 1 == 1 {
                    dir[i] |= 1 << j;
                    lines.push(format!("{} -> {}", names[i], names[j]));
                }
                if bm >> k & 1 == 1 {
                    bi[i] |= 1 << j;
                    bi[j] |= 1 << i;
                    lines.push(format!("{} <-> {}", names[i], names[j]));
                }
            }
            let graph = lines.join("\n");
            for x in 0..4 {
                for y in 0..4 {
                    if x == y {
                        continue;
                    }
                    let q = format!("p({}|do({}))", names[y], names[x]);
                    let p = ProblemText::new("p(v_0,v_1,v_2,v_3)", &q, &graph)
                        .resolve()
                        .unwrap();
                    let (r, _) = solve(&p, &SearchOptions::default());
                    let (full, _) = solve(&p, &exhaustive);
                    let expected = id_identifiable(4, &dir, &bi, 1 << y, 1 << x);
                    instances += 1;
                    identifiable += expected as usize;
                    if r.identifiable() != expected {
                        id_bad += 1;
                    }
                    if full.identifiable() != r.identifiable() {
                        closure_bad += 1;
                    }
                }
            }
        }
    }
    let pass = id_bad == 0 && closure_bad == 0;
    report(
        "8",
        "completeness spot-check",
        pass,
        &[
            format!("{instances} instances ({identifiable} identifiable by the recursive district algorithm)"),
            format!("{id_bad} disagree with the district algorithm, {closure_bad} with the exhaustive closure"),
        ],
    );
    assert!(pass);
}

#[test]
fn c9_scale() {
    let mut details = Vec::new();
    let mut pass = true;
    let mut oversized = 0;
    let mut solve_timed = |rec: &analysis::InstanceRecord| {
        let p = rec.resolve().unwrap();
        let t = Instant::now();
        let r = run_search(&p.inputs, &p.query, &p.graph, &SearchOptions::default());
        let elapsed = t.elapsed();
        if let Some(target) = r.target {
            match build_expression(&r.store, target, &p.graph) {
                Ok(_) => {}
                Err(FormulaError::TooLarge(_)) => oversized += 1,
                Err(e) => panic!("estimand for seed {}: {e}", rec.seed),
            }
        }
        (r.verdict, elapsed)
    };
    let mut slowest = Duration::ZERO;
    let mut wrong = 0;
    for pair in pairs(0, 100, 7) {
        for rec in [&pair.non_identifiable, &pair.identifiable] {
            let (v, d) = solve_timed(rec);
            slowest = slowest.max(d);
            wrong += (v != rec.verdict) as usize;
        }
    }
    pass &= slowest < Duration::from_secs(60) && wrong == 0;
    details.push(format!(
        "200 random 7-vertex instances: slowest {:.3} s, {wrong} verdict changes",
        slowest.as_secs_f64()
    ));

    let fixture: Vec<InstancePair> =
        serde_json::from_str(include_str!("fixtures/instances_10.json")).expect("fixture parses");
    let mut slowest = Duration::ZERO;
    let mut wrong = 0;
    let mut n = 0;
    for pair in &fixture {
        for rec in [&pair.non_identifiable, &pair.identifiable] {
            let (v, d) = solve_timed(rec);
            slowest = slowest.max(d);
            wrong += (v != rec.verdict) as usize;
            n += 1;
        }
    }
    let smallest = fixture
        .iter()
        .min_by_key(|p| p.identifiable.inputs.len())
        .unwrap();
    let regenerated = generate_instance(smallest.identifiable.seed, 10, None);
    let same = regenerated.identifiable.inputs == smallest.identifiable.inputs;
    pass &= slowest < Duration::from_secs(600) && wrong == 0 && n == 40 && same;
    details.push(format!(
        "{n} stored 10-vertex instances (20 graphs): slowest {:.3} s, {wrong} verdict changes, regeneration {}",
        slowest.as_secs_f64(),
        if same { "matches" } else { "DIFFERS" }
    ));
    details.push(format!(
        "{oversized} estimand(s) above {MAX_EXPR_SIZE} nodes, not materialized"
    ));
    report("9", "scale", pass, &details);
    assert!(pass);
}
