#![allow(dead_code)]

use idsearch::formula::SumScope;
use idsearch::instance::ProblemText;

/// A worked example with its reference formula.
/// Typeset formulas whose sum reach is ambiguous carry explicit grouping
/// around the summed factors, chosen so the query variables stay free.
pub struct Case {
    pub name: &'static str,
    pub data: &'static str,
    pub query: &'static str,
    pub graph: &'static str,
    pub transport: &'static str,
    pub selection: &'static str,
    pub missing: &'static str,
    pub heuristic: bool,
    pub expected: &'static str,
    pub scope: SumScope,
}

impl Case {
    pub fn problem(&self) -> ProblemText {
        ProblemText::new(self.data, self.query, self.graph)
            .transportability(self.transport)
            .selection_bias(self.selection)
            .missing_data(self.missing)
    }
}

pub const BACKDOOR: &str = "x -> y\nz -> x\nz -> y";
pub const HR: &str = "e -> x\ne -> y\na -> b\na -> x\nx -> b\nx -> y\nb -> y";
pub const TWO_OUTCOMES_A: &str = "z -> y_1\nw -> y_1\ny_1 -> y_2\nx_2 -> z\nx_1 -> w\ny_1 <-> x_1\ny_1 <-> y_2\ny_2 <-> z\ny_1 <-> w\ny_2 <-> w";
pub const TWO_OUTCOMES_A_DATA: &str = "p(x_1,y_1,x_2,y_2,z,w)\np(y_1,y_2|z,w,x_2,do(x_1))\np(y_2|y_1,z,w,x_2,do(x_1))\np(w|do(x_1,x_2))\np(z|do(x_2))";
pub const TWO_OUTCOMES_B: &str = "y_2 -> y_1\nw -> y_1\nx_1 -> x_2\nx_1 -> y_2\nz -> y_2\nw -> y_2\nx_2 -> w\nx_1 <-> y_1\nx_1 <-> y_2\ny_1 <-> z\nx_2 <-> z";
pub const TWO_OUTCOMES_B_DATA: &str = "p(x_1,y_1,x_2,y_2,z,w)\np(y_1,y_2|w,x_1,x_2,do(z))\np(y_1|y_2,w,z,x_2,do(x_1))\np(y_2|x_1,w,x_2,do(z))\np(x_2,w|do(x_1))\np(x_2|do(x_1,w))\np(y_2|z,w,x_2,do(x_1))";
pub const TRANSPORT_SELECTION: &str = "x -> z\nz -> y\nx -> s\nt -> z\nx <-> y";
pub const TWO_SELECTIONS: &str =
    "w_1 -> w_2\nz -> w_2\nx -> y\nz -> y\nz -> s_2\nw_1 -> x\nw_2 -> x\nw_1 -> s_1";
pub const CASE_CONTROL: &str = "x -> y\ny -> r_y\nr_y -> r_x";
pub const FRONT_DOOR_MISSING: &str = "x -> z\nz -> y\ny -> r_y\nx <-> y\nr_y -> r_x\nr_y -> r_z\nr_y <-> r_x\nr_y <-> r_z\nr_z <-> r_x";

const fn case(
    name: &'static str,
    data: &'static str,
    query: &'static str,
    graph: &'static str,
    heuristic: bool,
    expected: &'static str,
    scope: SumScope,
) -> Case {
    Case {
        name,
        data,
        query,
        graph,
        transport: "",
        selection: "",
        missing: "",
        heuristic,
        expected,
        scope,
    }
}

pub fn worked_examples() -> Vec<Case> {
    use SumScope::*;
    let md_b = "r_x : x, r_y : y, r_z : z";
    let fd = "p(x*,y*,z*,r_x,r_y,r_z)\np(y)";
    vec![
        case(
            "back-door",
            "p(x,y,z)",
            "p(y|do(x))",
            BACKDOOR,
            true,
            r"\sum_{Z} P(Y { \, | \, } X,Z)P(Z)",
            RestOfProduct,
        ),
        case(
            "hedge-free HR",
            "p(y,b,e,x)\np(a,b,x)",
            "p(y|do(x))",
            HR,
            true,
            r"\sum_{B,A}P(A)P(B { \, | \, } X,A)\sum_{E} P(E)P(Y|X,B,E)",
            RestOfProduct,
        ),
        case(
            "two outcomes a",
            TWO_OUTCOMES_A_DATA,
            "p(y_1,y_2|do(x_1,x_2))",
            TWO_OUTCOMES_A,
            true,
            r"\sum_{z,w}\left(p(y_1,y_2|do(x_1),z,w,x_2)\left(p(z|do(x_2))p(w|do(x_2,x_1))\right)\right)",
            NextTerm,
        ),
        case(
            "two outcomes b",
            TWO_OUTCOMES_B_DATA,
            "p(y_1,y_2|do(x_1,x_2))",
            TWO_OUTCOMES_B,
            true,
            r"\sum_{w}\left(p(w|do(x_1),x_2)\sum_{x_2}\left(p(x_2|do(w,x_1))\frac{\sum_{z}\left(p(x_2,w,z|x_1)p(y_1,y_2|do(x_1),x_2,w,z)\right)}{\sum_{y_1,y_2} \sum_{z}\left(p(x_2,w,z|x_1)p(y_1,y_2|do(x_1),x_2,w,z)\right)}\right)\right)",
            NextTerm,
        ),
        case(
            "two outcomes b heuristic off",
            TWO_OUTCOMES_B_DATA,
            "p(y_1,y_2|do(x_1,x_2))",
            TWO_OUTCOMES_B,
            false,
            r"\sum_{W,Z} \left(P(Z)P(W { \, | \, } X_2,X_1,Z) \sum_{X_2} P(X_2 { \, | \, } X_1,Z) \left(\sum_{Y_2} P(Y_2 { \, | \, } \textrm{do}(X_1),X_2,W,Z) P(Y_1 { \, | \, } \textrm{do}(X_1),X_2,Y_2,W,Z)\right) \frac{P(Y_2 { \, | \, } \textrm{do}(X_1),X_2,W,Z)P(Y_1 { \, | \, } \textrm{do}(X_1),X_2,Y_2,W,Z)}{\sum_{Y^\prime_2} P(Y^\prime_2 { \, | \, } \textrm{do}(X_1),X_2,W,Z)P(Y_1 { \, | \, } \textrm{do}(X_1),X_2,Y^\prime_2,W,Z)} \right)",
            RestOfProduct,
        ),
        Case {
            transport: "t",
            selection: "s",
            ..case(
                "transport+selection",
                "p(x,z,y|s)\np(y,z|t,do(x))",
                "p(y|do(x))",
                TRANSPORT_SELECTION,
                true,
                r"\sum_{z}\left(p(y|do(x),z,t)\sum_{y}p(z,y|x,s)\right)",
                NextTerm,
            )
        },
        Case {
            selection: "s_1, s_2",
            ..case(
                "two selection biases",
                "p(x,y,z,w_1,w_2|s_1,s_2)\np(z|s_1)",
                "p(y|do(x))",
                TWO_SELECTIONS,
                false,
                r"\sum_{z}\left(p(z|s_1)p(y|w_2,x,w_1,z,s_1,s_2)\right)",
                NextTerm,
            )
        },
        Case {
            missing: "r_x : x, r_y : y",
            ..case(
                "case-control",
                "p(x*,y*,r_x,r_y)\np(y)",
                "p(y|do(x))",
                CASE_CONTROL,
                false,
                r"\frac{P(Y)P(X { \, | \, } Y, R_Y=1, R_X=1)}{\sum_{Y^\prime} P(Y^\prime)P(X { \, | \, } Y^\prime, R_Y=1, R_X = 1)}",
                RestOfProduct,
            )
        },
        Case {
            missing: md_b,
            ..case(
                "front-door case-control",
                fd,
                "p(y|do(x))",
                FRONT_DOOR_MISSING,
                false,
                r"\sum_Z \left[ \frac{\sum_{Y^\prime} P(Y^\prime)P(X,Z { \, | \, } Y^\prime,R_X = 1, R_Y = 1, R_Z = 1)}{\sum_{Z^\prime,Y^\prime} P(Y^\prime)P(X,Z^\prime { \, | \, } Y^\prime,R_X = 1, R_Y = 1, R_Z = 1)}\, \right. \times \sum_{X^\prime} \left( \left(\sum_{Y^\prime,Z^\prime} P(Y^\prime)P(X^\prime,Z^\prime { \, | \, } Y^\prime,R_X = 1, R_Y = 1, R_Z = 1)\right)\, \right. \times \left. \left. \frac{P(Y)P(X^\prime,Z { \, | \, } Y, R_X = 1, R_Y = 1,R_Z = 1)}{\sum_{Y^\prime} P(Y^\prime)P(X^\prime,Z { \, | \, } Y^\prime,R_X = 1,R_Y = 1,R_Z = 1)} \vphantom{\sum_{Z^\prime}}\right) \right]",
                RestOfProduct,
            )
        },
        Case {
            missing: md_b,
            ..case(
                "front-door p(z|x)",
                fd,
                "p(z|x)",
                FRONT_DOOR_MISSING,
                false,
                r"\frac{\sum_{y}\left(p(y)p(x,z|r_x = 1,y,r_y = 1,r_z = 1)\right)}{\sum_{z} \sum_{y}\left(p(y)p(x,z|r_x = 1,y,r_y = 1,r_z = 1)\right)}",
                NextTerm,
            )
        },
        Case {
            missing: md_b,
            ..case(
                "front-door p(x)",
                fd,
                "p(x)",
                FRONT_DOOR_MISSING,
                false,
                r"\sum_{y,z}\left(p(y)p(x,z|r_x = 1,y,r_y = 1,r_z = 1)\right)",
                NextTerm,
            )
        },
        Case {
            missing: md_b,
            ..case(
                "front-door p(y|x,z)",
                fd,
                "p(y|x,z)",
                FRONT_DOOR_MISSING,
                false,
                r"\frac{\left(p(y)p(x,z|r_x = 1,y,r_y = 1,r_z = 1)\right)}{\sum_{y} \left(p(y)p(x,z|r_x = 1,y,r_y = 1,r_z = 1)\right)}",
                NextTerm,
            )
        },
    ]
}

pub use helpers::*;

mod helpers {
    use std::collections::BTreeSet;

    use idsearch::engine::Distribution;
    use idsearch::formula::{build_expression, Expr};
    use idsearch::instance::Problem;
    use idsearch::oracle::{verify_expression, Verification};
    use idsearch::search::{run_search, SearchOptions, SearchResult};
    use idsearch::{LabeledGraph, VarSet};

    pub fn solve(p: &Problem, opts: &SearchOptions) -> (SearchResult, Option<Expr>) {
        let r = run_search(&p.inputs, &p.query, &p.graph, opts);
        let e = r
            .target
            .map(|t| build_expression(&r.store, t, &p.graph).expect("estimand builds"));
        (r, e)
    }

    pub fn check(p: &Problem, e: &Expr, seeds: std::ops::Range<u64>) -> Verification {
        verify_expression(e, &p.graph, &p.inputs, &p.query, seeds, 2).expect("oracle evaluates")
    }

    /// Every distribution reachable from the inputs.
    pub fn closure(p: &Problem, opts: &SearchOptions) -> BTreeSet<Distribution> {
        let o = opts.clone().find_all_paths(true);
        let r = run_search(&p.inputs, &p.query, &p.graph, &o);
        r.store.nodes().iter().map(|n| n.dist).collect()
    }

    /// Separation by enumerating simple paths in the graph without edges
    /// into `cut`. Slow and obviously correct.
    pub fn brute_m_separated(
        g: &LabeledGraph,
        y: VarSet,
        z: VarSet,
        c: VarSet,
        cut: VarSet,
    ) -> bool {
        let n = g.num_vertices();
        // (neighbor, arrowhead at current end, arrowhead at neighbor end)
        let mut adj: Vec<Vec<(usize, bool, bool)>> = vec![Vec::new(); n];
        for v in 0..n {
            for w in g.children(v).iter() {
                if !cut.contains(w) {
                    adj[v].push((w, false, true));
                    adj[w].push((v, true, false));
                }
            }
            for w in g.spouses(v).iter() {
                if v < w && !cut.contains(v) && !cut.contains(w) {
                    adj[v].push((w, true, true));
                    adj[w].push((v, true, true));
                }
            }
        }
        let mut an = c;
        loop {
            let mut next = an;
            for v in an.iter() {
                if !cut.contains(v) {
                    next |= g.parents(v);
                }
            }
            if next == an {
                break;
            }
            an = next;
        }
        fn walk(
            v: usize,
            into_v: bool,
            path: &mut Vec<usize>,
            adj: &[Vec<(usize, bool, bool)>],
            z: VarSet,
            c: VarSet,
            an: VarSet,
        ) -> bool {
            for &(w, head_v, head_w) in &adj[v] {
                if path.contains(&w) {
                    continue;
                }
                if path.len() > 1 {
                    let collider = into_v && head_v;
                    let open = if collider {
                        an.contains(v)
                    } else {
                        !c.contains(v)
                    };
                    if !open {
                        continue;
                    }
                }
                if z.contains(w) {
                    return true;
                }
                path.push(w);
                let found = walk(w, head_w, path, adj, z, c, an);
                path.pop();
                if found {
                    return true;
                }
            }
            false
        }
        for s in y.iter() {
            let mut path = vec![s];
            if walk(s, false, &mut path, &adj, z, c, an) {
                return false;
            }
        }
        true
    }

    /// Identifiability of `P(y | do(x))` from the observational joint by the
    /// recursive identification algorithm over districts. `dir[v]` holds the
    /// children of `v`, `bi[v]` its spouses, all as bitmasks over `n`
    /// vertices.
    pub fn id_identifiable(n: usize, dir: &[u32], bi: &[u32], y: u32, x: u32) -> bool {
        id_rec(n, dir, bi, (1u32 << n) - 1, y, x)
    }

    fn ancestors(dir: &[u32], within: u32, s: u32) -> u32 {
        let mut an = s;
        loop {
            let mut next = an;
            for (v, &pa) in dir.iter().enumerate() {
                if within >> v & 1 == 1 && pa & an != 0 {
                    next |= 1 << v;
                }
            }
            if next == an {
                return an;
            }
            an = next;
        }
    }

    fn districts(bi: &[u32], within: u32) -> Vec<u32> {
        let mut left = within;
        let mut out = Vec::new();
        while left != 0 {
            let mut comp = left & left.wrapping_neg();
            loop {
                let mut next = comp;
                for (v, &sp) in bi.iter().enumerate() {
                    if comp >> v & 1 == 1 {
                        next |= sp & within;
                    }
                }
                if next == comp {
                    break;
                }
                comp = next;
            }
            out.push(comp);
            left &= !comp;
        }
        out
    }

    fn id_rec(n: usize, dir: &[u32], bi: &[u32], v: u32, y: u32, x: u32) -> bool {
        if x == 0 {
            return true;
        }
        let an_y = ancestors(dir, v, y);
        if an_y != v {
            return id_rec(n, dir, bi, an_y, y, x & an_y);
        }
        // ancestors of y once edges into x are removed
        let cut_dir: Vec<u32> = (0..n).map(|u| dir[u] & !x).collect();
        let an_cut = ancestors(&cut_dir, v, y);
        let w = v & !x & !an_cut;
        if w != 0 {
            return id_rec(n, dir, bi, v, y, x | w);
        }
        let parts = districts(bi, v & !x);
        if parts.len() > 1 {
            return parts.iter().all(|&s| id_rec(n, dir, bi, v, s, v & !s));
        }
        let s = parts[0];
        let whole = districts(bi, v);
        if whole.len() == 1 {
            return false;
        }
        if whole.contains(&s) {
            return true;
        }
        let sp = *whole.iter().find(|&&d| d & s == s).expect("district nests");
        id_rec(n, dir, bi, sp, y, x & sp)
    }
}
