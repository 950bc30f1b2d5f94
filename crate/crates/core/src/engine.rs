//! Terms, the canonical store and the rule machinery.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::graph::LabeledGraph;
use crate::varset::VarSet;

/// `P(A | do(B), C)` with the indicators in `r1` fixed to 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Distribution {
    pub a: VarSet,
    pub b: VarSet,
    pub c: VarSet,
    pub r1: VarSet,
}

impl Distribution {
    pub fn new(a: VarSet, b: VarSet, c: VarSet) -> Self {
        Distribution {
            a,
            b,
            c,
            r1: VarSet::EMPTY,
        }
    }

    pub fn with_active(mut self, r1: VarSet) -> Self {
        self.r1 = r1;
        self
    }

    /// All variables mentioned.
    #[inline]
    pub fn vars(&self) -> VarSet {
        self.a | self.b | self.c
    }

    /// Variables whose value is not fixed by an active indicator.
    #[inline]
    pub fn free(&self) -> VarSet {
        self.vars() - self.r1
    }

    pub fn display(&self, g: &LabeledGraph) -> String {
        let item = |v: usize| {
            if self.r1.contains(v) {
                format!("{} = 1", g.name(v))
            } else {
                g.name(v).to_string()
            }
        };
        let mut s = String::from("P(");
        s.push_str(&self.a.iter().map(item).collect::<Vec<_>>().join(","));
        let mut rhs = Vec::new();
        if !self.b.is_empty() {
            rhs.push(format!(
                "do({})",
                self.b.iter().map(item).collect::<Vec<_>>().join(",")
            ));
        }
        rhs.extend(self.c.iter().map(item));
        if !rhs.is_empty() {
            s.push('|');
            s.push_str(&rhs.join(","));
        }
        s.push(')');
        s
    }
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P({:?}|do{:?},{:?};r1={:?})",
            self.a, self.b, self.c, self.r1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("left side is empty")]
    EmptyLeft,
    #[error("A, B and C must be disjoint")]
    Overlap,
    #[error("active indicator outside the term or not a response indicator")]
    BadActive,
    #[error("proxy variables cannot be intervened on")]
    ProxyIntervention,
    #[error("a variable appears together with its proxy")]
    ProxyWithTrue,
    #[error("transportability and selection vertices cannot appear on the left side")]
    SpecialOnLeft,
    #[error("intervention vertices cannot appear in a term")]
    InterventionVertex,
}

/// Checks the structural invariants of a term.
pub fn check_distribution(d: &Distribution, g: &LabeledGraph) -> Result<(), InvariantError> {
    if d.a.is_empty() {
        return Err(InvariantError::EmptyLeft);
    }
    if d.a.intersects(d.b) || d.a.intersects(d.c) || d.b.intersects(d.c) {
        return Err(InvariantError::Overlap);
    }
    let t = d.vars();
    if !t.is_subset(g.observed()) {
        return Err(InvariantError::InterventionVertex);
    }
    if !d.r1.is_subset(t & g.indicators()) {
        return Err(InvariantError::BadActive);
    }
    if d.b.intersects(g.proxies()) {
        return Err(InvariantError::ProxyIntervention);
    }
    if g.to_trues(t).intersects(t) {
        return Err(InvariantError::ProxyWithTrue);
    }
    if d.a.intersects(g.transport() | g.selection()) {
        return Err(InvariantError::SpecialOnLeft);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Input,
    R1Plus,
    R1Minus,
    R2Plus,
    R2Minus,
    R3Plus,
    R3Minus,
    R4,
    R5,
    R6Plus,
    R6Minus,
    R7Plus,
    R7Minus,
    R8Plus,
    R8Minus,
    R9Plus,
    R9Minus,
    R10Plus,
    R10Minus,
}

impl RuleId {
    /// Every rule, in catalogue order.
    pub const ALL: [RuleId; 18] = [
        RuleId::R1Plus,
        RuleId::R1Minus,
        RuleId::R2Plus,
        RuleId::R2Minus,
        RuleId::R3Plus,
        RuleId::R3Minus,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6Plus,
        RuleId::R6Minus,
        RuleId::R7Plus,
        RuleId::R7Minus,
        RuleId::R8Plus,
        RuleId::R8Minus,
        RuleId::R9Plus,
        RuleId::R9Minus,
        RuleId::R10Plus,
        RuleId::R10Minus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RuleId::Input => "input",
            RuleId::R1Plus => "1+",
            RuleId::R1Minus => "1-",
            RuleId::R2Plus => "2+",
            RuleId::R2Minus => "2-",
            RuleId::R3Plus => "3+",
            RuleId::R3Minus => "3-",
            RuleId::R4 => "4",
            RuleId::R5 => "5",
            RuleId::R6Plus => "6+",
            RuleId::R6Minus => "6-",
            RuleId::R7Plus => "7+",
            RuleId::R7Minus => "7-",
            RuleId::R8Plus => "8+",
            RuleId::R8Minus => "8-",
            RuleId::R9Plus => "9+",
            RuleId::R9Minus => "9-",
            RuleId::R10Plus => "10+",
            RuleId::R10Minus => "10-",
        }
    }

    /// Rules that only exist for missing-data problems.
    pub fn is_missing_data_rule(self) -> bool {
        matches!(
            self,
            RuleId::R7Plus
                | RuleId::R7Minus
                | RuleId::R8Plus
                | RuleId::R8Minus
                | RuleId::R9Plus
                | RuleId::R9Minus
                | RuleId::R10Plus
                | RuleId::R10Minus
        )
    }

    pub fn is_do_calculus(self) -> bool {
        matches!(
            self,
            RuleId::R1Plus
                | RuleId::R1Minus
                | RuleId::R2Plus
                | RuleId::R2Minus
                | RuleId::R3Plus
                | RuleId::R3Minus
        )
    }

    pub fn needs_second_input(self) -> bool {
        matches!(
            self,
            RuleId::R6Plus
                | RuleId::R6Minus
                | RuleId::R7Plus
                | RuleId::R7Minus
                | RuleId::R8Plus
                | RuleId::R8Minus
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule {0:?}")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    /// Accepts `2+`, `+2`, `2-`, `-2`, `4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (num, sign) = if let Some(r) = t.strip_prefix('+') {
            (r, '+')
        } else if let Some(r) = t.strip_prefix('-') {
            (r, '-')
        } else if let Some(r) = t.strip_suffix('+') {
            (r, '+')
        } else if let Some(r) = t.strip_suffix('-') {
            (r, '-')
        } else {
            (t, ' ')
        };
        let r = match (num, sign) {
            ("1", '+') => RuleId::R1Plus,
            ("1", '-') => RuleId::R1Minus,
            ("2", '+') => RuleId::R2Plus,
            ("2", '-') => RuleId::R2Minus,
            ("3", '+') => RuleId::R3Plus,
            ("3", '-') => RuleId::R3Minus,
            ("4", _) => RuleId::R4,
            ("5", _) => RuleId::R5,
            ("6", '+') => RuleId::R6Plus,
            ("6", '-') => RuleId::R6Minus,
            ("7", '+') => RuleId::R7Plus,
            ("7", '-') => RuleId::R7Minus,
            ("8", '+') => RuleId::R8Plus,
            ("8", '-') => RuleId::R8Minus,
            ("9", '+') => RuleId::R9Plus,
            ("9", '-') => RuleId::R9Minus,
            ("10", '+') => RuleId::R10Plus,
            ("10", '-') => RuleId::R10Minus,
            _ => return Err(UnknownRule(s.to_string())),
        };
        Ok(r)
    }
}

/// Set of enabled rules.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RuleSet(u32);

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet(0)
    }

    pub fn all() -> Self {
        RuleId::ALL.iter().copied().collect()
    }

    /// Algorithm default: everything except rules 1±; the missing-data rules
    /// only when `missing` is set.
    pub fn default_for(missing: bool) -> Self {
        RuleId::ALL
            .iter()
            .copied()
            .filter(|r| !matches!(r, RuleId::R1Plus | RuleId::R1Minus))
            .filter(|r| missing || !r.is_missing_data_rule())
            .collect()
    }

    pub fn contains(self, r: RuleId) -> bool {
        self.0 >> (r as u32) & 1 == 1
    }

    pub fn insert(&mut self, r: RuleId) {
        self.0 |= 1 << (r as u32);
    }

    pub fn remove(&mut self, r: RuleId) {
        self.0 &= !(1 << (r as u32));
    }

    pub fn without(mut self, r: RuleId) -> Self {
        self.remove(r);
        self
    }

    pub fn with(mut self, r: RuleId) -> Self {
        self.insert(r);
        self
    }

    pub fn iter(self) -> impl Iterator<Item = RuleId> {
        RuleId::ALL.into_iter().filter(move |r| self.contains(*r))
    }
}

impl FromIterator<RuleId> for RuleSet {
    fn from_iter<I: IntoIterator<Item = RuleId>>(it: I) -> Self {
        let mut s = RuleSet::empty();
        for r in it {
            s.insert(r);
        }
        s
    }
}

impl fmt::Debug for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|r| r.label()))
            .finish()
    }
}

pub type NodeId = u32;

#[derive(Debug, Clone)]
pub struct DerivationNode {
    pub dist: Distribution,
    pub rule: RuleId,
    pub z: VarSet,
    /// Main parent, then the second input of rules 6±, 7± and 8±.
    pub parents: [Option<NodeId>; 2],
    pub expanded: bool,
    pub order: u32,
    /// Position in the input list for input nodes.
    pub input: Option<usize>,
}

/// Terms derived so far, indexed by insertion order, with a reverse index.
#[derive(Debug, Clone, Default)]
pub struct DistributionStore {
    nodes: Vec<DerivationNode>,
    index: FxHashMap<Distribution, NodeId>,
}

impl DistributionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, d: &Distribution) -> Option<NodeId> {
        self.index.get(d).copied()
    }

    pub fn contains(&self, d: &Distribution) -> bool {
        self.index.contains_key(d)
    }

    pub fn node(&self, id: NodeId) -> &DerivationNode {
        &self.nodes[id as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut DerivationNode {
        &mut self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[DerivationNode] {
        &self.nodes
    }

    /// Inserts unless the key exists; returns the index and whether it was new.
    pub fn canonical_insert(
        &mut self,
        dist: Distribution,
        rule: RuleId,
        z: VarSet,
        parents: [Option<NodeId>; 2],
    ) -> (NodeId, bool) {
        if let Some(&i) = self.index.get(&dist) {
            return (i, false);
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(DerivationNode {
            dist,
            rule,
            z,
            parents,
            expanded: false,
            order: id,
            input: None,
        });
        self.index.insert(dist, id);
        (id, true)
    }

    /// Checked insertion against the graph invariants.
    pub fn try_insert(
        &mut self,
        g: &LabeledGraph,
        dist: Distribution,
        rule: RuleId,
        z: VarSet,
        parents: [Option<NodeId>; 2],
    ) -> Result<(NodeId, bool), InvariantError> {
        check_distribution(&dist, g)?;
        Ok(self.canonical_insert(dist, rule, z, parents))
    }

    pub fn insert_input(&mut self, dist: Distribution, position: usize) -> (NodeId, bool) {
        let (id, new) = self.canonical_insert(dist, RuleId::Input, VarSet::EMPTY, [None, None]);
        if new {
            self.nodes[id as usize].input = Some(position);
        }
        (id, new)
    }
}

/// What a candidate needs before it may be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    None,
    /// `y ⫫ z | c` with edges into `cut` removed.
    Separation {
        y: VarSet,
        z: VarSet,
        c: VarSet,
        cut: VarSet,
    },
    /// The second input must already be in the store.
    SecondInput(Distribution),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub rule: RuleId,
    pub z: VarSet,
    pub output: Distribution,
    pub requirement: Requirement,
}

/// Why a candidate was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    SeparationFailed,
    MissingSecondInput,
    InvariantWouldBreak,
}

/// Rule machinery bound to one graph.
pub struct Engine<'g> {
    pub g: &'g LabeledGraph,
    special: VarSet,
}

impl<'g> Engine<'g> {
    pub fn new(g: &'g LabeledGraph) -> Self {
        Engine {
            g,
            special: g.transport() | g.selection(),
        }
    }

    /// False when the termination condition of `rule` holds for `d`.
    pub fn termination_applicable(&self, d: &Distribution, rule: RuleId) -> bool {
        let ind = self.g.indicators();
        match rule {
            RuleId::Input => false,
            RuleId::R1Plus | RuleId::R3Plus | RuleId::R6Minus | RuleId::R8Plus => true,
            RuleId::R1Minus | RuleId::R2Plus | RuleId::R6Plus | RuleId::R8Minus => !d.c.is_empty(),
            RuleId::R2Minus | RuleId::R3Minus => !d.b.is_empty(),
            RuleId::R4 | RuleId::R5 | RuleId::R7Plus | RuleId::R7Minus => d.a.len() > 1,
            RuleId::R9Plus => !(d.c & ind).is_empty(),
            RuleId::R9Minus => !(d.a & ind).is_empty(),
            RuleId::R10Plus | RuleId::R10Minus => !d.r1.is_empty(),
        }
    }

    /// Variables that may be added to `d` without putting a variable next to
    /// its proxy.
    fn fresh_pool(&self, d: &Distribution) -> VarSet {
        let t = d.vars();
        self.g.observed() - t - self.g.to_trues(t) - self.g.to_proxies(t)
    }

    #[inline]
    fn proxy_clash(&self, z: VarSet) -> bool {
        self.g.to_trues(z).intersects(z)
    }

    /// Valid subsets `Z` for `rule` on `d`, ascending by bit value.
    pub fn valid_subsets(&self, d: &Distribution, rule: RuleId) -> Vec<VarSet> {
        let mut out = Vec::new();
        self.for_each_subset(d, rule, |z| {
            out.push(z);
            true
        });
        out
    }

    /// Calls `f` on each valid subset until it returns false. Returns false
    /// if stopped early.
    pub fn for_each_subset(
        &self,
        d: &Distribution,
        rule: RuleId,
        mut f: impl FnMut(VarSet) -> bool,
    ) -> bool {
        let g = self.g;
        let ra = d.r1;
        let ind = g.indicators();
        let px = g.proxies();
        match rule {
            RuleId::Input => {}
            RuleId::R1Plus => {
                for z in self.fresh_pool(d).subsets() {
                    if !self.proxy_clash(z) && !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R3Plus => {
                for z in (self.fresh_pool(d) & g.intervenable()).subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R6Minus | RuleId::R8Plus => {
                for z in (self.fresh_pool(d) - self.special).subsets() {
                    if !self.proxy_clash(z) && !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R1Minus => {
                for z in d.c.subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R2Plus => {
                for z in (d.c - px).subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R2Minus | RuleId::R3Minus => {
                for z in d.b.subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R6Plus | RuleId::R8Minus => {
                for z in (d.c - self.special).subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R4 => {
                for z in (d.a - ra).subsets() {
                    if z != d.a && !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R5 => {
                let fixed = d.a & ra;
                let free = d.a - ra;
                if !fixed.is_empty() && fixed != d.a && !f(fixed) {
                    return false;
                }
                for s in free.subsets() {
                    let z = fixed | s;
                    if z != d.a && !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R7Plus | RuleId::R7Minus => {
                for z in d.a.proper_subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R9Plus => {
                for z in ((d.c & ind) - ra).subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R9Minus => {
                for z in ((d.a & ind) - ra).subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R10Plus => {
                let pool: VarSet = (d.c & px)
                    .iter()
                    .filter(|&p| {
                        let r = g.proxy_indicators(VarSet::singleton(p));
                        r.is_subset(ra & d.c)
                    })
                    .collect();
                for z in pool.subsets() {
                    if !f(z) {
                        return false;
                    }
                }
            }
            RuleId::R10Minus => {
                let mut in_c = VarSet::EMPTY;
                let mut in_a = VarSet::EMPTY;
                for p in (d.a & px).iter() {
                    let r = g.proxy_indicators(VarSet::singleton(p));
                    if r.is_subset(ra & d.c) {
                        in_c.insert(p);
                    }
                    if r.is_subset(ra & d.a) {
                        in_a.insert(p);
                    }
                }
                for z in (in_c | in_a).subsets() {
                    if (z.is_subset(in_c) || z.is_subset(in_a)) && !f(z) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Candidates produced by `rule` with subset `z` (several for 6- and 8+,
    /// one per set of newly active indicators).
    pub fn apply(
        &self,
        d: &Distribution,
        rule: RuleId,
        z: VarSet,
        mut f: impl FnMut(Candidate) -> bool,
    ) -> bool {
        let g = self.g;
        let (a, b, c, ra) = (d.a, d.b, d.c, d.r1);
        let mk = |out: Distribution, req: Requirement| Candidate {
            rule,
            z,
            output: out,
            requirement: req,
        };
        let cand = match rule {
            RuleId::Input => return true,
            RuleId::R1Plus => mk(
                Distribution { c: c | z, ..*d },
                Requirement::Separation {
                    y: a,
                    z,
                    c: b | c,
                    cut: b,
                },
            ),
            RuleId::R1Minus => mk(
                Distribution {
                    c: c - z,
                    r1: ra - z,
                    ..*d
                },
                Requirement::Separation {
                    y: a,
                    z,
                    c: b | (c - z),
                    cut: b,
                },
            ),
            RuleId::R2Plus => mk(
                Distribution {
                    b: b | z,
                    c: c - z,
                    ..*d
                },
                Requirement::Separation {
                    y: a,
                    z: g.interventions(z),
                    c: b | c,
                    cut: b,
                },
            ),
            RuleId::R2Minus => mk(
                Distribution {
                    b: b - z,
                    c: c | z,
                    ..*d
                },
                Requirement::Separation {
                    y: a,
                    z: g.interventions(z),
                    c: b | c,
                    cut: b - z,
                },
            ),
            RuleId::R3Plus => mk(
                Distribution { b: b | z, ..*d },
                Requirement::Separation {
                    y: a,
                    z: g.interventions(z),
                    c: b | c,
                    cut: b,
                },
            ),
            RuleId::R3Minus => mk(
                Distribution {
                    b: b - z,
                    r1: ra - z,
                    ..*d
                },
                Requirement::Separation {
                    y: a,
                    z: g.interventions(z),
                    c: (b - z) | c,
                    cut: b - z,
                },
            ),
            RuleId::R4 => mk(Distribution { a: a - z, ..*d }, Requirement::None),
            RuleId::R5 => mk(
                Distribution {
                    a: a - z,
                    c: c | z,
                    ..*d
                },
                Requirement::None,
            ),
            RuleId::R6Plus => mk(
                Distribution {
                    a: a | z,
                    c: c - z,
                    ..*d
                },
                Requirement::SecondInput(Distribution {
                    a: z,
                    b,
                    c: c - z,
                    r1: ra - a,
                }),
            ),
            RuleId::R6Minus | RuleId::R8Plus => {
                let zr = z & g.indicators();
                let mut s = VarSet::EMPTY;
                loop {
                    let r1 = ra | s;
                    let c = if rule == RuleId::R6Minus {
                        mk(
                            Distribution { a: a | z, b, c, r1 },
                            Requirement::SecondInput(Distribution {
                                a: z,
                                b,
                                c: a | c,
                                r1,
                            }),
                        )
                    } else {
                        mk(
                            Distribution {
                                a: z,
                                b,
                                c: c | a,
                                r1,
                            },
                            Requirement::SecondInput(Distribution { a: a | z, b, c, r1 }),
                        )
                    };
                    if !f(c) {
                        return false;
                    }
                    s = VarSet(s.0.wrapping_sub(zr.0) & zr.0);
                    if s.is_empty() {
                        return true;
                    }
                }
            }
            RuleId::R7Plus => mk(
                Distribution {
                    a: a - z,
                    c: c | z,
                    ..*d
                },
                Requirement::SecondInput(Distribution {
                    a: z,
                    b,
                    c,
                    r1: ra & (z | b | c),
                }),
            ),
            RuleId::R7Minus => mk(
                Distribution {
                    a: a - z,
                    r1: ra - z,
                    ..*d
                },
                Requirement::SecondInput(Distribution {
                    a: z,
                    b,
                    c: c | (a - z),
                    r1: ra,
                }),
            ),
            RuleId::R8Minus => mk(
                Distribution {
                    a: z,
                    c: c - z,
                    r1: ra - a,
                    ..*d
                },
                Requirement::SecondInput(Distribution {
                    a: a | z,
                    b,
                    c: c - z,
                    r1: ra,
                }),
            ),
            RuleId::R9Plus | RuleId::R9Minus => {
                mk(Distribution { r1: ra | z, ..*d }, Requirement::None)
            }
            RuleId::R10Plus => mk(
                Distribution {
                    c: (c - z) | g.to_trues(z),
                    ..*d
                },
                Requirement::None,
            ),
            RuleId::R10Minus => mk(
                Distribution {
                    a: (a - z) | g.to_trues(z),
                    ..*d
                },
                Requirement::None,
            ),
        };
        f(cand)
    }

    /// Checks a candidate against the graph and the store. Does not insert.
    pub fn check(
        &self,
        cand: &Candidate,
        store: &DistributionStore,
    ) -> Result<Option<NodeId>, Rejection> {
        if check_distribution(&cand.output, self.g).is_err() {
            return Err(Rejection::InvariantWouldBreak);
        }
        match cand.requirement {
            Requirement::None => Ok(None),
            Requirement::Separation { y, z, c, cut } => {
                if self.g.m_separated(y, z, c, cut) {
                    Ok(None)
                } else {
                    Err(Rejection::SeparationFailed)
                }
            }
            Requirement::SecondInput(d) => match store.get(&d) {
                Some(i) => Ok(Some(i)),
                None => Err(Rejection::MissingSecondInput),
            },
        }
    }

    /// Applies `rule` with subset `z` to `d` and validates the result.
    /// Returns every accepted output with its second parent.
    pub fn apply_rule(
        &self,
        d: &Distribution,
        rule: RuleId,
        z: VarSet,
        store: &DistributionStore,
    ) -> Vec<Result<(Distribution, Option<NodeId>), Rejection>> {
        let mut out = Vec::new();
        self.apply(d, rule, z, |c| {
            out.push(self.check(&c, store).map(|p| (c.output, p)));
            true
        });
        out
    }
}
