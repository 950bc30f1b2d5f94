//! Resolution of parsed terms against a graph.

use thiserror::Error;

use crate::engine::{check_distribution, Distribution, InvariantError};
use crate::graph::{build_graph, GraphError, LabeledGraph};
use crate::parser::{
    parse_distribution, parse_distributions, parse_graph, parse_missingness, parse_name_list,
    DistributionSpec, GraphSpec, MissingnessSpec, ParseError,
};
use crate::varset::VarSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("{what}: {err}")]
    Parse { what: &'static str, err: ParseError },
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error(
        "{what} {term}: unknown proxy {name} (no missingness mechanism for its true variable)"
    )]
    UnknownProxy {
        what: &'static str,
        term: String,
        name: String,
    },
    #[error("{what} {term}: {name} = {value} is not supported, only response indicators may be fixed to 1")]
    BadAssignment {
        what: &'static str,
        term: String,
        name: String,
        value: u8,
    },
    #[error("{what} {term}: cannot intervene on {name}")]
    BadIntervention {
        what: &'static str,
        term: String,
        name: String,
    },
    #[error("{what} {term}: {name} cannot appear on the left side")]
    SpecialOnLeft {
        what: &'static str,
        term: String,
        name: String,
    },
    #[error("{what} {term}: {err}")]
    Invariant {
        what: &'static str,
        term: String,
        err: InvariantError,
    },
    #[error("no input distributions")]
    NoInputs,
}

/// A fully resolved identification problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: LabeledGraph,
    pub inputs: Vec<Distribution>,
    pub query: Distribution,
    pub input_specs: Vec<DistributionSpec>,
    pub query_spec: DistributionSpec,
}

/// Raw textual description of a problem, as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct ProblemText {
    pub data: String,
    pub query: String,
    pub graph: String,
    pub transportability: String,
    pub selection_bias: String,
    pub missing_data: String,
}

impl ProblemText {
    pub fn new(data: &str, query: &str, graph: &str) -> Self {
        ProblemText {
            data: data.to_string(),
            query: query.to_string(),
            graph: graph.to_string(),
            ..Default::default()
        }
    }

    pub fn transportability(mut self, t: &str) -> Self {
        self.transportability = t.to_string();
        self
    }

    pub fn selection_bias(mut self, s: &str) -> Self {
        self.selection_bias = s.to_string();
        self
    }

    pub fn missing_data(mut self, m: &str) -> Self {
        self.missing_data = m.to_string();
        self
    }

    pub fn resolve(&self) -> Result<Problem, ProblemError> {
        let p = |what| move |err| ProblemError::Parse { what, err };
        let inputs = parse_distributions(&self.data).map_err(p("data"))?;
        let query = parse_distribution(&self.query).map_err(p("query"))?;
        let graph = parse_graph(&self.graph).map_err(p("graph"))?;
        let md = parse_missingness(&self.missing_data).map_err(p("missing_data"))?;
        let t = parse_name_list(&self.transportability).map_err(p("transportability"))?;
        let s = parse_name_list(&self.selection_bias).map_err(p("selection_bias"))?;
        resolve(&graph, &md, &t, &s, &inputs, &query)
    }
}

/// Builds the graph and converts every term to its index form.
pub fn resolve(
    g: &GraphSpec,
    m: &MissingnessSpec,
    transport: &[String],
    selection: &[String],
    inputs: &[DistributionSpec],
    query: &DistributionSpec,
) -> Result<Problem, ProblemError> {
    if inputs.is_empty() {
        return Err(ProblemError::NoInputs);
    }
    let mut extra: Vec<String> = Vec::new();
    for d in inputs.iter().chain(std::iter::once(query)) {
        for n in d.names() {
            if !n.ends_with('*') && !extra.contains(n) {
                extra.push(n.clone());
            }
        }
    }
    let graph = build_graph(g, m, transport, selection, &extra)?;
    let mut resolved = Vec::with_capacity(inputs.len());
    for d in inputs {
        resolved.push(to_distribution(&graph, d, "input")?);
    }
    let q = to_distribution(&graph, query, "query")?;
    Ok(Problem {
        graph,
        inputs: resolved,
        query: q,
        input_specs: inputs.to_vec(),
        query_spec: query.clone(),
    })
}

/// Converts a parsed term. Assignments `= 1` are only meaningful on response
/// indicators and on transportability/selection vertices (where they are
/// implied anyway).
pub fn to_distribution(
    g: &LabeledGraph,
    d: &DistributionSpec,
    what: &'static str,
) -> Result<Distribution, ProblemError> {
    let term = d.render();
    let lookup = |n: &String| -> Result<usize, ProblemError> {
        g.index_of(n).ok_or_else(|| ProblemError::UnknownProxy {
            what,
            term: term.clone(),
            name: n.clone(),
        })
    };
    let set = |names: &[String]| -> Result<VarSet, ProblemError> {
        let mut s = VarSet::EMPTY;
        for n in names {
            s.insert(lookup(n)?);
        }
        Ok(s)
    };
    let a = set(&d.left)?;
    let b = set(&d.do_vars)?;
    let c = set(&d.cond_vars)?;
    let special = g.transport() | g.selection();
    let mut r1 = VarSet::EMPTY;
    for (n, v) in &d.value_assignments {
        let i = lookup(n)?;
        if *v == 1 && g.indicators().contains(i) {
            r1.insert(i);
        } else if !(*v == 1 && special.contains(i) && c.contains(i)) {
            return Err(ProblemError::BadAssignment {
                what,
                term: term.clone(),
                name: n.clone(),
                value: *v,
            });
        }
    }
    if let Some(v) = (b & (special | g.proxies())).first() {
        return Err(ProblemError::BadIntervention {
            what,
            term,
            name: g.name(v).to_string(),
        });
    }
    if let Some(v) = (a & special).first() {
        return Err(ProblemError::SpecialOnLeft {
            what,
            term,
            name: g.name(v).to_string(),
        });
    }
    let dist = Distribution { a, b, c, r1 };
    check_distribution(&dist, g).map_err(|err| ProblemError::Invariant { what, term, err })?;
    Ok(dist)
}
