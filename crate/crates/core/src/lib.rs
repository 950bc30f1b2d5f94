//! Search-based identification of causal queries from arbitrary collections
//! of input distributions.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod formula;
pub mod graph;
pub mod instance;
pub mod oracle;
pub mod parser;
pub mod search;
pub mod varset;

pub use engine::{Distribution, DistributionStore, RuleId, RuleSet};
pub use graph::{build_graph, LabeledGraph};
pub use instance::{Problem, ProblemText};
pub use varset::VarSet;
