//! Command-line front end.
//!
//! Exit codes: 0 identifiable (or success), 1 not identifiable or failed
//! verification, 2 search budget exhausted, 3 usage error, 4 invalid input,
//! 5 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis;
use crate::engine::RuleId;
use crate::formula::{build_expression, render_latex, Expr, FormulaError, RenderOptions};
use crate::instance::{Problem, ProblemError, ProblemText};
use crate::oracle::verify_expression;
use crate::search::{backtrack_derivation, run_search, SearchOptions, SearchResult, Verdict};

pub const SEED_ENV: &str = "IDSEARCH_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_IDENTIFIABLE: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_INPUT: i32 = 4;
pub const EXIT_IO: i32 = 5;

const AFTER_HELP: &str = "Arguments that take text accept @PATH to read the value from a file.\n\
Exit codes: 0 identifiable/success, 1 not identifiable or verification failed, \
2 time budget exhausted, 3 usage error, 4 invalid input, 5 I/O error.";

#[derive(Debug, Parser)]
#[command(name = "idsearch", version, about = "Identify causal queries from arbitrary input distributions", after_help = AFTER_HELP)]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Latex,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide identifiability and print the estimand.
    Solve(SolveArgs),
    /// Solve, then check the estimand against random discrete models.
    Verify(VerifyArgs),
    /// Solve the five bivariate queries on every missingness graph.
    EnumerateBivariate(EnumerateArgs),
    /// Generate random instances and optionally time the search configurations.
    Simulate(SimulateArgs),
    /// Solve with individual rules switched off.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Input distributions, one per line or separated by commas between terms.
    #[arg(long)]
    pub data: String,
    /// Target term, e.g. `p(y|do(x))`
    #[arg(long)]
    pub query: String,
    /// Edges, one per line: `a -> b` or `a <-> b`.
    #[arg(long)]
    pub graph: String,
    /// Transportability nodes, comma separated
    #[arg(long, default_value = "")]
    pub transportability: String,
    /// Selection-bias nodes, comma separated
    #[arg(long, default_value = "")]
    pub selection_bias: String,
    /// Missingness mechanisms such as `r_x : x, r_y : y`.
    #[arg(long, default_value = "")]
    pub missing_data: String,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Defaults to on, except with missing data.
    #[arg(long)]
    pub heuristic: Option<bool>,
    /// Add rules 1± and skip the termination checks.
    #[arg(long)]
    pub no_improvements: bool,
    /// Seconds before the search gives up with exit code 2.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Keep variable names as written instead of lowercasing them.
    #[arg(long)]
    pub preserve_case: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Write the derivation as PREFIX.json and PREFIX.dot.
    #[arg(long)]
    pub derivation: bool,
    #[arg(long, default_value = "derivation")]
    pub derivation_prefix: PathBuf,
    /// Report timing and search statistics.
    #[arg(long)]
    pub benchmark: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Number of random models.
    #[arg(long, default_value_t = 20)]
    pub models: u64,
    /// First model seed; falls back to $IDSEARCH_SEED, then 0.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// States per ordinary variable.
    #[arg(long, default_value_t = 2)]
    pub card: usize,
    /// Estimand as a JSON tree (as printed by `solve --format json`) to check
    /// instead of solving.
    #[arg(long)]
    pub formula: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long, default_value = "bivariate.csv")]
    pub csv: PathBuf,
    /// Also write the Venn summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Instance pairs to generate
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Vertices per graph
    #[arg(long, default_value_t = 10)]
    pub vertices: usize,
    /// First instance seed; falls back to $IDSEARCH_SEED, then 0.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Seconds per search.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Time the four heuristic × improvements configurations.
    #[arg(long)]
    pub benchmark: bool,
    /// Write the instance records as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Rules to switch off one at a time, e.g. `6-`. Defaults to every rule
    /// of the default set.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
}

/// A failure that ends the command with a given exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind,
            message: message.into(),
        }
    }
}

/// Output of one command: what to print and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

fn read_arg(v: &str, what: &str) -> Result<(String, Option<String>), Failure> {
    match v.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .map(|s| (s, Some(path.to_string())))
            .map_err(|e| Failure::new(EXIT_IO, "io", format!("{what}: {path}: {e}"))),
        None => Ok((v.to_string(), None)),
    }
}

fn load_problem(a: &ProblemArgs) -> Result<Problem, Failure> {
    let mut files: Vec<(&'static str, String)> = Vec::new();
    let mut get = |v: &str, what: &'static str| -> Result<String, Failure> {
        let (s, f) = read_arg(v, what)?;
        if let Some(f) = f {
            files.push((what, f));
        }
        Ok(s)
    };
    let text = ProblemText {
        data: get(&a.data, "data")?,
        query: get(&a.query, "query")?,
        graph: get(&a.graph, "graph")?,
        transportability: get(&a.transportability, "transportability")?,
        selection_bias: get(&a.selection_bias, "selection_bias")?,
        missing_data: get(&a.missing_data, "missing_data")?,
    };
    text.resolve().map_err(|e| {
        let file = match &e {
            ProblemError::Parse { what, .. } => files
                .iter()
                .find(|(w, _)| w == what)
                .map(|(_, f)| f.clone()),
            _ => None,
        };
        let msg = match file {
            Some(f) => format!("{f}: {e}"),
            None => e.to_string(),
        };
        Failure::new(EXIT_INPUT, "input", msg)
    })
}

fn search_options(s: &SearchArgs, missing: bool) -> SearchOptions {
    let mut o = SearchOptions {
        heuristic: s.heuristic,
        ..SearchOptions::default()
    };
    if s.no_improvements {
        o = o.without_improvements(missing);
    }
    o.time_budget = s.time_budget.map(Duration::from_secs_f64);
    o
}

fn render_opts(s: &SearchArgs) -> RenderOptions {
    RenderOptions {
        lowercase: !s.preserve_case,
        ..Default::default()
    }
}

fn exit_for(v: Verdict) -> i32 {
    match v {
        Verdict::Identifiable => EXIT_OK,
        Verdict::NotIdentifiable => EXIT_NOT_IDENTIFIABLE,
        Verdict::Indeterminate => EXIT_INDETERMINATE,
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Identifiable => "identifiable",
        Verdict::NotIdentifiable => "non-identifiable",
        Verdict::Indeterminate => "indeterminate",
    }
}

struct Solved {
    problem: Problem,
    result: SearchResult,
    expr: Option<Expr>,
    /// Set when the target was derived but its estimand is not printed.
    note: Option<String>,
}

fn solve_problem(a: &ProblemArgs, s: &SearchArgs) -> Result<Solved, Failure> {
    let problem = load_problem(a)?;
    let opts = search_options(s, problem.graph.has_missingness());
    let result = run_search(&problem.inputs, &problem.query, &problem.graph, &opts);
    let (expr, note) = match result
        .target
        .map(|t| build_expression(&result.store, t, &problem.graph))
    {
        Some(Ok(e)) => (Some(e), None),
        Some(Err(e @ FormulaError::TooLarge(_))) => (None, Some(e.to_string())),
        Some(Err(e)) => return Err(Failure::new(EXIT_INPUT, "formula", e.to_string())),
        None => (None, None),
    };
    Ok(Solved {
        problem,
        result,
        expr,
        note,
    })
}

#[derive(Serialize)]
struct SolveReport {
    identifiable: bool,
    verdict: Verdict,
    query: String,
    formula: String,
    expression: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivation: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    benchmark: Option<Value>,
}

fn solve(format: Format, a: &SolveArgs) -> Result<Outcome, Failure> {
    let s = solve_problem(&a.problem, &a.search)?;
    let g = &s.problem.graph;
    let ro = render_opts(&a.search);
    let formula = s
        .expr
        .as_ref()
        .map(|e| render_latex(e, g, &ro))
        .unwrap_or_default();
    let derivation = match (a.derivation, s.result.target) {
        (true, Some(t)) => {
            let d = backtrack_derivation(&s.result.store, t, g);
            let json_path = a.derivation_prefix.with_extension("json");
            let dot_path = a.derivation_prefix.with_extension("dot");
            let body = serde_json::to_string_pretty(&d).expect("derivation serializes");
            write_file(&json_path, &body)?;
            write_file(&dot_path, &d.to_dot())?;
            Some(json!({
                "json": json_path.display().to_string(),
                "dot": dot_path.display().to_string(),
                "nodes": d.nodes.len(),
            }))
        }
        _ => None,
    };
    let benchmark = a.benchmark.then(|| {
        json!({
            "seconds": s.result.stats.elapsed.as_secs_f64(),
            "stats": s.result.stats,
            "trivially_nonidentifiable": s.result.trivially_nonidentifiable,
        })
    });
    let verdict = s.result.verdict;
    let stdout = match format {
        Format::Json => {
            let r = SolveReport {
                identifiable: s.result.identifiable(),
                verdict,
                query: s.problem.query.display(g),
                formula: formula.clone(),
                expression: s
                    .expr
                    .as_ref()
                    .map(|e| e.to_json(g, &ro))
                    .unwrap_or(Value::Null),
                note: s.note.clone(),
                derivation,
                benchmark,
            };
            to_json_line(&r)
        }
        Format::Latex => {
            let mut out = match (&s.expr, &s.note) {
                (Some(_), _) => format!("{formula}\n"),
                (None, Some(n)) => format!("% {}: {n}\n", verdict_word(verdict)),
                (None, None) => format!("{}\n", verdict_word(verdict)),
            };
            if let Some(b) = benchmark {
                out.push_str(&format!(
                    "% time {:.6} s\n",
                    b["seconds"].as_f64().unwrap_or(0.0)
                ));
            }
            out
        }
        Format::Text => {
            let mut out = format!(
                "{}: {}\n",
                s.problem.query.display(g),
                verdict_word(verdict)
            );
            if s.expr.is_some() {
                out.push_str(&format!("{formula}\n"));
            }
            if let Some(n) = &s.note {
                out.push_str(&format!("note: {n}\n"));
            }
            if let Some(d) = derivation {
                out.push_str(&format!(
                    "derivation: {} {}\n",
                    d["json"].as_str().unwrap_or(""),
                    d["dot"].as_str().unwrap_or("")
                ));
            }
            if let Some(b) = benchmark {
                let st = &s.result.stats;
                out.push_str(&format!(
                    "time: {:.6} s, derived {}, expanded {}, attempts {}, separation checks {}\n",
                    b["seconds"].as_f64().unwrap_or(0.0),
                    st.derived,
                    st.expanded,
                    st.attempts,
                    st.separation_checks
                ));
            }
            out
        }
    };
    Ok(Outcome {
        code: exit_for(verdict),
        stdout,
    })
}

fn verify(format: Format, a: &VerifyArgs) -> Result<Outcome, Failure> {
    let ro = render_opts(&a.search);
    let (problem, expr, verdict, note) = match &a.formula {
        Some(f) => {
            let problem = load_problem(&a.problem)?;
            let (text, _) = read_arg(f, "formula")?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_INPUT, "input", format!("formula: {e}")))?;
            let tree = v.get("expression").unwrap_or(&v);
            let e = Expr::from_json(tree, &problem.graph, &ro)
                .map_err(|e| Failure::new(EXIT_INPUT, "input", format!("formula: {e}")))?;
            (problem, Some(e), Verdict::Identifiable, None)
        }
        None => {
            let s = solve_problem(&a.problem, &a.search)?;
            let v = s.result.verdict;
            (s.problem, s.expr, v, s.note)
        }
    };
    let g = &problem.graph;
    let Some(e) = expr else {
        let status = match (verdict, &note) {
            (Verdict::Indeterminate, _) => "indeterminate",
            (_, Some(_)) => "unverified",
            _ => "no formula",
        };
        let stdout = match (format, &note) {
            (Format::Json, _) => {
                to_json_line(&json!({ "status": status, "verdict": verdict, "note": note }))
            }
            (_, Some(n)) => format!("{status}: {n}\n"),
            (_, None) => format!("{status}\n"),
        };
        return Ok(Outcome {
            code: exit_for(verdict),
            stdout,
        });
    };
    let v = verify_expression(
        &e,
        g,
        &problem.inputs,
        &problem.query,
        a.seed..a.seed + a.models,
        a.card,
    )
    .map_err(|e| Failure::new(EXIT_INPUT, "oracle", e.to_string()))?;
    let ok = v.max_deviation < a.tolerance;
    let status = if ok { "verified" } else { "deviation" };
    let formula = render_latex(&e, g, &ro);
    let stdout = match format {
        Format::Json => to_json_line(&json!({
            "status": status,
            "formula": formula,
            "models": v.models,
            "first_seed": a.seed,
            "card": a.card,
            "max_deviation": finite_or_null(v.max_deviation),
            "worst_seed": v.worst_seed,
            "tolerance": a.tolerance,
        })),
        Format::Latex => format!("{formula}\n"),
        Format::Text => format!(
            "{status}: max deviation {:e} over {} models (worst seed {})\n{formula}\n",
            v.max_deviation, v.models, v.worst_seed
        ),
    };
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_NOT_IDENTIFIABLE },
        stdout,
    })
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

fn enumerate(format: Format, a: &EnumerateArgs) -> Result<Outcome, Failure> {
    let records = analysis::enumerate_bivariate();
    let file = fs::File::create(&a.csv).map_err(|e| io_failure(&a.csv, e))?;
    analysis::write_bivariate_csv(&records, std::io::BufWriter::new(file))
        .map_err(|e| Failure::new(EXIT_IO, "io", format!("{}: {e}", a.csv.display())))?;
    let summary = analysis::venn_summary(&records);
    let pretty = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Some(p) = &a.summary {
        write_file(p, &pretty)?;
    }
    let stdout = match format {
        Format::Json => {
            to_json_line(&json!({ "csv": a.csv.display().to_string(), "summary": summary }))
        }
        _ => {
            let mut s = format!(
                "{} graphs, {} with x -> y; csv: {}\n",
                summary.total,
                summary.with_x_to_y,
                a.csv.display()
            );
            for (q, n) in &summary.identifiable {
                s.push_str(&format!("{q}: {n} identifiable\n"));
            }
            s
        }
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
    })
}

fn simulate(format: Format, a: &SimulateArgs) -> Result<Outcome, Failure> {
    if a.vertices < 3 {
        return Err(Failure::new(
            EXIT_USAGE,
            "usage",
            "--vertices must be at least 3",
        ));
    }
    let budget = a.time_budget.map(Duration::from_secs_f64);
    let pairs = analysis::simulate(a.seed, a.count, a.vertices, budget, a.benchmark);
    if let Some(p) = &a.output {
        write_file(
            p,
            &serde_json::to_string_pretty(&pairs).expect("records serialize"),
        )?;
    }
    let stdout = match format {
        Format::Json => to_json_line(&json!({ "instances": pairs })),
        _ => {
            let mut s = String::new();
            for p in &pairs {
                s.push_str(&format!(
                    "seed {}: {} edges, identifiable after {} inputs",
                    p.identifiable.seed,
                    p.identifiable.graph.directed.len() + p.identifiable.graph.bidirected.len(),
                    p.identifiable.inputs.len()
                ));
                for (label, r) in [("id", &p.identifiable), ("non-id", &p.non_identifiable)] {
                    for c in &r.configs {
                        s.push_str(&format!(
                            "; {label} h={} i={} {:.3}s",
                            c.heuristic as u8, c.improvements as u8, c.seconds
                        ));
                    }
                }
                s.push('\n');
            }
            s
        }
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
    })
}

fn ablate(format: Format, a: &AblateArgs) -> Result<Outcome, Failure> {
    let problem = load_problem(&a.problem)?;
    let rules: Vec<RuleId> = if a.rules.is_empty() {
        crate::engine::RuleSet::default_for(problem.graph.has_missingness())
            .iter()
            .collect()
    } else {
        a.rules
            .iter()
            .map(|r| {
                r.parse::<RuleId>()
                    .map_err(|e| Failure::new(EXIT_USAGE, "usage", e.to_string()))
            })
            .collect::<Result<_, _>>()?
    };
    let baseline = analysis::run_ablation(&problem, None);
    let rows: Vec<(String, Verdict)> = rules
        .iter()
        .map(|&r| {
            (
                r.label().to_string(),
                analysis::run_ablation(&problem, Some(r)),
            )
        })
        .collect();
    let stdout = match format {
        Format::Json => to_json_line(&json!({
            "baseline": baseline,
            "ablations": rows.iter().map(|(r, v)| json!({ "rule": r, "verdict": v })).collect::<Vec<_>>(),
        })),
        _ => {
            let mut s = format!("all rules: {}\n", verdict_word(baseline));
            for (r, v) in &rows {
                s.push_str(&format!("without {r}: {}\n", verdict_word(*v)));
            }
            s
        }
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
    })
}

fn io_failure(p: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, "io", format!("{}: {e}", p.display()))
}

fn write_file(p: &Path, body: &str) -> Result<(), Failure> {
    fs::write(p, body).map_err(|e| io_failure(p, e))
}

fn to_json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("report serializes");
    s.push('\n');
    s
}

fn wants_json(args: &[OsString]) -> bool {
    args.windows(2)
        .any(|w| w[0] == "--format" && w[1] == "json")
        || args.iter().any(|a| a == "--format=json")
}

/// Runs the command line `args` (including the program name) and returns
/// what to print on stdout and stderr with the exit code.
pub fn run<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return (EXIT_OK, e.to_string(), String::new());
            }
            let msg = e.to_string();
            return if wants_json(&args) {
                let text = msg
                    .lines()
                    .map(str::trim)
                    .take_while(|l| !l.starts_with("Usage:"))
                    .filter(|l| !l.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ");
                let text = text.trim_start_matches("error: ").to_string();
                (
                    EXIT_USAGE,
                    to_json_line(&json!({ "error": { "kind": "usage", "message": text } })),
                    String::new(),
                )
            } else {
                (EXIT_USAGE, String::new(), msg)
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(cli.format, a),
        Command::Verify(a) => verify(cli.format, a),
        Command::EnumerateBivariate(a) => enumerate(cli.format, a),
        Command::Simulate(a) => simulate(cli.format, a),
        Command::Ablate(a) => ablate(cli.format, a),
    };
    match result {
        Ok(o) => (o.code, o.stdout, String::new()),
        Err(f) if cli.format == Format::Json => (
            f.code,
            to_json_line(&json!({ "error": { "kind": f.kind, "message": f.message } })),
            String::new(),
        ),
        Err(f) => (f.code, String::new(), format!("error: {}\n", f.message)),
    }
}

pub fn main() -> i32 {
    let (code, out, err) = run(std::env::args_os());
    let _ = std::io::stdout().write_all(out.as_bytes());
    let _ = std::io::stderr().write_all(err.as_bytes());
    code
}
