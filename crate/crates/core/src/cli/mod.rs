//! The `hobn` command line.

mod suite;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

pub use suite::{check_suite, verify, Finding, ProgramReport, SuiteReport};

use crate::factors::{Factor, FactorError, Scalar};
use crate::flowgraph::{build_flow, extract_bn, BayesianNetwork};
use crate::rewrite::{default_fuel, normalize, FuelExhausted};
use crate::semantics::{interpret_inductive, posterior_query, CostReport, SemanticsError};
use crate::syntax::{parse, pretty, SyntaxError, Term};
use crate::types::{check, infer_ground, Derivation, DerivationJson, GroundCtx, InferError, TypeError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fuel(#[from] FuelExhausted),
    #[error("zero evidence: the observations have probability zero")]
    ZeroEvidence,
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Internal(String),
    #[error("{failed} of {total} programs failed the checks")]
    Suite { failed: usize, total: usize },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_) => 2,
            CliError::Type(_) => 3,
            CliError::Fuel(_) => 4,
            CliError::ZeroEvidence => 5,
            _ => 1,
        }
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::Type(t) => CliError::Type(t),
            InferError::Fuel(f) => CliError::Fuel(f),
        }
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::ZeroEvidence => CliError::ZeroEvidence,
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<SemanticsError> for CliError {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::Type(t) => CliError::Type(t),
            SemanticsError::Check(c) => CliError::Type(c.into()),
            SemanticsError::Fuel(f) => CliError::Fuel(f),
            SemanticsError::Factor(f) => f.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("fuel must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "hobn", version, about = "Typed probabilistic programs as Bayesian networks")]
pub struct Cli {
    /// Maximum number of reduction steps [default: $HOBN_FUEL or 100000]
    #[arg(long, global = true, value_parser = positive)]
    pub fuel: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Program file
    pub file: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the core term of a program
    Parse(Input),
    /// Normalise a program
    Reduce {
        #[command(flatten)]
        input: Input,
        /// Print every step
        #[arg(long)]
        trace: bool,
    },
    /// Infer a typing derivation, or check one given as JSON
    Type {
        #[command(flatten)]
        input: Input,
        /// Drop observations not forced by an `obs`
        #[arg(long)]
        general: bool,
        #[arg(long)]
        show_derivation: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compute the distribution of the program's result
    Infer {
        #[command(flatten)]
        input: Input,
        /// Also print the evidence and the normalised posterior
        #[arg(long)]
        posterior: bool,
        /// Also print the multiplication count
        #[arg(long)]
        cost: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the derivation annotated with the cost of each rule
    Cost {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        json: bool,
    },
    /// Print the extracted Bayesian network or the flow graph
    Graph {
        #[command(flatten)]
        input: Input,
        #[arg(long, conflicts_with = "bn")]
        flow: bool,
        #[arg(long)]
        bn: bool,
        /// Write Graphviz output to this file (`-` for standard output)
        #[arg(long, value_name = "OUT")]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the self-checks on a corpus and on random programs
    Check {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random programs
        #[arg(long, default_value_t = 25)]
        random: usize,
        #[arg(long)]
        json: bool,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load(path: &Path) -> Result<Term, CliError> {
    Ok(parse(&read(path)?)?)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn cost_json(c: &CostReport) -> serde_json::Value {
    json!({
        "multiplications": c.multiplications,
        "additions": c.additions,
        "axioms": c.axioms,
        "names": c.names,
        "width": c.width,
        "bound_inductive": c.bound_inductive.to_string(),
        "bound_global": c.bound_global.to_string(),
    })
}

fn cost_text(c: &CostReport) -> String {
    format!(
        "multiplications: {}\nadditions: {}\naxioms: {}\nnames: {}\nwidth: {}\nbound m*2^W: {}\nbound m*2^n: {}\n",
        c.multiplications, c.additions, c.axioms, c.names, c.width, c.bound_inductive, c.bound_global
    )
}

fn load_derivation(path: &Path) -> Result<Derivation, CliError> {
    let value: serde_json::Value = serde_json::from_str(&read(path)?)?;
    let body = value.get("derivation").cloned().unwrap_or(value);
    let j: DerivationJson = serde_json::from_value(body)?;
    Ok(Derivation::from_json(&j)?)
}

fn network_text<S: Scalar>(bn: &BayesianNetwork<S>) -> String {
    let mut out = String::new();
    for n in &bn.nodes {
        let parents: Vec<String> = n.parents.iter().map(ToString::to_string).collect();
        out.push_str(&format!("{} | {}\n{}", n.name, parents.join(", "), n.cpt.to_ascii()));
    }
    let query: Vec<String> = bn.query.iter().map(ToString::to_string).collect();
    out.push_str(&format!("query: {}\n", query.join(", ")));
    out
}

fn factor_block(label: &str, f: &Factor) -> String {
    format!("{label}:\n{}", f.to_ascii())
}

/// Executes one command, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let fuel = cli.fuel.unwrap_or_else(default_fuel);
    match &cli.command {
        Command::Parse(input) => {
            let t = load(&input.file)?;
            emit(out, &format!("{}\n", pretty(&t)))
        }
        Command::Reduce { input, trace } => {
            let t = load(&input.file)?;
            let tr = normalize(&t, fuel)?;
            if *trace {
                emit(out, &format!("{}\n", pretty(&tr.terms[0])))?;
                for (i, (path, rule)) in tr.steps.iter().enumerate() {
                    emit(out, &format!("--{rule} at {path:?}-->\n{}\n", pretty(&tr.terms[i + 1])))?;
                }
            } else {
                emit(out, &format!("{}\n", pretty(tr.result())))?;
            }
            emit(out, &format!("steps: {}\n", tr.len()))
        }
        Command::Type { input, general, show_derivation, json } => {
            let is_json = input.file.extension().is_some_and(|e| e == "json");
            let mut d = if is_json {
                let d = load_derivation(&input.file)?;
                check(&d).map_err(TypeError::from)?;
                d
            } else {
                let d = infer_ground(&load(&input.file)?, &GroundCtx::new(), fuel)?;
                check(&d).map_err(TypeError::from)?;
                d
            };
            if *general {
                d = d.generalize();
            }
            if *json {
                emit(out, &format!("{}\n", serde_json::to_string_pretty(&d.to_json())?))
            } else {
                emit(out, &format!("type: {}\n", d.ty()))?;
                if *show_derivation {
                    emit(out, &d.to_text())?;
                }
                Ok(())
            }
        }
        Command::Infer { input, posterior, cost, json } => {
            let t = load(&input.file)?;
            let q = posterior_query::<f64>(&t, &GroundCtx::new(), fuel)?;
            for w in &q.bn.warnings {
                emit(err, &format!("warning: {w}\n"))?;
            }
            if *json {
                let mut v = json!({
                    "type": q.derivation.ty().to_string(),
                    "marginal": q.marginal.to_json(),
                });
                if *posterior {
                    v["evidence"] = json!(q.evidence);
                    v["posterior"] = serde_json::to_value(q.posterior.to_json())?;
                }
                if *cost {
                    v["cost"] = cost_json(&q.cost);
                }
                return emit(out, &format!("{}\n", serde_json::to_string_pretty(&v)?));
            }
            let mut text = format!("type: {}\n{}", q.derivation.ty(), factor_block("marginal", &q.marginal));
            if *posterior {
                text.push_str(&format!("evidence: {:.6}\n{}", q.evidence, factor_block("posterior", &q.posterior)));
            }
            if *cost {
                text.push_str(&cost_text(&q.cost));
            }
            emit(out, &text)
        }
        Command::Cost { input, json } => {
            let d = infer_ground(&load(&input.file)?, &GroundCtx::new(), fuel)?;
            check(&d).map_err(TypeError::from)?;
            let dec = interpret_inductive::<f64>(&d)?;
            let report = CostReport::from_decorated(&dec);
            if *json {
                emit(out, &format!("{}\n", serde_json::to_string_pretty(&cost_json(&report))?))
            } else {
                emit(out, &format!("{}{}", dec.to_text(), cost_text(&report)))
            }
        }
        Command::Graph { input, flow, bn: _, dot, json } => {
            let d = infer_ground(&load(&input.file)?, &GroundCtx::new(), fuel)?;
            check(&d).map_err(TypeError::from)?;
            let (text, dot_text, json_value) = if *flow {
                let g = build_flow(&d);
                let mut text = String::new();
                for (i, v) in g.vertices.iter().enumerate() {
                    text.push_str(&format!("p{i} {v} {:?}\n", v.polarity));
                }
                for (a, b) in &g.edges {
                    text.push_str(&format!("p{a} -> p{b}\n"));
                }
                (text, g.to_dot(), g.to_json())
            } else {
                let net = extract_bn::<f64>(&d)?;
                for w in &net.warnings {
                    emit(err, &format!("warning: {w}\n"))?;
                }
                (network_text(&net), net.to_dot(), serde_json::to_value(net.to_json())?)
            };
            match dot {
                Some(p) if p.as_os_str() == "-" => emit(out, &dot_text),
                Some(p) => fs::write(p, dot_text).map_err(|e| CliError::io(p, e)),
                None if *json => emit(out, &format!("{}\n", serde_json::to_string_pretty(&json_value)?)),
                None => emit(out, &text),
            }
        }
        Command::Check { dir, seed, random, json } => {
            let report = check_suite(dir, *seed, *random, fuel)?;
            if *json {
                emit(out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            } else {
                emit(out, &report.to_text())?;
            }
            if report.failed > 0 {
                return Err(CliError::Suite { failed: report.failed, total: report.programs.len() });
            }
            Ok(())
        }
    }
}

/// Parses arguments, runs, reports errors on standard error and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hobn: {e}");
            e.exit_code()
        }
    }
}
