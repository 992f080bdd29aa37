//! Self-checks run over a directory of programs and random programs.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::CliError;
use crate::factors::{Factor, FactorError};
use crate::flowgraph::{bn_marginal, BayesianNetwork, build_flow, extract_bn, is_acyclic, named_components};
use crate::generate::{first_order, with_redexes, Limits};
use crate::oracle;
use crate::rewrite::{explore, normalize, reduction_graph};
use crate::semantics::{cost, derivations_along, interpret_global, interpret_inductive, posterior_query, static_cost, CostReport, SemanticsError};
use crate::syntax::{alpha_eq, parse, Term};
use crate::types::{check, infer_ground, Derivation, DerivationJson, GroundCtx};

const TOLERANCE: f64 = 1e-12;
const EXPLORE_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub check: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProgramReport {
    pub name: String,
    pub findings: Vec<Finding>,
}

impl ProgramReport {
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.ok)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub programs: Vec<ProgramReport>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    fn push(&mut self, p: ProgramReport) {
        if p.passed() {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.programs.push(p);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.programs {
            let status = if p.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {}\n", p.name));
            for f in p.findings.iter().filter(|f| !f.ok) {
                out.push_str(&format!("  {}: {}\n", f.check, f.detail));
            }
        }
        out.push_str(&format!("{} passed, {} failed\n", self.passed, self.failed));
        out
    }
}

struct Findings(Vec<Finding>);

impl Findings {
    fn record(&mut self, check: &str, result: Result<String, String>) {
        let (ok, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.0.push(Finding { check: check.to_string(), ok, detail });
    }
}

fn agree(what: &str, a: &Factor, b: &Factor) -> Result<String, String> {
    match a.max_abs_diff(b) {
        Some(d) if d <= TOLERANCE => Ok(format!("{what}: max difference {d:e}")),
        Some(d) => Err(format!("{what}: max difference {d:e}")),
        None => Err(format!("{what}: scopes differ")),
    }
}

/// Runs every semantic and structural check on a program expected to have
/// a well-defined posterior.
pub fn verify(t: &Term, fuel: usize) -> Vec<Finding> {
    let mut f = Findings(Vec::new());
    let (d, net, c) = match analyse(t, fuel) {
        Ok(x) => x,
        Err(e) => {
            f.record("typing", Err(e.to_string()));
            return f.0;
        }
    };
    let d = &d;
    f.record("check", check(d).map(|_| "derivation accepted".into()).map_err(|e| e.to_string()));
    let global = interpret_global::<f64>(d);
    let inductive = interpret_inductive::<f64>(d);
    let nf = normalize(t, fuel).map(|tr| tr.result().clone());
    match (&global, &inductive) {
        (Ok(g), Ok(dec)) => {
            f.record("compositional", agree("inductive vs global", &dec.factor, g));
            let brute = nf
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|n| oracle::marginal::<f64>(n, d.ty()).map_err(|e| e.to_string()));
            f.record("oracle", brute.and_then(|o| agree("oracle vs global", &o, g)));
            let keep = d.judgment.names();
            let bn = bn_marginal(&net, &keep).map_err(|e| e.to_string());
            f.record("bn", bn.and_then(|b| agree("network vs global", &b, g)));
            let fixed = static_cost(d);
            f.record(
                "cost",
                if fixed != c.multiplications {
                    Err(format!("static cost {fixed} differs from measured {}", c.multiplications))
                } else if (c.multiplications as u128) > c.bound_inductive || c.bound_inductive > c.bound_global {
                    Err(format!("bounds violated: {c:?}"))
                } else {
                    Ok(format!("{} multiplications", c.multiplications))
                },
            );
        }
        (Err(e), _) => f.record("global", Err(e.to_string())),
        (_, Err(e)) => f.record("compositional", Err(e.to_string())),
    }
    let flow = build_flow(d);
    f.record(
        "acyclic",
        if is_acyclic(&flow) { Ok(format!("{} positions", flow.vertices.len())) } else { Err("flow graph has a cycle".into()) },
    );
    f.record(
        "named paths",
        named_components(&flow).map(|c| format!("{} names", c.len())).map_err(|e| e.to_string()),
    );
    f.record(
        "extraction",
        if flow.collapse() != net.edges() {
            Err("collapsed flow graph differs from the network".into())
        } else if !net.is_acyclic() {
            Err("network has a cycle".into())
        } else {
            Ok(format!("{} nodes", net.nodes.len()))
        },
    );
    f.record("confluence", confluence(t, fuel));
    f.record("invariance", invariance(t, fuel));
    f.0
}

fn analyse(t: &Term, fuel: usize) -> Result<(Derivation, BayesianNetwork, CostReport), SemanticsError> {
    let d = infer_ground(t, &GroundCtx::new(), fuel)?;
    check(&d)?;
    let net = extract_bn(&d)?;
    let c = cost(&d)?;
    Ok((d, net, c))
}

fn confluence(t: &Term, fuel: usize) -> Result<String, String> {
    let lengths = reduction_graph(t, fuel).map_err(|e| e.to_string())?;
    if lengths.len() != 1 {
        return Err(format!("normal forms reached in {lengths:?} steps"));
    }
    let nf = normalize(t, fuel).map_err(|e| e.to_string())?;
    let e = explore(t, EXPLORE_LIMIT);
    if let Some(other) = e.normal_forms.iter().find(|n| !alpha_eq(n, nf.result())) {
        return Err(format!("distinct normal form {other}"));
    }
    Ok(format!("{lengths:?} steps, {} terms{}", e.nodes, if e.complete { "" } else { " (partial)" }))
}

fn invariance(t: &Term, fuel: usize) -> Result<String, String> {
    let (terms, ds) = derivations_along(t, fuel).map_err(|e| e.to_string())?;
    let last = ds.last().expect("normal form derivation");
    let target = interpret_global::<f64>(last).map_err(|e| e.to_string())?;
    for (i, (term, d)) in terms.iter().zip(&ds).enumerate() {
        check(d).map_err(|e| format!("step {i}: {e}"))?;
        if d.subject() != term {
            return Err(format!("step {i}: derivation types another term"));
        }
        let here = interpret_global::<f64>(d).map_err(|e| e.to_string())?;
        agree(&format!("step {i}"), &here, &target)?;
    }
    for (i, w) in ds.windows(2).enumerate() {
        if w[1].measure() >= w[0].measure() {
            return Err(format!("measure does not decrease at step {i}"));
        }
    }
    Ok(format!("{} steps", ds.len() - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Expect {
    Ok,
    TypeError,
    ZeroEvidence,
    Diverges,
}

fn expectation(src: &str) -> Expect {
    for line in src.lines().map(str::trim).take_while(|l| l.starts_with('#')) {
        match line.trim_start_matches('#').trim() {
            "expect: type-error" => return Expect::TypeError,
            "expect: zero-evidence" => return Expect::ZeroEvidence,
            "expect: diverges" => return Expect::Diverges,
            _ => {}
        }
    }
    Expect::Ok
}

fn verify_source(src: &str, fuel: usize) -> Vec<Finding> {
    let mut f = Findings(Vec::new());
    let t = match parse(src) {
        Ok(t) => t,
        Err(e) => {
            f.record("parse", Err(e.to_string()));
            return f.0;
        }
    };
    match expectation(src) {
        Expect::Ok => return verify(&t, fuel),
        Expect::TypeError => {
            let r = posterior_query::<f64>(&t, &GroundCtx::new(), fuel);
            f.record(
                "type-error",
                match r {
                    Err(SemanticsError::Type(e)) => Ok(e.to_string()),
                    Err(SemanticsError::Check(e)) => Ok(e.to_string()),
                    Err(e) => Err(format!("expected a type error, got: {e}")),
                    Ok(_) => Err("expected a type error, program was accepted".into()),
                },
            );
        }
        Expect::ZeroEvidence => {
            let r = posterior_query::<f64>(&t, &GroundCtx::new(), fuel);
            f.record(
                "zero-evidence",
                match r {
                    Err(SemanticsError::Factor(FactorError::ZeroEvidence)) => Ok("evidence has probability zero".into()),
                    Err(e) => Err(format!("expected zero evidence, got: {e}")),
                    Ok(q) => Err(format!("expected zero evidence, got {}", q.evidence)),
                },
            );
        }
        Expect::Diverges => {
            f.record(
                "diverges",
                match normalize(&t, fuel.min(10_000)) {
                    Err(e) => Ok(e.to_string()),
                    Ok(tr) => Err(format!("normalised in {} steps", tr.len())),
                },
            );
        }
    }
    f.0
}

#[derive(serde::Deserialize)]
struct Fixture {
    expect: String,
    derivation: DerivationJson,
}

fn verify_fixture(src: &str) -> Vec<Finding> {
    let mut f = Findings(Vec::new());
    let result = serde_json::from_str::<Fixture>(src)
        .map_err(|e| e.to_string())
        .and_then(|fx| {
            let d = Derivation::from_json(&fx.derivation).map_err(|e| e.to_string());
            match (fx.expect.as_str(), d) {
                ("type-error", Ok(d)) => match check(&d) {
                    Err(e) => Ok(e.to_string()),
                    Ok(()) => Err("expected the derivation to be rejected".into()),
                },
                ("type-error", Err(e)) => Ok(e),
                ("ok", Ok(d)) => check(&d).map(|_| "derivation accepted".into()).map_err(|e| e.to_string()),
                (other, _) => Err(format!("unknown expectation `{other}`")),
            }
        });
    f.record("fixture", result);
    f.0
}

/// Checks every `.hobn` program and `.json` derivation fixture in `dir`,
/// then `random` generated programs seeded with `seed`.
pub fn check_suite(dir: &Path, seed: u64, random: usize, fuel: usize) -> Result<SuiteReport, CliError> {
    let mut report = SuiteReport::default();
    let mut files: BTreeSet<std::path::PathBuf> = BTreeSet::new();
    if dir.exists() {
        let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            if matches!(path.extension().and_then(|e| e.to_str()), Some("hobn" | "json")) {
                files.insert(path);
            }
        }
    } else {
        return Err(CliError::io(dir, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    for path in files {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let findings = match fs::read_to_string(&path) {
            Err(e) => vec![Finding { check: "read".into(), ok: false, detail: e.to_string() }],
            Ok(src) if name.ends_with(".json") => verify_fixture(&src),
            Ok(src) => verify_source(&src, fuel),
        };
        report.push(ProgramReport { name, findings });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random {
        let t = first_order(&mut rng, Limits::default());
        let t = with_redexes(&mut rng, &t, 0.3);
        let findings = verify(&t, fuel);
        report.push(ProgramReport { name: format!("random-{seed}-{i}"), findings });
    }
    Ok(report)
}
