mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use hobn::flowgraph::{bn_marginal, build_flow, extract_bn, is_acyclic, named_components};
use hobn::rewrite::{explore, is_bn_normal_form, normalize, reduction_graph};
use hobn::semantics::{check_compatibility, cost, interpret_global, interpret_inductive, posterior_query};
use hobn::syntax::{alpha_eq, Term};
use hobn::types::{check, Derivation, DerivationJson, GroundCtx, Name};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, format!("{what} = {got}, expected {want} ± {tol:e}"))
}

fn query(name: &str) -> hobn::Query {
    posterior_query::<f64>(&load(name), &GroundCtx::new(), FUEL).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn sprinkler() -> Outcome {
    let start = Instant::now();
    let q = query("sprinkler.hobn");
    let elapsed = start.elapsed();
    let ty = q.derivation.ty();
    let joint = at(&q.marginal, ty, &[true, true]);
    let oracle = brute_force(&load("sprinkler.hobn"), ty);
    within("P(R=t, W=t) against the oracle", joint, at(&oracle, ty, &[true, true]), 1e-12)?;
    within("P(R=t, W=t)", joint, 0.33, 5e-3)?;
    within("P(W=t)", q.evidence, 0.69, 5e-3)?;
    let post = at(&q.posterior, ty, &[true, true]);
    within("P(R=t | W=t)", post, 0.48, 5e-3)?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("P(R=t,W=t)={joint:.5} P(W=t)={:.5} P(R=t|W=t)={post:.5} in {elapsed:.1?}", q.evidence))
}

fn evidence() -> Outcome {
    let q = query("rain_wet.hobn");
    let ty = q.derivation.ty();
    let (tt, ft) = (at(&q.marginal, ty, &[true, true]), at(&q.marginal, ty, &[false, true]));
    within("unnormalised (t,t)", tt, 0.14, 1e-12)?;
    within("unnormalised (f,t)", ft, 0.008, 1e-12)?;
    within("evidence", q.evidence, 0.148, 1e-12)?;
    let (pt, pf) = (at(&q.posterior, ty, &[true, true]), at(&q.posterior, ty, &[false, true]));
    within("posterior t", pt, 0.946, 1e-3)?;
    within("posterior f", pf, 0.054, 1e-3)?;
    Ok(format!("{tt:.3}/{ft:.3} evidence {:.3} posterior {pt:.4}/{pf:.4}", q.evidence))
}

fn coin_learning() -> Outcome {
    let q = query("coin_learning.hobn");
    let ty = q.derivation.ty();
    let (t, f) = (at(&q.marginal, ty, &[true, true, true]), at(&q.marginal, ty, &[false, true, true]));
    within("joint X=t", t, 0.245, 1e-12)?;
    within("joint X=f", f, 0.08, 1e-12)?;
    within("evidence", q.evidence, 0.325, 1e-12)?;
    let (pt, pf) = (at(&q.posterior, ty, &[true, true, true]), at(&q.posterior, ty, &[false, true, true]));
    within("posterior t", pt, 0.753, 1e-3)?;
    within("posterior f", pf, 0.246, 1e-3)?;
    Ok(format!("{t:.3}/{f:.3} evidence {:.3} posterior {pt:.4}/{pf:.4}", q.evidence))
}

fn chain_cost() -> Outcome {
    let d1 = derive(&load("chain_t1.hobn"));
    let d2 = derive(&load("chain_t2.hobn"));
    let (c1, c2) = (cost(&d1).map_err(|e| e.to_string())?, cost(&d2).map_err(|e| e.to_string())?);
    ensure(c1.multiplications == 12, format!("t1 costs {}", c1.multiplications))?;
    ensure(c2.multiplications == 8, format!("t2 costs {}", c2.multiplications))?;
    let m1 = interpret_global::<f64>(&d1).map_err(|e| e.to_string())?;
    let m2 = interpret_global::<f64>(&d2).map_err(|e| e.to_string())?;
    let gap = diff(&m1, &m2);
    ensure(gap <= 1e-12, format!("marginals differ by {gap:e}"))?;
    Ok(format!("t1={} t2={} marginal gap {gap:e}", c1.multiplications, c2.multiplications))
}

fn oracle_equivalence(programs: &[Term]) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for t in programs {
        let d = derive(t);
        let global = interpret_global::<f64>(&d).map_err(|e| e.to_string())?;
        let inductive = interpret_inductive::<f64>(&d).map_err(|e| e.to_string())?.factor;
        let oracle = brute_force(t, d.ty());
        let gap = diff(&global, &inductive).max(diff(&global, &oracle));
        ensure(gap <= 1e-12, format!("{t}: gap {gap:e}"))?;
        ensure(d.names().len() <= 6, format!("{t}: more than 6 names"))?;
        worst = worst.max(gap);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{} programs, worst gap {worst:e}, {elapsed:.1?}", programs.len()))
}

fn extraction(programs: &[Term]) -> Outcome {
    let mut all: Vec<Term> = programs.to_vec();
    for name in ["two_coins.hobn", "coin_tosses.hobn", "hmm1.hobn", "hmm2.hobn", "hmm3.hobn"] {
        all.push(load(name));
    }
    let mut worst = 0.0f64;
    for t in &all {
        let d = derive(t);
        let bn = extract_bn::<f64>(&d).map_err(|e| e.to_string())?;
        ensure(bn.is_acyclic(), format!("{t}: cyclic network"))?;
        let keep: BTreeSet<Name> = d.judgment.names();
        let from_bn = bn_marginal(&bn, &keep).map_err(|e| e.to_string())?;
        let global = interpret_global::<f64>(&d).map_err(|e| e.to_string())?;
        let gap = diff(&from_bn, &global);
        ensure(gap <= 1e-12, format!("{t}: gap {gap:e}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("{} programs, worst gap {worst:e}", all.len()))
}

fn confluence() -> Outcome {
    let terms = disguised(7, 200, 0.6);
    let mut steps = 0;
    for t in &terms {
        let lengths = reduction_graph(t, FUEL).map_err(|e| e.to_string())?;
        ensure(lengths.len() == 1, format!("{t}: lengths {lengths:?}"))?;
        let nf = normalize(t, FUEL).map_err(|e| e.to_string())?;
        let e = explore(t, 100_000);
        ensure(e.complete, format!("{t}: exploration incomplete"))?;
        for other in &e.normal_forms {
            ensure(alpha_eq(other, nf.result()), format!("{t}: normal forms {other} and {}", nf.result()))?;
        }
        steps += nf.len();
    }
    Ok(format!("{} terms, {steps} steps in total", terms.len()))
}

const GOLDEN: [&str; 9] = [
    "program1.hobn",
    "sprinkler.hobn",
    "rain_wet.hobn",
    "coin_learning.hobn",
    "two_coins.hobn",
    "chain_t1.hobn",
    "chain_t2.hobn",
    "higher_order.hobn",
    "hmm2.hobn",
];

/// Derivations of each term along the leftmost-outermost trace.
fn along(t: &Term) -> Result<Vec<Derivation>, String> {
    let trace = normalize(t, FUEL).map_err(|e| e.to_string())?;
    Ok(trace.terms.iter().map(derive).collect())
}

fn invariance() -> Outcome {
    let mut count = 0;
    for name in GOLDEN {
        let ds = along(&load(name))?;
        let target = interpret_global::<f64>(ds.last().expect("normal form")).map_err(|e| e.to_string())?;
        for (i, d) in ds.iter().enumerate() {
            let here = interpret_global::<f64>(d).map_err(|e| e.to_string())?;
            let gap = diff(&here, &target);
            ensure(gap <= 1e-12, format!("{name} step {i}: gap {gap:e}"))?;
            count += 1;
        }
    }
    Ok(format!("{count} derivations along {} traces", GOLDEN.len()))
}

fn structure(d: &Derivation) -> Result<(), String> {
    let g = build_flow(d);
    ensure(is_acyclic(&g), "flow graph has a cycle")?;
    named_components(&g).map_err(|e| e.to_string())?;
    let mut compatible = true;
    d.walk(&mut |n| compatible &= check_compatibility(&n.premises.iter().collect::<Vec<_>>()));
    ensure(compatible, "incompatible premises")
}

fn structural(programs: &[Term]) -> Outcome {
    let mut derivations = 0;
    for t in programs.iter().chain(&disguised(7, 200, 0.6)) {
        structure(&derive(t)).map_err(|e| format!("{t}: {e}"))?;
        derivations += 1;
    }
    let mut traces = 0;
    for name in GOLDEN.iter().chain(&["hmm3.hobn", "coin_tosses.hobn"]) {
        let ds = along(&load(name))?;
        for (i, w) in ds.windows(2).enumerate() {
            ensure(w[1].measure() < w[0].measure(), format!("{name}: measure grows at step {i}"))?;
        }
        for d in &ds {
            structure(d).map_err(|e| format!("{name}: {e}"))?;
        }
        derivations += ds.len();
        traces += 1;
    }
    Ok(format!("{derivations} derivations, measure decreasing along {traces} traces"))
}

fn hmm_template() -> Outcome {
    let t = load("hmm3.hobn");
    let nf = normalize(&t, FUEL).map_err(|e| e.to_string())?;
    ensure(is_bn_normal_form(nf.result()), "normal form is not a network normal form")?;
    let mut primitives = 0;
    nf.result().walk(&mut |s| primitives += matches!(s, Term::Sample(_) | Term::Case(..)) as usize);
    ensure(primitives == 7, format!("{primitives} probabilistic primitives"))?;
    let d = derive(&t);
    ensure(d.names().len() == 7, format!("derivation carries {} names", d.names().len()))?;
    let bn = extract_bn::<f64>(&d).map_err(|e| e.to_string())?;
    ensure(bn.nodes.len() == 7, format!("{} nodes", bn.nodes.len()))?;
    let children = |x: &Name| -> Vec<Name> {
        bn.nodes.iter().filter(|n| n.parents.contains(x)).map(|n| n.name.clone()).collect()
    };
    let roots: Vec<&Name> = bn.nodes.iter().filter(|n| n.parents.is_empty()).map(|n| &n.name).collect();
    ensure(roots.len() == 1, format!("roots {roots:?}"))?;
    let first = children(roots[0]);
    ensure(first.len() == 1, format!("initial state has successors {first:?}"))?;
    let mut state = first[0].clone();
    let mut emissions = Vec::new();
    for step in 1..=3 {
        let (leaves, inner): (Vec<Name>, Vec<Name>) = children(&state).into_iter().partition(|c| children(c).is_empty());
        let expect_inner = usize::from(step < 3);
        ensure(
            leaves.len() == 1 && inner.len() == expect_inner,
            format!("state {step}: emissions {leaves:?}, successors {inner:?}"),
        )?;
        emissions.push(leaves[0].clone());
        if let Some(next) = inner.first() {
            state = next.clone();
        }
    }
    ensure(bn.edges().len() == 6, format!("{} edges", bn.edges().len()))?;
    let ty_names = d.ty().names();
    ensure(emissions.iter().all(|e| ty_names.contains(e)), "emissions are not all returned")?;
    ensure(ty_names.contains(&state), "final state is not returned")?;
    Ok("7 primitives, 7 names, 4 chained states each emitting once".to_string())
}

fn negative_fixtures() -> Outcome {
    let src = std::fs::read_to_string(corpus("clashing_names.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&src).map_err(|e| e.to_string())?;
    let j: DerivationJson = serde_json::from_value(v["derivation"].clone()).map_err(|e| e.to_string())?;
    let d = Derivation::from_json(&j).map_err(|e| e.to_string())?;
    let rejected = check(&d).err().ok_or("name clash accepted")?;
    ensure(!check_compatibility(&d.premises.iter().collect::<Vec<_>>()), "root premises compatible")?;
    let status = Command::new(env!("CARGO_BIN_EXE_hobn"))
        .args(["infer", "--posterior"])
        .arg(corpus("impossible.hobn"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.code() == Some(5), format!("exit status {:?}", status.status.code()))?;
    Ok(format!("{rejected}; impossible observation exits with 5"))
}

fn main() {
    let programs = programs(2024, 500);
    let criteria: Vec<Criterion> = vec![
        ("sprinkler posterior", Box::new(sprinkler)),
        ("evidence on rain and wet grass", Box::new(evidence)),
        ("coin bias learning", Box::new(coin_learning)),
        ("multiplication count of the two chains", Box::new(chain_cost)),
        ("oracle equivalence on 500 programs", Box::new(|| oracle_equivalence(&programs))),
        ("network extraction preserves the semantics", Box::new(|| extraction(&programs))),
        ("confluence on 200 terms", Box::new(confluence)),
        ("invariance along reductions", Box::new(invariance)),
        ("acyclicity, named paths, compatibility and measure", Box::new(|| structural(&programs))),
        ("hidden Markov template unrolled three times", Box::new(hmm_template)),
        ("negative fixtures", Box::new(negative_fixtures)),
    ];
    let mut failed = 0;
    for (i, (label, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {label}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {label}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

