mod common;

use std::collections::BTreeSet;

use common::*;
use hobn::factors::Factor;
use hobn::flowgraph::{bn_semantics, build_flow, extract_bn, is_acyclic, named_components, FlowGraph, Polarity, Position, Slot};
use hobn::semantics::{axiom_factor, cost, interpret_global, interpret_inductive, posterior_query};
use hobn::syntax::parse_core;
use hobn::types::{Derivation, GroundCtx, Judgment, Name, RuleName};

fn axiom(rule: RuleName, ground: &[(&str, &str)], subject: &str, ty: &str) -> Derivation {
    let mut j = Judgment::new(parse_core(subject).unwrap(), ty.parse().unwrap());
    for (x, t) in ground {
        j.ground.insert((*x).into(), t.parse().unwrap());
    }
    Derivation::new(rule, j, vec![])
}

const WET: &str = "case r of { t => sample bern(0.7); f => sample bern(0.01) }";

fn edge_names(pairs: &[(&str, &str)]) -> BTreeSet<(Name, Name)> {
    pairs.iter().map(|(a, b)| (Name::from(*a), Name::from(*b))).collect()
}

#[test]
fn sample_axiom_is_its_distribution() {
    let f: Factor = axiom_factor(&axiom(RuleName::Sample, &[], "sample bern(0.2)", "R")).unwrap();
    assert_eq!(f.value(&[("R", true)]), Some(0.2));
    assert!((f.value(&[("R", false)]).unwrap() - 0.8).abs() <= 1e-12);
}

#[test]
fn cond_axiom_reads_the_table() {
    let f: Factor = axiom_factor(&axiom(RuleName::Cond, &[("r", "R")], WET, "W")).unwrap();
    assert_eq!(f.len(), 4);
    assert!((f.value(&[("R", true), ("W", false)]).unwrap() - 0.3).abs() <= 1e-12);
}

#[test]
fn observed_cond_keeps_the_evidence_column() {
    let f: Factor = axiom_factor(&axiom(RuleName::Cond, &[("r", "R")], WET, "W^t")).unwrap();
    assert_eq!(f.len(), 2);
    assert_eq!(f.value(&[("R", true), ("W", true)]), Some(0.7));
    assert_eq!(f.value(&[("R", false), ("W", true)]), Some(0.01));
}

#[test]
fn deterministic_axioms_are_trivial() {
    let var = axiom(RuleName::Var, &[("x", "X")], "x", "X");
    let obs = axiom(RuleName::Obs, &[("x", "X^t")], "obs(x = t)", "X^t");
    for d in [&var, &obs] {
        assert_eq!(interpret_global::<f64>(d).unwrap(), Factor::one());
        assert_eq!(interpret_inductive::<f64>(d).unwrap().factor, Factor::one());
        assert_eq!(cost(d).unwrap().multiplications, 0);
    }
    let sample = axiom(RuleName::Sample, &[], "sample bern(0.4)", "X");
    assert_eq!(cost(&sample).unwrap().multiplications, 0);
}

#[test]
fn sprinkler_marginal_matches_enumeration() {
    let t = load("program1.hobn");
    let d = derive(&t);
    let global = interpret_global::<f64>(&d).unwrap();
    assert_eq!(global.names().len(), 1);
    assert!(diff(&global, &brute_force(&t, d.ty())) <= 1e-12);
    let wet = 0.6 * (0.8 * 0.2 * 0.99 + 0.8 * 0.8 * 0.7 + 0.2 * 0.2 * 0.9 + 0.2 * 0.8 * 0.01)
        + 0.4 * (0.1 * 0.75 * 0.99 + 0.1 * 0.25 * 0.7 + 0.9 * 0.75 * 0.9 + 0.9 * 0.25 * 0.01);
    assert!((at(&global, d.ty(), &[true]) - wet).abs() <= 1e-12);
}

#[test]
fn chain_costs_and_widths() {
    let t1 = derive(&load("chain_t1.hobn"));
    let t2 = derive(&load("chain_t2.hobn"));
    let c1 = cost(&t1).unwrap();
    let c2 = cost(&t2).unwrap();
    assert_eq!((c1.multiplications, c2.multiplications), (12, 8));
    assert!(c1.width >= c2.width);
    let dec = interpret_inductive::<f64>(&t2).unwrap();
    assert!(dec.nodes().iter().all(|n| n.factor.names().len() <= 2));
    assert!(diff(&dec.factor, &interpret_global::<f64>(&t1).unwrap()) <= 1e-12);
}

#[test]
fn unobserved_query_posterior_is_the_normalized_marginal() {
    let q = posterior_query::<f64>(&load("program1.hobn"), &GroundCtx::new(), FUEL).unwrap();
    assert!((q.evidence - 1.0).abs() <= 1e-12);
    assert!(diff(&q.posterior, &q.marginal) <= 1e-12);
}

#[test]
fn sprinkler_flow_graph() {
    let d = derive(&load("program1.hobn"));
    let g = build_flow(&d);
    assert_eq!(g.vertices.len(), 19);
    assert!(is_acyclic(&g));
    let names: BTreeSet<Name> = d.names();
    let comps = named_components(&g).unwrap();
    assert_eq!(comps.len(), 4);
    let conclusion = d.ty().as_atom().unwrap().name.clone();
    assert_eq!(comps[&conclusion].root, g.axiom_roots[&conclusion]);
    let bn = extract_bn::<f64>(&d).unwrap();
    assert_eq!(bn.names(), names);
    assert_eq!(g.collapse(), bn.edges());
    assert_eq!(bn.edges().len(), 4);
    let dot = bn.to_dot();
    assert_eq!(dot.matches("->").count(), 4);
    assert_eq!(dot.matches("label=").count(), 4);
}

#[test]
fn sprinkler_network_has_the_textbook_shape() {
    let t = parse_core(
        "let d = sample bern(0.6) in \
         let r = case d of { t => sample bern(0.8); f => sample bern(0.1) } in \
         let s = case d of { t => sample bern(0.2); f => sample bern(0.75) } in \
         let w = case <r, s> of { <t, t> => sample bern(0.99); <t, f> => sample bern(0.7); <f, t> => sample bern(0.9); <f, f> => sample bern(0.01) } in \
         <d, s, r, w>",
    )
    .unwrap();
    let d = derive(&t);
    let rename: Vec<Name> = d.ty().atoms().iter().map(|a| a.name.clone()).collect();
    let label = |n: &Name| ["D", "S", "R", "W"][rename.iter().position(|m| m == n).unwrap()];
    let bn = extract_bn::<f64>(&d).unwrap();
    let edges: BTreeSet<(Name, Name)> = bn.edges().iter().map(|(a, b)| (Name::from(label(a)), Name::from(label(b)))).collect();
    assert_eq!(edges, edge_names(&[("D", "S"), ("D", "R"), ("S", "W"), ("R", "W")]));
    let joint = bn_semantics(&bn).unwrap();
    let all: Vec<(&str, bool)> = rename.iter().map(|n| (n.as_str(), true)).collect();
    assert!((joint.value(&all).unwrap() - 0.09504).abs() <= 1e-12);
}

#[test]
fn evidence_network() {
    let d = derive(&load("rain_wet.hobn"));
    let bn = extract_bn::<f64>(&d).unwrap();
    assert_eq!(bn.nodes.len(), 2);
    let joint = bn_semantics(&bn).unwrap();
    let mut entries = joint.table().to_vec();
    entries.sort_by(f64::total_cmp);
    assert_eq!(entries.len(), 2);
    assert!((entries[0] - 0.008).abs() <= 1e-12 && (entries[1] - 0.14).abs() <= 1e-12);
}

#[test]
fn single_sample_graph() {
    let d = axiom(RuleName::Sample, &[], "sample bern(0.2)", "X");
    let g = build_flow(&d);
    assert_eq!((g.vertices.len(), g.edges.len()), (1, 0));
    let comps = named_components(&g).unwrap();
    assert_eq!(comps[&Name::from("X")].positions, vec![0]);
    let bn = extract_bn::<f64>(&d).unwrap();
    assert_eq!(bn_semantics(&bn).unwrap(), axiom_factor::<f64>(&d).unwrap());
}

#[test]
fn cycles_are_detected() {
    let mut g = FlowGraph::default();
    for node in 0..2 {
        g.vertices.push(Position { node, slot: Slot::Subject, path: vec![], name: Name::from("X"), polarity: Polarity::Output });
    }
    g.edges = vec![(0, 1), (1, 0)];
    assert!(!is_acyclic(&g));
    g.edges.pop();
    assert!(is_acyclic(&g));
}

#[test]
fn empty_graph_exports_an_empty_digraph() {
    assert_eq!(FlowGraph::default().to_dot(), "digraph{}");
}

#[test]
fn two_step_template_network() {
    let d = derive(&load("hmm2.hobn"));
    let bn = extract_bn::<f64>(&d).unwrap();
    assert!(bn.is_acyclic());
    assert_eq!(bn.nodes.len(), 5);
    assert_eq!(bn.edges().len(), 4);
    let roots: Vec<&Name> = bn.nodes.iter().filter(|n| n.parents.is_empty()).map(|n| &n.name).collect();
    assert_eq!(roots.len(), 1);
    let leaves = bn.nodes.iter().filter(|n| !bn.edges().iter().any(|(a, _)| *a == n.name)).count();
    assert_eq!(leaves, 2);
}
