mod common;

use std::collections::BTreeSet;

use common::*;
use hobn::flowgraph::{build_flow, extract_bn, is_acyclic, named_components};
use hobn::semantics::{check_compatibility, interpret_global, interpret_inductive};
use hobn::syntax::{parse, parse_core, Term};
use hobn::types::{
    check, infer_ground, infer_low, Derivation, DerivationJson, GroundCtx, IType, InferError, Judgment, Name, RuleName,
};

const COIN: &str = "case x of { t => sample bern(0.7); f => sample bern(0.4) }";

fn ty(s: &str) -> IType {
    s.parse().unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn node(rule: RuleName, ground: &[(&str, &str)], multiset: &[(&str, &str)], subject: &str, conclusion: &str, premises: Vec<Derivation>) -> Derivation {
    let mut j = Judgment::new(parse_core(subject).unwrap_or_else(|e| panic!("{subject}: {e}")), ty(conclusion));
    for (x, t) in ground {
        j.ground.insert((*x).into(), ty(t));
    }
    for (x, t) in multiset {
        let IType::Multiset(items) = ty(t) else { panic!("{t} is not a multiset") };
        j.multiset.insert((*x).into(), items);
    }
    Derivation::new(rule, j, premises)
}

/// The two-coin derivation written out rule by rule, with the thunk typed
/// by the multiset `[Y1, Y2]`.
fn two_coins_by_hand() -> Derivation {
    use RuleName::*;
    let tail = "let z2 = der y in <x, z1, z2>";
    let body = format!("let z1 = der y in {tail}");
    let inner = format!("let y = !{COIN} in {body}");
    let der = |k: &str| {
        node(Der, &[], &[("y", &format!("[{k}]"))], "der y", k, vec![node(Var, &[], &[("y", &format!("[{k}]"))], "y", &format!("[{k}]"), vec![])])
    };
    let pair = node(
        Pair,
        &[("x", "X"), ("z1", "Y1"), ("z2", "Y2")],
        &[],
        "<x, z1, z2>",
        "X * Y1 * Y2",
        vec![
            node(Var, &[("x", "X")], &[], "x", "X", vec![]),
            node(
                Pair,
                &[("z1", "Y1"), ("z2", "Y2")],
                &[],
                "<z1, z2>",
                "Y1 * Y2",
                vec![node(Var, &[("z1", "Y1")], &[], "z1", "Y1", vec![]), node(Var, &[("z2", "Y2")], &[], "z2", "Y2", vec![])],
            ),
        ],
    );
    let second = node(Let, &[("x", "X"), ("z1", "Y1")], &[("y", "[Y2]")], tail, "X * Y1 * Y2", vec![der("Y2"), pair]);
    let first = node(Let, &[("x", "X")], &[("y", "[Y1, Y2]")], &body, "X * Y1 * Y2", vec![der("Y1"), second]);
    let bang = node(
        Bang,
        &[("x", "X")],
        &[],
        &format!("!{COIN}"),
        "[Y1, Y2]",
        vec![node(Cond, &[("x", "X")], &[], COIN, "Y1", vec![]), node(Cond, &[("x", "X")], &[], COIN, "Y2", vec![])],
    );
    let outer = node(Let, &[("x", "X")], &[], &inner, "X * Y1 * Y2", vec![bang, first]);
    node(
        Let,
        &[],
        &[],
        &format!("let x = sample bern(0.5) in {inner}"),
        "X * Y1 * Y2",
        vec![node(Sample, &[], &[], "sample bern(0.5)", "X", vec![]), outer],
    )
}

fn names(list: &[&str]) -> BTreeSet<Name> {
    list.iter().map(|n| Name::from(*n)).collect()
}

#[test]
fn hand_built_two_coin_derivation_is_valid() {
    let d = two_coins_by_hand();
    check(&d).unwrap();
    assert_eq!(d.names(), names(&["X", "Y1", "Y2"]));
    assert_eq!(d.axioms().len(), 3);
    let inferred = infer_ground(d.subject(), &GroundCtx::new(), FUEL).unwrap();
    assert_eq!(inferred.size(), d.size());
    assert_eq!(inferred.ty().atoms().len(), 3);
}

#[test]
fn two_coin_root_factor_is_the_joint() {
    let d = two_coins_by_hand();
    let root = interpret_inductive::<f64>(&d).unwrap().factor;
    assert_eq!(root.names(), names(&["X", "Y1", "Y2"]));
    assert!(diff(&root, &brute_force(d.subject(), d.ty())) <= 1e-12);
    assert!((at(&root, d.ty(), &[true, true, false]) - 0.5 * 0.7 * 0.3).abs() <= 1e-12);
}

#[test]
fn two_coin_network_forks_from_the_bias() {
    let d = two_coins_by_hand();
    let g = build_flow(&d);
    assert!(is_acyclic(&g));
    let comps = named_components(&g).unwrap();
    assert_eq!(comps.keys().cloned().collect::<BTreeSet<_>>(), names(&["X", "Y1", "Y2"]));
    let y1 = &comps[&Name::from("Y1")];
    assert!(y1.positions.iter().any(|&v| g.vertices[v].path.len() == 1 && g.vertices[v].node != g.vertices[y1.root].node));
    let bn = extract_bn::<f64>(&d).unwrap();
    let expected: BTreeSet<(Name, Name)> = [("X", "Y1"), ("X", "Y2")].iter().map(|(a, b)| (Name::from(*a), Name::from(*b))).collect();
    assert_eq!(bn.edges(), expected);
}

#[test]
fn repeated_main_name_is_rejected() {
    let mut d = two_coins_by_hand();
    let cond = d.at_mut(&[1, 0, 1]).unwrap();
    assert_eq!(cond.rule, RuleName::Cond);
    cond.judgment.ty = ty("Y1");
    assert!(check(&d).is_err());
}

#[test]
fn wrong_context_is_rejected() {
    let mut d = two_coins_by_hand();
    d.at_mut(&[1, 1, 0]).unwrap().judgment.multiset.insert("y".into(), vec![ty("Y2")]);
    let err = check(&d).unwrap_err();
    assert!(err.path.starts_with(&[1, 1]), "{err}");
}

#[test]
fn clashing_fixture_is_rejected() {
    let src = std::fs::read_to_string(corpus("clashing_names.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&src).unwrap();
    assert_eq!(v["expect"], "type-error");
    let j: DerivationJson = serde_json::from_value(v["derivation"].clone()).unwrap();
    let d = Derivation::from_json(&j).unwrap();
    let err = check(&d).unwrap_err();
    assert_eq!(err.path, vec![1, 0, 0]);
    assert!(!check_compatibility(&d.premises.iter().collect::<Vec<_>>()));
}

#[test]
fn sprinkler_is_a_four_node_derivation() {
    let t = load("program1.hobn");
    let d = infer_low(&t, &GroundCtx::new()).unwrap();
    check(&d).unwrap();
    assert_eq!(d.axioms().len(), 4);
    assert_eq!(d.names().len(), 4);
    assert!(d.ty().as_atom().is_some());
    let mut compatible = true;
    d.walk(&mut |n| compatible &= check_compatibility(&n.premises.iter().collect::<Vec<_>>()));
    assert!(compatible);
}

#[test]
fn aliased_variable_shares_its_name() {
    let t = parse("let x = sample bern(0.3) in let y = x in let z = case y of { t => sample bern(0.9); f => sample bern(0.2) } in <x, y>").unwrap();
    let d = derive(&t);
    let atoms = d.ty().atoms();
    assert_eq!(atoms.len(), 2);
    assert_eq!(atoms[0].name, atoms[1].name);
}

#[test]
fn observation_marks_the_conclusion() {
    let d = derive(&load("rain_wet.hobn"));
    let atoms = d.ty().atoms();
    assert_eq!(atoms.len(), 2);
    assert_eq!(atoms[0].obs, hobn::types::Observation::Free);
    assert_eq!(atoms[1].obs, hobn::types::Observation::Seen(true));
    assert_eq!(d.generalize(), d);
}

#[test]
fn generalization_forgets_unforced_observations() {
    let observed = node(RuleName::Sample, &[], &[], "sample bern(0.2)", "X^t", vec![]);
    check(&observed).unwrap();
    let general = observed.generalize();
    assert_eq!(general.ty(), &ty("X"));
    assert_eq!(general.generalize(), general);
    let d = derive(&load("sprinkler.hobn"));
    assert_eq!(d.generalize().generalize(), d.generalize());
}

#[test]
fn normal_forms_need_no_replay() {
    for name in ["program1.hobn", "rain_wet.hobn", "chain_t2.hobn"] {
        let t = load(name);
        let low = infer_low(&t, &GroundCtx::new()).unwrap();
        assert_eq!(infer_ground(&t, &GroundCtx::new(), FUEL).unwrap(), low, "{name}");
    }
}

#[test]
fn two_step_template_has_five_primitives() {
    let d = derive(&load("hmm2.hobn"));
    assert_eq!(d.axioms().len(), 5);
    assert_eq!(d.ty().atoms().len(), 3);
    let global = interpret_global::<f64>(&d).unwrap();
    assert!((global.total() - 1.0).abs() <= 1e-12);
}

#[test]
fn untypable_programs_are_reported() {
    let boolean = load("boolean.hobn");
    assert!(matches!(infer_ground(&boolean, &GroundCtx::new(), FUEL), Err(InferError::Type(_))));
    let pair_scrutinee = parse("let p = <sample bern(0.5), sample bern(0.5)> in case p of { t => sample bern(0.1); f => sample bern(0.2) }").unwrap();
    assert!(infer_ground(&pair_scrutinee, &GroundCtx::new(), FUEL).is_err());
    let looping: Term = load("loop.hobn");
    assert!(matches!(infer_ground(&looping, &GroundCtx::new(), 50), Err(InferError::Fuel(_))));
}
