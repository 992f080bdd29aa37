#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use hobn::factors::{Factor, VarDomain};
use hobn::generate::{first_order, with_redexes, Limits};
use hobn::rewrite::normalize;
use hobn::syntax::{clause_index, parse, Term, Var};
use hobn::types::{check, infer_ground, Derivation, GroundCtx, IType, Name};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FUEL: usize = 100_000;

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn load(name: &str) -> Term {
    let src = std::fs::read_to_string(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Inferred and checked derivation of a closed program.
pub fn derive(t: &Term) -> Derivation {
    let d = infer_ground(t, &GroundCtx::new(), FUEL).unwrap_or_else(|e| panic!("{t}: {e}"));
    check(&d).unwrap_or_else(|e| panic!("{t}: {e}"));
    d
}

pub fn programs(seed: u64, n: usize) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| first_order(&mut rng, Limits::default())).collect()
}

pub fn disguised(seed: u64, n: usize, rate: f64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = first_order(&mut rng, Limits { max_sites: 4, ..Limits::default() });
            with_redexes(&mut rng, &t, rate)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Val {
    Bit(bool),
    Pair(Box<Val>, Box<Val>),
}

fn flatten(v: &Val, out: &mut Vec<bool>) {
    match v {
        Val::Bit(b) => out.push(*b),
        Val::Pair(a, b) => {
            flatten(a, out);
            flatten(b, out);
        }
    }
}

fn sites(t: &Term) -> usize {
    let mut n = 0;
    t.walk(&mut |s| n += matches!(s, Term::Sample(_) | Term::Case(..)) as usize);
    n
}

/// Runs a first-order term with every random choice fixed in advance by
/// `choices`, consumed in evaluation order.
struct Run<'a> {
    choices: &'a [bool],
    used: usize,
    weight: f64,
}

impl Run<'_> {
    fn take(&mut self) -> bool {
        let b = self.choices[self.used];
        self.used += 1;
        b
    }

    fn eval(&mut self, t: &Term, env: &BTreeMap<Var, Val>) -> Val {
        let mass = |p: &hobn::syntax::Prob, b: bool| {
            let p = p.numer().to_f64().unwrap() / p.denom().to_f64().unwrap();
            if b { p } else { 1.0 - p }
        };
        match t {
            Term::Var(x) => env[x].clone(),
            Term::Pair(a, b) => Val::Pair(Box::new(self.eval(a, env)), Box::new(self.eval(b, env))),
            Term::Sample(d) => {
                let b = self.take();
                self.weight *= mass(&d.p(), b);
                Val::Bit(b)
            }
            Term::Case(v, clauses) => {
                let mut bits = Vec::new();
                flatten(&self.eval(v, env), &mut bits);
                let b = self.take();
                self.weight *= mass(&clauses[clause_index(&bits)].p(), b);
                Val::Bit(b)
            }
            Term::Obs(v, b) => {
                if self.eval(v, env) != Val::Bit(*b) {
                    self.weight = 0.0;
                }
                Val::Bit(*b)
            }
            Term::Let(x, u, body) => {
                let v = self.eval(u, env);
                let mut inner = env.clone();
                inner.insert(x.clone(), v);
                self.eval(body, &inner)
            }
            Term::LetPair(x, y, v, body) => {
                let Val::Pair(a, b) = self.eval(v, env) else { panic!("letp on a non-pair") };
                let mut inner = env.clone();
                inner.insert(x.clone(), *a);
                inner.insert(y.clone(), *b);
                self.eval(body, &inner)
            }
            other => panic!("brute force cannot run {other}"),
        }
    }
}

/// Distribution of the outputs of `t`, read through the atoms of `ty`, by
/// enumerating the whole joint of its random choices.
pub fn brute_force(t: &Term, ty: &IType) -> Factor {
    let nf = normalize(t, FUEL).expect("program terminates");
    let t = nf.result();
    let k = sites(t);
    let atoms = ty.atoms();
    let mut joint: BTreeMap<Vec<(Name, bool)>, f64> = BTreeMap::new();
    for mask in 0..1u64 << k {
        let choices: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
        let mut run = Run { choices: &choices, used: 0, weight: 1.0 };
        let out = run.eval(t, &BTreeMap::new());
        let mut bits = Vec::new();
        flatten(&out, &mut bits);
        assert_eq!(bits.len(), atoms.len(), "output shape");
        let mut key: BTreeMap<Name, bool> = BTreeMap::new();
        if atoms.iter().zip(&bits).all(|(a, b)| *key.entry(a.name.clone()).or_insert(*b) == *b) {
            *joint.entry(key.into_iter().collect()).or_insert(0.0) += run.weight;
        }
    }
    let scope = atoms.iter().map(|a| VarDomain::new(a.name.clone(), a.obs)).collect();
    Factor::from_fn(scope, |a| {
        let key: Vec<(Name, bool)> = a.iter().map(|(n, b)| (n.clone(), *b)).collect();
        joint.get(&key).copied().unwrap_or(0.0)
    })
    .expect("consistent scope")
}

pub fn diff(a: &Factor, b: &Factor) -> f64 {
    a.max_abs_diff(b).unwrap_or(f64::INFINITY)
}

/// Entry of `f` where the names of the atoms of `ty` take `values` in order.
pub fn at(f: &Factor, ty: &IType, values: &[bool]) -> f64 {
    let a: BTreeMap<Name, bool> = ty.atoms().iter().map(|a| a.name.clone()).zip(values.iter().copied()).collect();
    f.get(&a).expect("assignment covers the scope")
}
