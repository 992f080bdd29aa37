//! Random well-typed programs for fuzzing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::syntax::{Bernoulli, Prob, Term, Var};

/// Shape limits for generated programs.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Upper bound on `sample` and `case` sites.
    pub max_sites: usize,
    /// Upper bound on scrutinee width.
    pub max_parents: usize,
    /// Nesting depth of bound expressions.
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_sites: 6, max_parents: 2, max_depth: 2 }
    }
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    next: usize,
    sites: usize,
    limits: Limits,
    observed: BTreeSet<Var>,
    evidence: bool,
    target: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh(&mut self, base: &str) -> Var {
        self.next += 1;
        Var::new(format!("{base}{}", self.next))
    }

    fn bern(&mut self) -> Bernoulli {
        let num = match self.rng.gen_range(0..20) {
            0 => 0,
            1 => 10,
            _ => self.rng.gen_range(1..10),
        };
        Bernoulli::new(Prob::new(num, 10)).expect("parameter in range")
    }

    /// A term of atomic type over the atomic variables in `scope`.
    fn atomic(&mut self, scope: &[Var], depth: usize) -> Term {
        let can_sample = self.sites < self.limits.max_sites;
        let roll = self.rng.gen_range(0..10);
        if can_sample && (scope.is_empty() || roll < 3) {
            self.sites += 1;
            return Term::sample(self.bern());
        }
        if can_sample && roll < 7 {
            self.sites += 1;
            let k = self.rng.gen_range(1..=self.limits.max_parents.min(scope.len()).max(1));
            let leaves: Vec<Var> = (0..k).map(|_| scope.choose(self.rng).expect("non-empty").clone()).collect();
            let clauses = (0..1 << k).map(|_| self.bern()).collect();
            let v = leaves
                .into_iter()
                .map(Term::Var)
                .reduce(|a, b| Term::Pair(Box::new(a), Box::new(b)))
                .expect("at least one leaf");
            return Term::case(v, clauses);
        }
        if depth < self.limits.max_depth && roll < 9 && can_sample {
            let x = self.fresh("y");
            let u = self.atomic(scope, depth + 1);
            let mut inner = scope.to_vec();
            inner.push(x.clone());
            let body = self.atomic(&inner, depth + 1);
            return Term::Let(x, Box::new(u), Box::new(body));
        }
        match scope.choose(self.rng) {
            Some(x) => Term::Var(x.clone()),
            None => {
                self.sites += 1;
                Term::sample(self.bern())
            }
        }
    }

    fn block(&mut self, scope: &mut Vec<Var>) -> Term {
        if scope.len() >= 2 && self.rng.gen_bool(0.15) {
            let a = scope.choose(self.rng).expect("non-empty").clone();
            let b = scope.choose(self.rng).expect("non-empty").clone();
            let (p, q) = (self.fresh("p"), self.fresh("q"));
            scope.push(p.clone());
            scope.push(q.clone());
            let body = self.block(scope);
            return Term::LetPair(p, q, Box::new(Term::pair(Term::Var(a), Term::Var(b))), Box::new(body));
        }
        if self.sites < self.target || scope.is_empty() {
            let x = self.fresh("x");
            let u = self.atomic(scope, 0);
            scope.push(x.clone());
            let body = self.block(scope);
            return Term::Let(x, Box::new(u), Box::new(body));
        }
        self.output(scope)
    }

    fn output(&mut self, scope: &[Var]) -> Term {
        let width = self.rng.gen_range(1..=3.min(scope.len()));
        let picked: Vec<Var> = scope.choose_multiple(self.rng, width).cloned().collect();
        let mut lets = Vec::new();
        let mut leaves = Vec::new();
        for x in picked {
            if !self.observed.contains(&x) && self.rng.gen_bool(0.3) {
                self.observed.insert(x.clone());
                let o = self.fresh("o");
                lets.push((o.clone(), Term::Obs(Box::new(Term::Var(x)), self.evidence)));
                leaves.push(Term::Var(o));
            } else {
                leaves.push(Term::Var(x));
            }
        }
        let tuple = leaves.into_iter().rev().reduce(|b, a| Term::pair(a, b)).expect("non-empty output");
        lets.into_iter().rev().fold(tuple, |body, (o, t)| Term::Let(o, Box::new(t), Box::new(body)))
    }
}

/// A closed first-order program of ground type.
pub fn first_order<R: Rng>(rng: &mut R, limits: Limits) -> Term {
    let evidence = rng.gen_bool(0.7);
    let target = rng.gen_range(1..=limits.max_sites.max(1));
    let mut g = Gen { rng, next: 0, sites: 0, limits, observed: BTreeSet::new(), evidence, target };
    g.block(&mut Vec::new())
}

/// Rewrites a first-order program into an equivalent one containing
/// redexes of every kind: abstractions applied to values, thunks forced once
/// or twice, pairs destructured and variables substituted.
pub fn with_redexes<R: Rng>(rng: &mut R, t: &Term, rate: f64) -> Term {
    let mut next = 0;
    disguise(rng, t, rate, &mut next)
}

fn fresh(next: &mut usize, base: &str) -> Var {
    *next += 1;
    Var::new(format!("_{base}{next}"))
}

fn disguise<R: Rng>(rng: &mut R, t: &Term, rate: f64, next: &mut usize) -> Term {
    match t {
        Term::Let(x, u, body) => {
            let u2 = disguise(rng, u, rate, next);
            let body2 = disguise(rng, body, rate, next);
            if !rng.gen_bool(rate) {
                return Term::Let(x.clone(), Box::new(u2), Box::new(body2));
            }
            match rng.gen_range(0..5) {
                0 => {
                    let y = fresh(next, "a");
                    let f = Term::Lam(x.clone(), Box::new(body2));
                    Term::Let(y.clone(), Box::new(u2), Box::new(Term::app(f, Term::Var(y))))
                }
                1 => Term::Let(x.clone(), Box::new(Term::der(Term::bang(u2))), Box::new(body2)),
                2 => {
                    let y = fresh(next, "v");
                    let inner = Term::Let(x.clone(), Box::new(Term::Var(y.clone())), Box::new(body2));
                    Term::Let(y, Box::new(u2), Box::new(inner))
                }
                3 => {
                    let (y, p, a, b) = (fresh(next, "v"), fresh(next, "p"), fresh(next, "l"), fresh(next, "r"));
                    let inner = Term::Let(x.clone(), Box::new(Term::Var(a.clone())), Box::new(body2));
                    let split = Term::LetPair(a, b, Box::new(Term::Var(p.clone())), Box::new(inner));
                    let pair = Term::pair(Term::Var(y.clone()), Term::Var(y.clone()));
                    Term::Let(y, Box::new(u2), Box::new(Term::Let(p, Box::new(pair), Box::new(split))))
                }
                _ => {
                    let g = fresh(next, "g");
                    let forced = Term::Let(x.clone(), Box::new(Term::der(Term::Var(g.clone()))), Box::new(body2));
                    Term::Let(g, Box::new(Term::bang(u2)), Box::new(forced))
                }
            }
        }
        Term::LetPair(x, y, v, body) => Term::LetPair(
            x.clone(),
            y.clone(),
            v.clone(),
            Box::new(disguise(rng, body, rate, next)),
        ),
        other => other.clone(),
    }
}
