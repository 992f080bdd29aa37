use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};

/// Exact probability literal.
pub type Prob = Ratio<i64>;

/// A term variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var(s.to_string())
    }
}

/// Bernoulli distribution with an exact parameter: the probability of `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bernoulli(Prob);

impl Bernoulli {
    /// Returns `None` unless `0 <= p <= 1`.
    pub fn new(p: Prob) -> Option<Self> {
        (p >= Prob::zero() && p <= Prob::one()).then_some(Bernoulli(p))
    }

    pub fn from_ratio(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        Self::new(Prob::new(num, den))
    }

    pub fn p(&self) -> Prob {
        self.0
    }

    /// Probability mass of the outcome `b`.
    pub fn mass(&self, b: bool) -> Prob {
        if b {
            self.0
        } else {
            Prob::one() - self.0
        }
    }
}

/// Core terms of the calculus.
///
/// `Case` keeps one clause per Boolean tuple, indexed in mixed radix over the
/// leaves of the scrutinee (first leaf most significant, `f = 0`, `t = 1`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Bool(bool),
    Pair(Box<Term>, Box<Term>),
    Bang(Box<Term>),
    Der(Box<Term>),
    Lam(Var, Box<Term>),
    App(Box<Term>, Box<Term>),
    Let(Var, Box<Term>, Box<Term>),
    LetPair(Var, Var, Box<Term>, Box<Term>),
    Sample(Bernoulli),
    Case(Box<Term>, Vec<Bernoulli>),
    Obs(Box<Term>, bool),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::from(name))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn bang(t: Term) -> Term {
        Term::Bang(Box::new(t))
    }

    pub fn der(t: Term) -> Term {
        Term::Der(Box::new(t))
    }

    pub fn lam(x: &str, body: Term) -> Term {
        Term::Lam(Var::from(x), Box::new(body))
    }

    pub fn app(f: Term, v: Term) -> Term {
        Term::App(Box::new(f), Box::new(v))
    }

    pub fn let_in(x: &str, bound: Term, body: Term) -> Term {
        Term::Let(Var::from(x), Box::new(bound), Box::new(body))
    }

    pub fn letp(x: &str, y: &str, v: Term, body: Term) -> Term {
        Term::LetPair(Var::from(x), Var::from(y), Box::new(v), Box::new(body))
    }

    pub fn sample(d: Bernoulli) -> Term {
        Term::Sample(d)
    }

    pub fn case(scrutinee: Term, clauses: Vec<Bernoulli>) -> Term {
        Term::Case(Box::new(scrutinee), clauses)
    }

    pub fn obs(x: &str, b: bool) -> Term {
        Term::Obs(Box::new(Term::var(x)), b)
    }

    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_) | Term::Bool(_) | Term::Bang(_) => true,
            Term::Pair(a, b) => a.is_value() && b.is_value(),
            _ => false,
        }
    }

    /// Leaves of a tuple of variables, left to right.
    pub fn tuple_vars(&self) -> Option<Vec<&Var>> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, out: &mut Vec<&'a Var>) -> bool {
            match t {
                Term::Var(x) => {
                    out.push(x);
                    true
                }
                Term::Pair(a, b) => go(a, out) && go(b, out),
                _ => false,
            }
        }
        go(self, &mut out).then_some(out)
    }

    /// Number of leaves of a tuple (a non-pair counts as one leaf).
    pub fn tuple_arity(&self) -> usize {
        match self {
            Term::Pair(a, b) => a.tuple_arity() + b.tuple_arity(),
            _ => 1,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    pub fn is_free(&self, x: &Var) -> bool {
        match self {
            Term::Var(y) => y == x,
            Term::Bool(_) | Term::Sample(_) => false,
            Term::Pair(a, b) | Term::App(a, b) => a.is_free(x) || b.is_free(x),
            Term::Bang(t) | Term::Der(t) | Term::Case(t, _) | Term::Obs(t, _) => t.is_free(x),
            Term::Lam(y, t) => y != x && t.is_free(x),
            Term::Let(y, u, t) => u.is_free(x) || (y != x && t.is_free(x)),
            Term::LetPair(y, z, v, t) => v.is_free(x) || (y != x && z != x && t.is_free(x)),
        }
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Bool(_) | Term::Sample(_) => {}
            Term::Pair(a, b) | Term::App(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Term::Bang(t) | Term::Der(t) | Term::Case(t, _) | Term::Obs(t, _) => {
                t.collect_free(bound, out)
            }
            Term::Lam(x, t) => {
                bound.push(x.clone());
                t.collect_free(bound, out);
                bound.pop();
            }
            Term::Let(x, u, t) => {
                u.collect_free(bound, out);
                bound.push(x.clone());
                t.collect_free(bound, out);
                bound.pop();
            }
            Term::LetPair(x, y, v, t) => {
                v.collect_free(bound, out);
                bound.push(x.clone());
                bound.push(y.clone());
                t.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
        }
    }

    /// Every variable name occurring in the term, bound or free.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| match t {
            Term::Var(x) | Term::Lam(x, _) | Term::Let(x, _, _) => {
                out.insert(x.clone());
            }
            Term::LetPair(x, y, _, _) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            _ => {}
        });
        out
    }

    /// Preorder traversal of all subterms.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        match self {
            Term::Var(_) | Term::Bool(_) | Term::Sample(_) => {}
            Term::Pair(a, b) | Term::App(a, b) | Term::Let(_, a, b) | Term::LetPair(_, _, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Term::Bang(t) | Term::Der(t) | Term::Lam(_, t) | Term::Case(t, _) | Term::Obs(t, _) => {
                t.walk(f)
            }
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Number of `sample`, `case` and `obs` constructs.
    pub fn probabilistic_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |t| {
            if matches!(t, Term::Sample(_) | Term::Case(..) | Term::Obs(..)) {
                n += 1
            }
        });
        n
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::pretty::pretty(self))
    }
}
