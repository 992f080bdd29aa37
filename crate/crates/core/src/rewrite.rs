//! Reduction at a distance and normalisation.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::syntax::{canonical, fresh_like, rename_binders_away, substitute, Term, Var};

/// Fuel used when neither the caller nor `HOBN_FUEL` supplies one.
pub const DEFAULT_FUEL: usize = 100_000;

pub fn default_fuel() -> usize {
    std::env::var("HOBN_FUEL")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_FUEL)
}

/// One step into an evaluation context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    AppFun,
    LetBound,
    LetBody,
}

pub type Path = Vec<Step>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Beta,
    Subst,
    Derelict,
    Pair,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Beta => "db",
            Rule::Subst => "dsub",
            Rule::Derelict => "der!",
            Rule::Pair => "dpair",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("reduction did not terminate within {fuel} steps")]
pub struct FuelExhausted {
    pub fuel: usize,
    pub last: Term,
}

/// A completed reduction: `terms[i]` steps to `terms[i + 1]` by `steps[i]`.
#[derive(Clone, Debug)]
pub struct Trace {
    pub terms: Vec<Term>,
    pub steps: Vec<(Path, Rule)>,
}

impl Trace {
    pub fn result(&self) -> &Term {
        self.terms.last().expect("trace holds the initial term")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The subterm reached by following `path`.
pub fn subterm<'a>(t: &'a Term, path: &[Step]) -> Option<&'a Term> {
    path.iter().try_fold(t, |t, s| match (s, t) {
        (Step::AppFun, Term::App(f, _)) => Some(&**f),
        (Step::LetBound, Term::Let(_, u, _)) => Some(&**u),
        (Step::LetBody, Term::Let(_, _, b)) => Some(&**b),
        _ => None,
    })
}

/// Innermost term of a substitution context `S<_>` made of `let` and `letp` frames.
fn unframe(t: &Term) -> &Term {
    match t {
        Term::Let(_, _, b) | Term::LetPair(_, _, _, b) => unframe(b),
        _ => t,
    }
}

/// The rule that fires at the root of `t`, if any.
pub fn root_redex(t: &Term) -> Option<Rule> {
    match t {
        Term::App(f, _) if matches!(unframe(f), Term::Lam(..)) => Some(Rule::Beta),
        Term::Let(_, u, _) if unframe(u).is_value() => Some(Rule::Subst),
        Term::Der(v) if matches!(**v, Term::Bang(_)) => Some(Rule::Derelict),
        Term::LetPair(_, _, v, _) if matches!(**v, Term::Pair(..)) => Some(Rule::Pair),
        _ => None,
    }
}

/// All redex positions in preorder: root, function of an application, bound
/// term of a `let`, then its body.
pub fn find_redexes(t: &Term) -> Vec<(Path, Rule)> {
    let mut out = Vec::new();
    collect(t, &mut Vec::new(), &mut out);
    out
}

fn collect(t: &Term, path: &mut Path, out: &mut Vec<(Path, Rule)>) {
    if let Some(r) = root_redex(t) {
        out.push((path.clone(), r));
    }
    let mut visit = |s: Step, sub: &Term, out: &mut Vec<(Path, Rule)>| {
        path.push(s);
        collect(sub, path, out);
        path.pop();
    };
    match t {
        Term::App(f, _) => visit(Step::AppFun, f, out),
        Term::Let(_, u, b) => {
            visit(Step::LetBound, u, out);
            visit(Step::LetBody, b, out);
        }
        _ => {}
    }
}

/// Leftmost-outermost redex.
pub fn first_redex(t: &Term) -> Option<(Path, Rule)> {
    fn go(t: &Term, path: &mut Path) -> Option<Rule> {
        if let Some(r) = root_redex(t) {
            return Some(r);
        }
        let children: Vec<(Step, &Term)> = match t {
            Term::App(f, _) => vec![(Step::AppFun, f)],
            Term::Let(_, u, b) => vec![(Step::LetBound, u), (Step::LetBody, b)],
            _ => vec![],
        };
        for (s, sub) in children {
            path.push(s);
            if let Some(r) = go(sub, path) {
                return Some(r);
            }
            path.pop();
        }
        None
    }
    let mut path = Vec::new();
    go(t, &mut path).map(|r| (path, r))
}

/// Moves the frames of `s` outward, applying `k` to the innermost term.
/// Frame binders in `avoid` are renamed first.
fn plug(s: &Term, avoid: &BTreeSet<Var>, k: &mut dyn FnMut(&Term) -> Term) -> Term {
    match rename_binders_away(s, avoid) {
        Term::Let(x, u, b) => Term::Let(x, u, Box::new(plug(&b, avoid, k))),
        Term::LetPair(x, y, v, b) => Term::LetPair(x, y, v, Box::new(plug(&b, avoid, k))),
        other => k(&other),
    }
}

/// Contracts the redex at the root of `t`.
pub fn contract(t: &Term) -> Option<(Term, Rule)> {
    let rule = root_redex(t)?;
    let out = match t {
        Term::App(f, v) => {
            let avoid = v.free_vars();
            plug(f, &avoid, &mut |lam| match lam {
                Term::Lam(x, body) => substitute(body, x, v),
                _ => unreachable!("beta redex without abstraction"),
            })
        }
        Term::Let(x, u, body) => {
            let mut avoid = body.free_vars();
            avoid.remove(x);
            plug(u, &avoid, &mut |v| substitute(body, x, v))
        }
        Term::Der(v) => match &**v {
            Term::Bang(inner) => (**inner).clone(),
            _ => unreachable!(),
        },
        Term::LetPair(x, y, pair, body) => match &**pair {
            Term::Pair(v, w) => {
                let mut taken = body.free_vars();
                taken.extend(v.free_vars());
                taken.extend(w.free_vars());
                taken.insert(x.clone());
                let y2 = fresh_like(y, |c| taken.contains(c));
                let body = substitute(body, y, &Term::Var(y2.clone()));
                let body = substitute(&body, x, v);
                substitute(&body, &y2, w)
            }
            _ => unreachable!(),
        },
        _ => unreachable!(),
    };
    Some((out, rule))
}

/// Contracts the redex at `path`.
pub fn reduce_at(t: &Term, path: &[Step]) -> Option<(Term, Rule)> {
    let Some((s, rest)) = path.split_first() else {
        return contract(t);
    };
    match (s, t) {
        (Step::AppFun, Term::App(f, v)) => {
            reduce_at(f, rest).map(|(f, r)| (Term::App(Box::new(f), v.clone()), r))
        }
        (Step::LetBound, Term::Let(x, u, b)) => {
            reduce_at(u, rest).map(|(u, r)| (Term::Let(x.clone(), Box::new(u), b.clone()), r))
        }
        (Step::LetBody, Term::Let(x, u, b)) => {
            reduce_at(b, rest).map(|(b, r)| (Term::Let(x.clone(), u.clone(), Box::new(b)), r))
        }
        _ => None,
    }
}

/// One leftmost-outermost step.
pub fn step(t: &Term) -> Option<(Term, Path, Rule)> {
    let (path, _) = first_redex(t)?;
    let (out, rule) = reduce_at(t, &path)?;
    Some((out, path, rule))
}

/// Reduces to normal form with the leftmost-outermost strategy.
pub fn normalize(t: &Term, fuel: usize) -> Result<Trace, FuelExhausted> {
    let mut trace = Trace { terms: vec![t.clone()], steps: Vec::new() };
    loop {
        let current = trace.result();
        let Some((next, path, rule)) = step(current) else {
            return Ok(trace);
        };
        if trace.steps.len() == fuel {
            return Err(FuelExhausted { fuel, last: current.clone() });
        }
        trace.terms.push(next);
        trace.steps.push((path, rule));
    }
}

pub fn is_normal(t: &Term) -> bool {
    first_redex(t).is_none()
}

/// `n ::= let x = s in n | v | s` with
/// `s ::= let x = s in s | sample | case | obs`.
pub fn is_bn_normal_form(t: &Term) -> bool {
    fn simple(t: &Term) -> bool {
        match t {
            Term::Let(_, u, b) => simple(u) && simple(b),
            Term::Sample(_) | Term::Case(..) | Term::Obs(..) => true,
            _ => false,
        }
    }
    match t {
        Term::Let(_, u, b) => simple(u) && is_bn_normal_form(b),
        _ => t.is_value() || simple(t),
    }
}

/// The part of the reduction graph reachable from a term.
#[derive(Clone, Debug, Default)]
pub struct Exploration {
    pub nodes: usize,
    pub edges: usize,
    pub normal_forms: Vec<Term>,
    pub complete: bool,
}

/// Breadth-first exploration over all redexes, identifying α-equivalent terms.
pub fn explore(t: &Term, limit: usize) -> Exploration {
    let mut seen: HashMap<Term, ()> = HashMap::new();
    let mut queue = VecDeque::from([t.clone()]);
    seen.insert(canonical(t), ());
    let mut out = Exploration { complete: true, ..Default::default() };
    while let Some(cur) = queue.pop_front() {
        out.nodes += 1;
        let redexes = find_redexes(&cur);
        if redexes.is_empty() {
            out.normal_forms.push(cur);
            continue;
        }
        for (path, _) in redexes {
            let (next, _) = reduce_at(&cur, &path).expect("listed redex contracts");
            out.edges += 1;
            let key = canonical(&next);
            if seen.contains_key(&key) {
                continue;
            }
            if seen.len() >= limit {
                out.complete = false;
                continue;
            }
            seen.insert(key, ());
            queue.push_back(next);
        }
    }
    out
}

/// Lengths of all maximal reduction sequences from `t`, exploring every redex.
/// `fuel` bounds the number of distinct terms visited.
pub fn reduction_graph(t: &Term, fuel: usize) -> Result<BTreeSet<usize>, FuelExhausted> {
    fn go(
        t: &Term,
        memo: &mut HashMap<Term, BTreeSet<usize>>,
        fuel: usize,
    ) -> Result<BTreeSet<usize>, FuelExhausted> {
        let key = canonical(t);
        if let Some(ls) = memo.get(&key) {
            return Ok(ls.clone());
        }
        if memo.len() >= fuel {
            return Err(FuelExhausted { fuel, last: t.clone() });
        }
        let redexes = find_redexes(t);
        let mut out = BTreeSet::new();
        if redexes.is_empty() {
            out.insert(0);
        }
        for (path, _) in redexes {
            let (next, _) = reduce_at(t, &path).expect("listed redex contracts");
            out.extend(go(&next, memo, fuel)?.into_iter().map(|l| l + 1));
        }
        memo.insert(key, out.clone());
        Ok(out)
    }
    go(t, &mut HashMap::new(), fuel)
}
