use std::collections::BTreeMap;

use super::derivation::{Derivation, GroundCtx, Judgment, MultisetCtx, RuleName};
use super::itype::{Atom, IType, Name, Observation};
use super::{InferError, TypeError};
use crate::rewrite::{normalize, subterm, Rule, Step};
use crate::syntax::{is_low_level, Term, Var};

/// Ground variables in scope at a position, with their types.
pub type Scope = BTreeMap<Var, IType>;

fn relevant(scope: &Scope, t: &Term) -> GroundCtx {
    t.free_vars()
        .into_iter()
        .filter_map(|x| scope.get(&x).map(|ty| (x, ty.clone())))
        .collect()
}

fn bind(scope: &Scope, x: &Var, ty: &IType) -> Scope {
    let mut s = scope.clone();
    if ty.is_ground() {
        s.insert(x.clone(), ty.clone());
    } else {
        s.remove(x);
    }
    s
}

fn merge(into: &mut MultisetCtx, from: &MultisetCtx, except: &[&Var]) {
    for (x, ts) in from {
        if !except.contains(&x) {
            into.entry(x.clone()).or_default().extend(ts.iter().cloned());
        }
    }
}

fn node(rule: RuleName, subject: &Term, ty: IType, scope: &Scope, premises: Vec<Derivation>) -> Derivation {
    let mut j = Judgment::new(subject.clone(), ty);
    j.ground = relevant(scope, subject);
    Derivation::new(rule, j, premises)
}

struct LowInference {
    next_axiom: usize,
    reserved: Vec<Name>,
}

impl LowInference {
    fn mint(&mut self) -> Name {
        let mut name = format!("X{}", self.next_axiom);
        self.next_axiom += 1;
        while self.reserved.iter().any(|n| n.as_str() == name) {
            name.push('\'');
        }
        Name::new(name)
    }

    fn lookup<'s>(&self, scope: &'s Scope, x: &Var) -> Result<&'s IType, TypeError> {
        scope
            .get(x)
            .ok_or_else(|| TypeError::new(format!("variable `{x}` has no ground type in scope")))
    }

    fn infer(&mut self, t: &Term, scope: &Scope) -> Result<Derivation, TypeError> {
        Ok(match t {
            Term::Var(x) => {
                let ty = self.lookup(scope, x)?.clone();
                node(RuleName::Var, t, ty, scope, vec![])
            }
            Term::Bool(_) => return Err(TypeError::new("boolean constants are not typable")),
            Term::Pair(a, b) => {
                let pa = self.infer(a, scope)?;
                let pb = self.infer(b, scope)?;
                node(RuleName::Pair, t, IType::tensor(pa.ty().clone(), pb.ty().clone()), scope, vec![pa, pb])
            }
            Term::Sample(_) => {
                let name = self.mint();
                node(RuleName::Sample, t, IType::Atom(Atom { name, obs: Observation::Free }), scope, vec![])
            }
            Term::Case(v, clauses) => {
                let vars = v
                    .tuple_vars()
                    .ok_or_else(|| TypeError::new("case scrutinee must be a tuple of variables"))?;
                if clauses.len() != 1 << vars.len() {
                    return Err(TypeError::new("case needs one clause per boolean tuple"));
                }
                for x in &vars {
                    if self.lookup(scope, x)?.as_atom().is_none() {
                        return Err(TypeError::new(format!("case scrutinee `{x}` is not of atomic type")));
                    }
                }
                let name = self.mint();
                node(RuleName::Cond, t, IType::Atom(Atom { name, obs: Observation::Free }), scope, vec![])
            }
            Term::Obs(v, b) => {
                let Term::Var(x) = &**v else {
                    return Err(TypeError::new("obs expects a variable"));
                };
                let atom = self
                    .lookup(scope, x)?
                    .as_atom()
                    .ok_or_else(|| TypeError::new(format!("obs on `{x}`, which is not of atomic type")))?;
                if let Observation::Seen(c) = atom.obs {
                    if c != *b {
                        return Err(TypeError::new(format!("conflicting observations of {}", atom.name)));
                    }
                }
                let ty = IType::Atom(Atom { name: atom.name.clone(), obs: Observation::Seen(*b) });
                node(RuleName::Obs, t, ty, scope, vec![])
            }
            Term::Let(x, u, body) => {
                let pu = self.infer(u, scope)?;
                let pb = self.infer(body, &bind(scope, x, pu.ty()))?;
                node(RuleName::Let, t, pb.ty().clone(), scope, vec![pu, pb])
            }
            Term::LetPair(x, y, v, body) => {
                let pv = self.infer(v, scope)?;
                let IType::Tensor(k1, k2) = pv.ty() else {
                    return Err(TypeError::new("letp needs a value of tensor type"));
                };
                let inner = bind(&bind(scope, x, k1), y, k2);
                let pb = self.infer(body, &inner)?;
                node(RuleName::LetPair, t, pb.ty().clone(), scope, vec![pv, pb])
            }
            Term::Lam(..) | Term::App(..) | Term::Bang(_) | Term::Der(_) => {
                return Err(TypeError::new("term is not first-order"))
            }
        })
    }
}

/// Syntax-directed inference for first-order terms.
///
/// Main names are `X{k}` with `k` the preorder index of the axiom; names
/// already used by `ctx` get primes appended.
pub fn infer_low(t: &Term, ctx: &GroundCtx) -> Result<Derivation, TypeError> {
    if !is_low_level(t) {
        let mut has_bool = false;
        t.walk(&mut |s| has_bool |= matches!(s, Term::Bool(_)));
        if has_bool {
            return Err(TypeError::new("boolean constants are not typable"));
        }
        return Err(TypeError::new("term is not first-order"));
    }
    if let Some((x, ty)) = ctx.iter().find(|(_, ty)| !ty.is_ground()) {
        return Err(TypeError::new(format!("context entry `{x}: {ty}` is not ground")));
    }
    let reserved = ctx.values().flat_map(|t| t.names()).collect();
    let mut inf = LowInference { next_axiom: 0, reserved };
    let mut d = inf.infer(t, ctx)?;
    let mut status: BTreeMap<Name, Observation> = BTreeMap::new();
    let mut conflict = None;
    d.walk(&mut |n| {
        if n.rule == RuleName::Obs {
            if let Some(a) = n.ty().as_atom() {
                if let Some(prev) = status.insert(a.name.clone(), a.obs) {
                    if prev != a.obs {
                        conflict = Some(a.name.clone());
                    }
                }
            }
        }
    });
    if let Some(name) = conflict {
        return Err(TypeError::new(format!("conflicting observations of {name}")));
    }
    d.set_observations(&status);
    Ok(d)
}

fn shape_error(rule: RuleName, t: &Term) -> TypeError {
    TypeError::new(format!("{rule} node does not match subject `{t}`"))
}

/// Recomputes subjects from `t`, ground contexts from `scope` (restricted to
/// free variables) and multiset contexts bottom-up, keeping rules and types.
pub fn rebuild(d: Derivation, t: &Term, scope: &Scope) -> Result<Derivation, TypeError> {
    let Derivation { rule, judgment, premises } = d;
    if RuleName::for_term(t) != Some(rule) {
        return Err(shape_error(rule, t));
    }
    let ty = judgment.ty;
    let mut ps = premises.into_iter();
    let mut next = || ps.next().ok_or_else(|| shape_error(rule, t));
    let mut multiset = MultisetCtx::new();
    let premises = match t {
        Term::Var(x) => {
            if let IType::Multiset(items) = &ty {
                if !items.is_empty() {
                    multiset.insert(x.clone(), items.clone());
                }
            }
            vec![]
        }
        Term::Sample(_) | Term::Case(..) | Term::Obs(..) | Term::Bool(_) => vec![],
        Term::Pair(a, b) | Term::App(a, b) => {
            let pa = rebuild(next()?, a, scope)?;
            let pb = rebuild(next()?, b, scope)?;
            merge(&mut multiset, &pa.judgment.multiset, &[]);
            merge(&mut multiset, &pb.judgment.multiset, &[]);
            vec![pa, pb]
        }
        Term::Der(v) => {
            let pv = rebuild(next()?, v, scope)?;
            merge(&mut multiset, &pv.judgment.multiset, &[]);
            vec![pv]
        }
        Term::Bang(body) => {
            let mut out = Vec::new();
            for p in ps.by_ref() {
                let p = rebuild(p, body, scope)?;
                merge(&mut multiset, &p.judgment.multiset, &[]);
                out.push(p);
            }
            out
        }
        Term::Lam(x, body) => {
            let IType::Arrow(arg, _) = &ty else {
                return Err(shape_error(rule, t));
            };
            let pb = rebuild(next()?, body, &bind(scope, x, arg))?;
            merge(&mut multiset, &pb.judgment.multiset, &[x]);
            vec![pb]
        }
        Term::Let(x, u, body) => {
            let pu = rebuild(next()?, u, scope)?;
            let pb = rebuild(next()?, body, &bind(scope, x, pu.ty()))?;
            merge(&mut multiset, &pu.judgment.multiset, &[]);
            merge(&mut multiset, &pb.judgment.multiset, &[x]);
            vec![pu, pb]
        }
        Term::LetPair(x, y, v, body) => {
            let pv = rebuild(next()?, v, scope)?;
            let IType::Tensor(k1, k2) = pv.ty() else {
                return Err(TypeError::new("letp needs a value of tensor type"));
            };
            let inner = bind(&bind(scope, x, k1), y, k2);
            let pb = rebuild(next()?, body, &inner)?;
            merge(&mut multiset, &pv.judgment.multiset, &[]);
            merge(&mut multiset, &pb.judgment.multiset, &[x, y]);
            vec![pv, pb]
        }
    };
    let mut j = Judgment::new(t.clone(), ty);
    j.ground = relevant(scope, t);
    j.multiset = multiset;
    Ok(Derivation::new(rule, j, premises))
}

/// Derivation for a term with ground type: normalise, type the normal form,
/// then expand back along the reduction one step at a time.
pub fn infer_ground(t: &Term, ctx: &GroundCtx, fuel: usize) -> Result<Derivation, InferError> {
    let trace = normalize(t, fuel)?;
    let mut d = infer_low(trace.result(), ctx)?;
    for i in (0..trace.steps.len()).rev() {
        let (path, rule) = &trace.steps[i];
        d = expand(&trace.terms[i], path, *rule, d, ctx)?;
    }
    Ok(d)
}

/// Subject expansion: from a derivation of the reduct, a derivation of `prev`,
/// which reduces to it by `rule` at `path`.
pub fn expand(prev: &Term, path: &[Step], rule: Rule, next: Derivation, ctx: &GroundCtx) -> Result<Derivation, TypeError> {
    let mut scope = ctx.clone();
    let mut index = Vec::new();
    let mut cursor = &next;
    let mut term = prev;
    for step in path {
        let (i, sub) = match (step, term) {
            (Step::AppFun, Term::App(f, _)) => (0, &**f),
            (Step::LetBound, Term::Let(_, u, _)) => (0, &**u),
            (Step::LetBody, Term::Let(x, _, b)) => {
                let bound_ty = cursor.premises.first().ok_or_else(|| shape_error(cursor.rule, term))?.ty();
                scope = bind(&scope, x, bound_ty);
                (1, &**b)
            }
            _ => return Err(TypeError::new("reduction path leaves the term")),
        };
        cursor = cursor.premises.get(i).ok_or_else(|| shape_error(cursor.rule, term))?;
        index.push(i);
        term = sub;
    }
    let redex = subterm(prev, path).ok_or_else(|| TypeError::new("reduction path leaves the term"))?;
    let rho = cursor.clone();
    let delta = match (rule, redex) {
        (Rule::Derelict, Term::Der(_)) => {
            let ty = rho.ty().clone();
            let bang = Derivation::new(
                RuleName::Bang,
                Judgment::new(Term::Bool(false), IType::Multiset(vec![ty.clone()])),
                vec![rho],
            );
            placeholder(RuleName::Der, ty, vec![bang])
        }
        (Rule::Pair, Term::LetPair(x, y, pair, s)) => {
            let Term::Pair(v, w) = &**pair else {
                return Err(TypeError::new("dpair redex without a pair"));
            };
            let mut occ = vec![Vec::new(), Vec::new()];
            let body = anti_subst(s, &rho, &[(x, 0), (y, 1)], &mut occ)?;
            let pv = value_derivation(v, &scope, Vec::new())?;
            let pw = value_derivation(w, &scope, Vec::new())?;
            if !pv.ty().is_ground() || !pw.ty().is_ground() {
                return Err(TypeError::new("letp over a pair with a non-ground component"));
            }
            let ty = IType::tensor(pv.ty().clone(), pw.ty().clone());
            let pair = placeholder(RuleName::Pair, ty, vec![pv, pw]);
            placeholder(RuleName::LetPair, body.ty().clone(), vec![pair, body])
        }
        (Rule::Subst, Term::Let(x, u, s)) => {
            let (frames, inner, frame_scope) = peel(u, &rho, &scope)?;
            let Some(v) = frames_end(u) else {
                return Err(TypeError::new("dsub redex without a value"));
            };
            let mut occ = vec![Vec::new()];
            let body = anti_subst(s, inner, &[(x, 0)], &mut occ)?;
            let pv = value_derivation(v, &frame_scope, occ.pop().unwrap_or_default())?;
            let bound = rewrap(frames, pv);
            placeholder(RuleName::Let, body.ty().clone(), vec![bound, body])
        }
        (Rule::Beta, Term::App(f, v)) => {
            let (frames, inner, _) = peel(f, &rho, &scope)?;
            let Some(Term::Lam(x, s)) = frames_end(f) else {
                return Err(TypeError::new("db redex without an abstraction"));
            };
            let mut occ = vec![Vec::new()];
            let body = anti_subst(s, inner, &[(x, 0)], &mut occ)?;
            let pv = value_derivation(v, &scope, occ.pop().unwrap_or_default())?;
            let result = body.ty().clone();
            let abs = placeholder(RuleName::Abs, IType::arrow(pv.ty().clone(), result.clone()), vec![body]);
            let fun = rewrap(frames, abs);
            placeholder(RuleName::App, result, vec![fun, pv])
        }
        _ => return Err(TypeError::new(format!("{rule} does not match the redex `{redex}`"))),
    };
    let mut whole = next;
    *whole.at_mut(&index).expect("path was just walked") = delta;
    rebuild(whole, prev, ctx)
}

fn placeholder(rule: RuleName, ty: IType, premises: Vec<Derivation>) -> Derivation {
    Derivation::new(rule, Judgment::new(Term::Bool(false), ty), premises)
}

/// Innermost term of a chain of `let` / `letp` frames.
fn frames_end(t: &Term) -> Option<&Term> {
    match t {
        Term::Let(_, _, b) | Term::LetPair(_, _, _, b) => frames_end(b),
        _ => Some(t),
    }
}

struct Frame {
    rule: RuleName,
    first: Derivation,
}

/// Splits the derivation of `S'<r>` into its frames and the derivation of `r`,
/// following the frame structure of `s_term = S<_>`. Also returns the scope
/// extended by the frame binders.
fn peel<'a>(s_term: &Term, d: &'a Derivation, scope: &Scope) -> Result<(Vec<Frame>, &'a Derivation, Scope), TypeError> {
    let mut frames = Vec::new();
    let mut scope = scope.clone();
    let mut term = s_term;
    let mut d = d;
    loop {
        match term {
            Term::Let(x, _, b) => {
                if d.rule != RuleName::Let || d.premises.len() != 2 {
                    return Err(shape_error(d.rule, term));
                }
                scope = bind(&scope, x, d.premises[0].ty());
                frames.push(Frame { rule: RuleName::Let, first: d.premises[0].clone() });
                d = &d.premises[1];
                term = b;
            }
            Term::LetPair(x, y, _, b) => {
                if d.rule != RuleName::LetPair || d.premises.len() != 2 {
                    return Err(shape_error(d.rule, term));
                }
                let IType::Tensor(k1, k2) = d.premises[0].ty() else {
                    return Err(TypeError::new("letp needs a value of tensor type"));
                };
                scope = bind(&bind(&scope, x, k1), y, k2);
                frames.push(Frame { rule: RuleName::LetPair, first: d.premises[0].clone() });
                d = &d.premises[1];
                term = b;
            }
            _ => return Ok((frames, d, scope)),
        }
    }
}

fn rewrap(frames: Vec<Frame>, inner: Derivation) -> Derivation {
    frames.into_iter().rev().fold(inner, |acc, f| {
        placeholder(f.rule, acc.ty().clone(), vec![f.first, acc])
    })
}

/// Walks `s` and the derivation of `s{x := v, ...}` in parallel, replacing the
/// derivations of the substituted values by variable axioms and collecting
/// them per target.
fn anti_subst(
    s: &Term,
    d: &Derivation,
    targets: &[(&Var, usize)],
    occ: &mut [Vec<Derivation>],
) -> Result<Derivation, TypeError> {
    if let Term::Var(y) = s {
        if let Some((_, k)) = targets.iter().find(|(x, _)| *x == y) {
            occ[*k].push(d.clone());
            return Ok(placeholder(RuleName::Var, d.ty().clone(), vec![]));
        }
        return Ok(d.clone());
    }
    if targets.iter().all(|(x, _)| !s.is_free(x)) {
        return Ok(d.clone());
    }
    let without = |bound: &[&Var]| -> Vec<(&Var, usize)> {
        targets.iter().filter(|(x, _)| !bound.contains(x)).cloned().collect()
    };
    let expect = |n: usize| -> Result<(), TypeError> {
        if d.premises.len() == n {
            Ok(())
        } else {
            Err(shape_error(d.rule, s))
        }
    };
    let premises = match s {
        Term::Case(..) | Term::Obs(..) | Term::Sample(_) | Term::Bool(_) | Term::Var(_) => {
            return Ok(d.clone())
        }
        Term::Pair(a, b) | Term::App(a, b) => {
            expect(2)?;
            vec![
                anti_subst(a, &d.premises[0], targets, occ)?,
                anti_subst(b, &d.premises[1], targets, occ)?,
            ]
        }
        Term::Der(v) => {
            expect(1)?;
            vec![anti_subst(v, &d.premises[0], targets, occ)?]
        }
        Term::Bang(body) => d
            .premises
            .iter()
            .map(|p| anti_subst(body, p, targets, occ))
            .collect::<Result<_, _>>()?,
        Term::Lam(x, body) => {
            expect(1)?;
            vec![anti_subst(body, &d.premises[0], &without(&[x]), occ)?]
        }
        Term::Let(x, u, body) => {
            expect(2)?;
            vec![
                anti_subst(u, &d.premises[0], targets, occ)?,
                anti_subst(body, &d.premises[1], &without(&[x]), occ)?,
            ]
        }
        Term::LetPair(x, y, v, body) => {
            expect(2)?;
            vec![
                anti_subst(v, &d.premises[0], targets, occ)?,
                anti_subst(body, &d.premises[1], &without(&[x, y]), occ)?,
            ]
        }
    };
    Ok(Derivation::new(d.rule, d.judgment.clone(), premises))
}

/// Derivation of a substituted value `v` given the derivations of its copies.
fn value_derivation(v: &Term, scope: &Scope, occurrences: Vec<Derivation>) -> Result<Derivation, TypeError> {
    match v {
        Term::Var(y) => match scope.get(y) {
            Some(ty) => Ok(placeholder(RuleName::Var, ty.clone(), vec![])),
            None => {
                let mut items = Vec::new();
                for o in occurrences {
                    match o.judgment.ty {
                        IType::Multiset(ts) => items.extend(ts),
                        other => return Err(TypeError::new(format!("variable `{y}` used at non-multiset type {other}"))),
                    }
                }
                Ok(placeholder(RuleName::Var, IType::Multiset(items), vec![]))
            }
        },
        Term::Pair(a, b) => {
            let pa = value_derivation(a, scope, Vec::new())?;
            let pb = value_derivation(b, scope, Vec::new())?;
            if !pa.ty().is_ground() || !pb.ty().is_ground() {
                return Err(TypeError::new(format!("pair `{v}` has a non-ground component")));
            }
            let ty = IType::tensor(pa.ty().clone(), pb.ty().clone());
            Ok(placeholder(RuleName::Pair, ty, vec![pa, pb]))
        }
        Term::Bang(_) => {
            let mut premises = Vec::new();
            for o in occurrences {
                if o.rule != RuleName::Bang {
                    return Err(shape_error(o.rule, v));
                }
                premises.extend(o.premises);
            }
            let ty = IType::Multiset(premises.iter().map(|p| p.ty().clone()).collect());
            Ok(placeholder(RuleName::Bang, ty, premises))
        }
        Term::Bool(_) => Err(TypeError::new("boolean constants are not typable")),
        _ => Err(TypeError::new(format!("`{v}` is not a value"))),
    }
}
