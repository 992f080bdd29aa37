use std::collections::BTreeMap;

use thiserror::Error;

use super::derivation::{Derivation, MultisetCtx, RuleName};
use super::infer::Scope;
use super::itype::{same_multiset, IType, Name, Observation};
use crate::syntax::{Term, Var};

/// First violated node of a derivation, addressed by premise indices.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid derivation at node {path:?}: {message}")]
pub struct CheckError {
    pub path: Vec<usize>,
    pub message: String,
}

type Check = Result<(), CheckError>;

fn fail(path: &[usize], message: impl Into<String>) -> Check {
    Err(CheckError { path: path.to_vec(), message: message.into() })
}

fn walk_paths<'a>(d: &'a Derivation, path: &mut Vec<usize>, f: &mut impl FnMut(&'a Derivation, &[usize]) -> Check) -> Check {
    f(d, path)?;
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        walk_paths(p, path, f)?;
        path.pop();
    }
    Ok(())
}

/// Validates every rule instance, the naming condition and the consistency of
/// observations.
pub fn check(d: &Derivation) -> Check {
    let mut status: BTreeMap<Name, Observation> = BTreeMap::new();
    walk_paths(d, &mut Vec::new(), &mut |n, path| {
        let mut types: Vec<&IType> = vec![&n.judgment.ty];
        types.extend(n.judgment.ground.values());
        types.extend(n.judgment.multiset.values().flatten());
        for t in types {
            for a in t.atoms() {
                if let Some(prev) = status.insert(a.name.clone(), a.obs) {
                    if prev != a.obs {
                        return fail(path, format!("atom {} has inconsistent observation status", a.name));
                    }
                }
            }
        }
        Ok(())
    })?;
    let mut mains: Vec<Name> = Vec::new();
    walk_paths(d, &mut Vec::new(), &mut |n, path| {
        if n.rule.is_probabilistic() {
            if let Some(a) = n.ty().as_atom() {
                if mains.contains(&a.name) {
                    return fail(path, format!("main name {} is introduced twice", a.name));
                }
                mains.push(a.name.clone());
            }
        }
        Ok(())
    })?;
    let scope: Scope = d.judgment.ground.clone();
    check_node(d, &scope, &mut Vec::new())
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

fn merged(premises: &[&Derivation], except: &[&[&Var]]) -> MultisetCtx {
    let mut out = MultisetCtx::new();
    for (i, p) in premises.iter().enumerate() {
        for (x, ts) in &p.judgment.multiset {
            if !except.get(i).is_some_and(|e| e.contains(&x)) {
                out.entry(x.clone()).or_default().extend(ts.iter().cloned());
            }
        }
    }
    out
}

fn same_ctx(a: &MultisetCtx, b: &MultisetCtx) -> bool {
    let keys = |m: &MultisetCtx| -> Vec<Var> { m.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k.clone()).collect() };
    keys(a) == keys(b)
        && a.iter().all(|(x, ts)| ts.is_empty() || same_multiset(ts, b.get(x).map(Vec::as_slice).unwrap_or(&[])))
}

/// Multiset type that the body of a binder assigns to `x`.
fn usage(body: &Derivation, x: &Var) -> Vec<IType> {
    body.judgment.multiset.get(x).cloned().unwrap_or_default()
}

fn check_binder(body: &Derivation, x: &Var, ty: &IType, path: &[usize]) -> Check {
    match ty {
        t if t.is_ground() => {
            if body.judgment.multiset.contains_key(x) {
                return fail(path, format!("ground variable `{x}` appears in a multiset context"));
            }
            Ok(())
        }
        IType::Multiset(items) => {
            if body.judgment.ground.contains_key(x) {
                return fail(path, format!("multiset variable `{x}` appears in a ground context"));
            }
            if !same_multiset(items, &usage(body, x)) {
                return fail(path, format!("`{x}` is bound at {ty} but used at {}", IType::Multiset(usage(body, x))));
            }
            Ok(())
        }
        other => fail(path, format!("`{x}` is bound at non-positive type {other}")),
    }
}

fn check_node(d: &Derivation, scope: &Scope, path: &mut Vec<usize>) -> Check {
    let j = &d.judgment;
    let t = &j.subject;
    if RuleName::for_term(t) != Some(d.rule) {
        return fail(path, format!("{} cannot type `{t}`", d.rule));
    }
    let fv = t.free_vars();
    for (x, ty) in &j.ground {
        if !ty.is_ground() {
            return fail(path, format!("ground context entry `{x}: {ty}` is not ground"));
        }
        if j.multiset.contains_key(x) {
            return fail(path, format!("`{x}` occurs in both contexts"));
        }
    }
    for x in j.multiset.keys() {
        if !fv.contains(x) || scope.contains_key(x) {
            return fail(path, format!("multiset context mentions `{x}`, which is not a free multiset variable"));
        }
    }
    let expected: Vec<(&Var, &IType)> = scope.iter().filter(|(x, _)| fv.contains(*x)).collect();
    let actual: Vec<(&Var, &IType)> = j.ground.iter().collect();
    if expected.len() != actual.len() || expected.iter().zip(&actual).any(|(a, b)| a.0 != b.0 || !a.1.same(b.1)) {
        return fail(path, "ground context does not agree with the enclosing scope");
    }
    let ps: Vec<&Derivation> = d.premises.iter().collect();
    let arity = |n: usize| -> Check {
        if ps.len() == n {
            Ok(())
        } else {
            fail(path, format!("{} expects {n} premises, found {}", d.rule, ps.len()))
        }
    };
    let subject_is = |p: &Derivation, s: &Term, path: &[usize]| -> Check {
        if p.subject() == s {
            Ok(())
        } else {
            fail(path, format!("premise subject `{}` should be `{s}`", p.subject()))
        }
    };
    let mut children: Vec<Scope> = Vec::new();
    match t {
        Term::Var(x) => {
            arity(0)?;
            match &j.ty {
                ty if ty.is_ground() => {
                    if !scope.get(x).is_some_and(|s| s.same(ty)) || !j.multiset.is_empty() {
                        return fail(path, format!("`{x}` does not have type {ty} in its context"));
                    }
                }
                IType::Multiset(items) => {
                    if scope.contains_key(x) {
                        return fail(path, format!("ground variable `{x}` used at multiset type"));
                    }
                    let own = j.multiset.get(x).cloned().unwrap_or_default();
                    if !same_multiset(items, &own) || j.multiset.keys().any(|k| k != x) {
                        return fail(path, format!("multiset context must be exactly `{x}: {}`", j.ty));
                    }
                }
                other => return fail(path, format!("variable typed at {other}")),
            }
        }
        Term::Sample(_) => {
            arity(0)?;
            let Some(a) = j.ty.as_atom() else {
                return fail(path, "sample must have atomic type");
            };
            if scope.values().any(|s| s.names().contains(&a.name)) {
                return fail(path, format!("main name {} already occurs in scope", a.name));
            }
        }
        Term::Case(v, clauses) => {
            arity(0)?;
            let Some(a) = j.ty.as_atom() else {
                return fail(path, "case must have atomic type");
            };
            let Some(vars) = v.tuple_vars() else {
                return fail(path, "case scrutinee must be a tuple of variables");
            };
            if clauses.len() != 1 << vars.len() {
                return fail(path, "case needs one clause per boolean tuple");
            }
            for x in vars {
                match scope.get(x).and_then(IType::as_atom) {
                    Some(y) if y.name == a.name => {
                        return fail(path, format!("main name {} also types the scrutinee", a.name))
                    }
                    Some(_) => {}
                    None => return fail(path, format!("scrutinee `{x}` is not of atomic type")),
                }
            }
            if scope.values().any(|s| s.names().contains(&a.name)) {
                return fail(path, format!("main name {} already occurs in scope", a.name));
            }
        }
        Term::Obs(v, b) => {
            arity(0)?;
            let Term::Var(x) = &**v else {
                return fail(path, "obs expects a variable");
            };
            let ok = match (scope.get(x).and_then(IType::as_atom), j.ty.as_atom()) {
                (Some(c), Some(a)) => c == a && a.obs == Observation::Seen(*b),
                _ => false,
            };
            if !ok {
                return fail(path, format!("obs({x} = ..) must have the observed type of `{x}`"));
            }
        }
        Term::Bool(_) => return fail(path, "boolean constants are not typable"),
        Term::Pair(a, b) => {
            arity(2)?;
            subject_is(ps[0], a, path)?;
            subject_is(ps[1], b, path)?;
            if !ps[0].ty().is_ground() || !ps[1].ty().is_ground() {
                return fail(path, "pair components must have ground types");
            }
            if j.ty != IType::tensor(ps[0].ty().clone(), ps[1].ty().clone()) {
                return fail(path, "pair type must be the tensor of its components");
            }
            children = vec![scope.clone(), scope.clone()];
        }
        Term::Let(x, u, body) => {
            arity(2)?;
            subject_is(ps[0], u, path)?;
            subject_is(ps[1], body, path)?;
            if !ps[0].ty().is_positive() {
                return fail(path, "let-bound term must have positive type");
            }
            if !ps[1].ty().same(&j.ty) {
                return fail(path, "let has the type of its body");
            }
            check_binder(ps[1], x, ps[0].ty(), path)?;
            children = vec![scope.clone(), bind(scope, x, ps[0].ty())];
        }
        Term::LetPair(x, y, v, body) => {
            arity(2)?;
            subject_is(ps[0], v, path)?;
            subject_is(ps[1], body, path)?;
            let IType::Tensor(k1, k2) = ps[0].ty() else {
                return fail(path, "letp needs a value of tensor type");
            };
            if !ps[0].ty().is_ground() {
                return fail(path, "letp needs a ground value");
            }
            if !ps[1].ty().same(&j.ty) {
                return fail(path, "letp has the type of its body");
            }
            check_binder(ps[1], x, k1, path)?;
            check_binder(ps[1], y, k2, path)?;
            children = vec![scope.clone(), bind(&bind(scope, x, k1), y, k2)];
        }
        Term::Lam(x, body) => {
            arity(1)?;
            subject_is(ps[0], body, path)?;
            let IType::Arrow(p, a) = &j.ty else {
                return fail(path, "abstraction must have arrow type");
            };
            if !a.same(ps[0].ty()) {
                return fail(path, "arrow target must be the type of the body");
            }
            check_binder(ps[0], x, p, path)?;
            if p.is_ground() && body.is_free(x) && !ps[0].judgment.ground.get(x).is_some_and(|t| t.same(p)) {
                return fail(path, format!("`{x}` must have type {p} in the body"));
            }
            children = vec![bind(scope, x, p)];
        }
        Term::App(f, v) => {
            arity(2)?;
            subject_is(ps[0], f, path)?;
            subject_is(ps[1], v, path)?;
            let IType::Arrow(p, a) = ps[0].ty() else {
                return fail(path, "applied term must have arrow type");
            };
            if !p.same(ps[1].ty()) || !a.same(&j.ty) {
                return fail(path, "argument or result type does not match the arrow");
            }
            children = vec![scope.clone(), scope.clone()];
        }
        Term::Bang(body) => {
            let IType::Multiset(items) = &j.ty else {
                return fail(path, "thunk must have multiset type");
            };
            if items.len() != ps.len() {
                return fail(path, "thunk needs one premise per multiset element");
            }
            for p in &ps {
                subject_is(p, body, path)?;
            }
            let tys: Vec<IType> = ps.iter().map(|p| p.ty().clone()).collect();
            if !same_multiset(items, &tys) {
                return fail(path, "multiset type must collect the premise types");
            }
            children = vec![scope.clone(); ps.len()];
        }
        Term::Der(v) => {
            arity(1)?;
            subject_is(ps[0], v, path)?;
            if !ps[0].ty().same(&IType::Multiset(vec![j.ty.clone()])) {
                return fail(path, "der needs a singleton multiset");
            }
            children = vec![scope.clone()];
        }
    }
    let binders: Vec<Vec<&Var>> = match t {
        Term::Let(x, ..) => vec![vec![], vec![x]],
        Term::LetPair(x, y, ..) => vec![vec![], vec![x, y]],
        Term::Lam(x, _) => vec![vec![x]],
        _ => vec![],
    };
    if d.rule != RuleName::Var {
        let except: Vec<&[&Var]> = binders.iter().map(Vec::as_slice).collect();
        if !same_ctx(&j.multiset, &merged(&ps, &except)) {
            return fail(path, "multiset context is not the sum of the premises' contexts");
        }
    }
    for (i, (p, s)) in ps.iter().zip(&children).enumerate() {
        path.push(i);
        check_node(p, s, path)?;
        path.pop();
    }
    Ok(())
}
