use std::collections::{BTreeSet, HashMap};

use super::term::{Term, Var};

/// A name derived from `base` for which `taken` is false.
pub fn fresh_like(base: &Var, taken: impl Fn(&Var) -> bool) -> Var {
    let s = base.as_str();
    let stem = match s.rfind('_') {
        Some(i) if i + 1 < s.len() && s[i + 1..].bytes().all(|c| c.is_ascii_digit()) => &s[..i],
        _ => s,
    };
    (1..)
        .map(|k| Var::new(format!("{stem}_{k}")))
        .find(|v| !taken(v))
        .expect("unbounded name supply")
}

/// Capture-avoiding substitution `t{x := v}`.
pub fn substitute(t: &Term, x: &Var, v: &Term) -> Term {
    let fv = v.free_vars();
    subst(t, x, v, &fv)
}

fn subst(t: &Term, x: &Var, v: &Term, fv: &BTreeSet<Var>) -> Term {
    match t {
        Term::Var(y) => {
            if y == x {
                v.clone()
            } else {
                t.clone()
            }
        }
        Term::Bool(_) | Term::Sample(_) => t.clone(),
        Term::Pair(a, b) => Term::Pair(Box::new(subst(a, x, v, fv)), Box::new(subst(b, x, v, fv))),
        Term::App(a, b) => Term::App(Box::new(subst(a, x, v, fv)), Box::new(subst(b, x, v, fv))),
        Term::Bang(a) => Term::Bang(Box::new(subst(a, x, v, fv))),
        Term::Der(a) => Term::Der(Box::new(subst(a, x, v, fv))),
        Term::Case(a, cl) => Term::Case(Box::new(subst(a, x, v, fv)), cl.clone()),
        Term::Obs(a, b) => Term::Obs(Box::new(subst(a, x, v, fv)), *b),
        Term::Lam(y, body) => {
            let (y, body) = under_binder(y, body, x, v, fv);
            Term::Lam(y, Box::new(body))
        }
        Term::Let(y, u, body) => {
            let u = subst(u, x, v, fv);
            let (y, body) = under_binder(y, body, x, v, fv);
            Term::Let(y, Box::new(u), Box::new(body))
        }
        Term::LetPair(y, z, w, body) => {
            let w = subst(w, x, v, fv);
            if y == x || z == x || !body.is_free(x) {
                return Term::LetPair(y.clone(), z.clone(), Box::new(w), body.clone());
            }
            let (y, body) = rename_if_captures(y, body, x, fv, Some(z));
            let (z, body) = rename_if_captures(z, &body, x, fv, Some(&y));
            let body = subst(&body, x, v, fv);
            Term::LetPair(y, z, Box::new(w), Box::new(body))
        }
    }
}

fn under_binder(y: &Var, body: &Term, x: &Var, v: &Term, fv: &BTreeSet<Var>) -> (Var, Term) {
    if y == x || !body.is_free(x) {
        return (y.clone(), body.clone());
    }
    let (y, body) = rename_if_captures(y, body, x, fv, None);
    let body = subst(&body, x, v, fv);
    (y, body)
}

fn rename_if_captures(
    y: &Var,
    body: &Term,
    x: &Var,
    fv: &BTreeSet<Var>,
    sibling: Option<&Var>,
) -> (Var, Term) {
    if !fv.contains(y) {
        return (y.clone(), body.clone());
    }
    let body_fv = body.free_vars();
    let fresh = fresh_like(y, |c| fv.contains(c) || body_fv.contains(c) || c == x || Some(c) == sibling);
    let renamed = substitute(body, y, &Term::Var(fresh.clone()));
    (fresh, renamed)
}

/// Renames every binder in `t` that is free in `avoid`, keeping the term
/// α-equivalent. Used before moving a substitution list over another term.
pub fn rename_binders_away(t: &Term, avoid: &BTreeSet<Var>) -> Term {
    match t {
        Term::Let(y, u, body) if avoid.contains(y) => {
            let fresh = pick(y, avoid, body);
            let body = substitute(body, y, &Term::Var(fresh.clone()));
            Term::Let(fresh, u.clone(), Box::new(body))
        }
        Term::LetPair(y, z, w, body) if avoid.contains(y) || avoid.contains(z) => {
            let mut body = (**body).clone();
            let mut names = [y.clone(), z.clone()];
            for i in 0..2 {
                if avoid.contains(&names[i]) {
                    let other = names[1 - i].clone();
                    let fv = body.free_vars();
                    let fresh = fresh_like(&names[i], |c| avoid.contains(c) || fv.contains(c) || *c == other);
                    body = substitute(&body, &names[i], &Term::Var(fresh.clone()));
                    names[i] = fresh;
                }
            }
            let [y, z] = names;
            Term::LetPair(y, z, w.clone(), Box::new(body))
        }
        _ => t.clone(),
    }
}

fn pick(y: &Var, avoid: &BTreeSet<Var>, body: &Term) -> Var {
    let fv = body.free_vars();
    fresh_like(y, |c| avoid.contains(c) || fv.contains(c))
}

/// α-equivalence of two terms.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    canonical(a) == canonical(b)
}

/// Renames bound variables to `%k` in binding order, giving a representative
/// of the α-class.
pub fn canonical(t: &Term) -> Term {
    let mut env: HashMap<Var, Vec<Var>> = HashMap::new();
    let mut next = 0usize;
    canon(t, &mut env, &mut next)
}

fn canon(t: &Term, env: &mut HashMap<Var, Vec<Var>>, next: &mut usize) -> Term {
    fn bind(x: &Var, env: &mut HashMap<Var, Vec<Var>>, next: &mut usize) -> Var {
        let fresh = Var::new(format!("%{next}"));
        *next += 1;
        env.entry(x.clone()).or_default().push(fresh.clone());
        fresh
    }
    fn unbind(x: &Var, env: &mut HashMap<Var, Vec<Var>>) {
        if let Some(stack) = env.get_mut(x) {
            stack.pop();
        }
    }
    match t {
        Term::Var(x) => Term::Var(env.get(x).and_then(|s| s.last()).cloned().unwrap_or_else(|| x.clone())),
        Term::Bool(_) | Term::Sample(_) => t.clone(),
        Term::Pair(a, b) => Term::Pair(Box::new(canon(a, env, next)), Box::new(canon(b, env, next))),
        Term::App(a, b) => Term::App(Box::new(canon(a, env, next)), Box::new(canon(b, env, next))),
        Term::Bang(a) => Term::Bang(Box::new(canon(a, env, next))),
        Term::Der(a) => Term::Der(Box::new(canon(a, env, next))),
        Term::Case(a, cl) => Term::Case(Box::new(canon(a, env, next)), cl.clone()),
        Term::Obs(a, b) => Term::Obs(Box::new(canon(a, env, next)), *b),
        Term::Lam(x, body) => {
            let y = bind(x, env, next);
            let body = canon(body, env, next);
            unbind(x, env);
            Term::Lam(y, Box::new(body))
        }
        Term::Let(x, u, body) => {
            let u = canon(u, env, next);
            let y = bind(x, env, next);
            let body = canon(body, env, next);
            unbind(x, env);
            Term::Let(y, Box::new(u), Box::new(body))
        }
        Term::LetPair(x, z, w, body) => {
            let w = canon(w, env, next);
            let x2 = bind(x, env, next);
            let z2 = bind(z, env, next);
            let body = canon(body, env, next);
            unbind(z, env);
            unbind(x, env);
            Term::LetPair(x2, z2, Box::new(w), Box::new(body))
        }
    }
}
