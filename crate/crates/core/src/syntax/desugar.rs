use std::collections::BTreeSet;

use super::pretty::clause_index;
use super::surface::{Clause, Expr, ExprKind, Pattern, Pos};
use super::term::{Bernoulli, Term, Var};
use super::SyntaxError;

/// Scott numeral for `k`.
pub fn numeral(k: u64) -> Term {
    let mut t = Term::bang(Term::lam("z", Term::lam("s", Term::der(Term::var("z")))));
    for _ in 0..k {
        t = Term::bang(Term::lam(
            "z",
            Term::lam("s", Term::app(Term::der(Term::var("s")), t)),
        ));
    }
    t
}

struct Fresh {
    taken: BTreeSet<String>,
    next: usize,
}

impl Fresh {
    fn var(&mut self) -> Var {
        loop {
            let name = format!("_z{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return Var::new(name);
            }
        }
    }
}

type Bindings = Vec<(Var, Term)>;

fn wrap(bs: Bindings, body: Term) -> Term {
    bs.into_iter()
        .rev()
        .fold(body, |acc, (x, u)| Term::Let(x, Box::new(u), Box::new(acc)))
}

fn right_nest(mut items: Vec<Term>) -> Term {
    let last = items.pop().expect("non-empty tuple");
    items.into_iter().rev().fold(last, |acc, t| Term::pair(t, acc))
}

fn bern(c: &Clause, pos: Pos) -> Result<Bernoulli, SyntaxError> {
    Bernoulli::new(c.prob).ok_or_else(|| SyntaxError::new(pos.line, pos.col, "probability must lie in [0, 1]"))
}

fn sorted_clauses(clauses: &[Clause], pos: Pos) -> Result<Vec<Bernoulli>, SyntaxError> {
    let mut out: Vec<Option<Bernoulli>> = vec![None; clauses.len()];
    for c in clauses {
        out[clause_index(&c.bits)] = Some(bern(c, pos)?);
    }
    out.into_iter()
        .map(|b| b.ok_or_else(|| SyntaxError::new(pos.line, pos.col, "incomplete case")))
        .collect()
}

fn leaves(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::Tuple(es) => es.iter().flat_map(leaves).collect(),
        _ => vec![e],
    }
}

/// Translates a surface expression into a core term.
///
/// Non-values in value positions are let-bound to fresh `_z` names.
pub fn desugar(e: &Expr) -> Result<Term, SyntaxError> {
    let mut taken = BTreeSet::new();
    e.identifiers(&mut taken);
    let mut fresh = Fresh { taken, next: 0 };
    Desugar { fresh: &mut fresh }.term(e)
}

struct Desugar<'a> {
    fresh: &'a mut Fresh,
}

impl Desugar<'_> {
    fn value(&mut self, e: &Expr, bs: &mut Bindings) -> Result<Term, SyntaxError> {
        Ok(match &e.kind {
            ExprKind::Var(x) => Term::Var(Var::new(x.clone())),
            ExprKind::Bool(b) => Term::Bool(*b),
            ExprKind::Num(k) => numeral(*k),
            ExprKind::Bang(inner) => Term::bang(self.term(inner)?),
            ExprKind::Tuple(es) => {
                let items = es.iter().map(|c| self.value(c, bs)).collect::<Result<Vec<_>, _>>()?;
                right_nest(items)
            }
            _ => {
                let u = self.term(e)?;
                let z = self.fresh.var();
                bs.push((z.clone(), u));
                Term::Var(z)
            }
        })
    }

    fn variable(&mut self, e: &Expr, bs: &mut Bindings) -> Result<Var, SyntaxError> {
        if let ExprKind::Var(x) = &e.kind {
            return Ok(Var::new(x.clone()));
        }
        let u = self.term(e)?;
        let z = self.fresh.var();
        bs.push((z.clone(), u));
        Ok(z)
    }

    fn destructure(&mut self, pat: &Pattern, v: Term, body: Term) -> Term {
        let Pattern::Tuple(ps) = pat else {
            unreachable!("destructure on a variable pattern")
        };
        let (head, rest) = ps.split_first().expect("tuple pattern");
        let rest_pat = if rest.len() == 1 { rest[0].clone() } else { Pattern::Tuple(rest.to_vec()) };
        let binder = |p: &Pattern, this: &mut Self| match p {
            Pattern::Var(x) => (Var::new(x.clone()), None),
            Pattern::Tuple(_) => (this.fresh.var(), Some(p.clone())),
        };
        let (x, xp) = binder(head, self);
        let (y, yp) = binder(&rest_pat, self);
        let mut inner = body;
        if let Some(p) = yp {
            inner = self.destructure(&p, Term::Var(y.clone()), inner);
        }
        if let Some(p) = xp {
            inner = self.destructure(&p, Term::Var(x.clone()), inner);
        }
        Term::LetPair(x, y, Box::new(v), Box::new(inner))
    }

    fn term(&mut self, e: &Expr) -> Result<Term, SyntaxError> {
        let mut bs = Bindings::new();
        let t = match &e.kind {
            ExprKind::Var(_) | ExprKind::Bool(_) | ExprKind::Num(_) | ExprKind::Bang(_) | ExprKind::Tuple(_) => {
                self.value(e, &mut bs)?
            }
            ExprKind::Der(inner) => Term::der(self.value(inner, &mut bs)?),
            ExprKind::Lam(x, body) => Term::Lam(Var::new(x.clone()), Box::new(self.term(body)?)),
            ExprKind::App(f, a) => {
                let f = self.term(f)?;
                Term::app(f, self.value(a, &mut bs)?)
            }
            ExprKind::Let(Pattern::Var(x), u, body) => {
                Term::Let(Var::new(x.clone()), Box::new(self.term(u)?), Box::new(self.term(body)?))
            }
            ExprKind::Let(pat, u, body) => {
                let v = self.value(u, &mut bs)?;
                let body = self.term(body)?;
                self.destructure(pat, v, body)
            }
            ExprKind::Sample(p) => Term::Sample(
                Bernoulli::new(*p).ok_or_else(|| SyntaxError::new(e.pos.line, e.pos.col, "probability must lie in [0, 1]"))?,
            ),
            ExprKind::Obs(inner, b) => Term::Obs(Box::new(Term::Var(self.variable(inner, &mut bs)?)), *b),
            ExprKind::Case(scrut, clauses) => {
                let clauses = sorted_clauses(clauses, e.pos)?;
                let arity = clauses.len().trailing_zeros() as usize;
                let comps = leaves(scrut);
                let vars = comps
                    .into_iter()
                    .map(|c| self.variable(c, &mut bs))
                    .collect::<Result<Vec<_>, _>>()?;
                if vars.len() == arity {
                    Term::case(right_nest(vars.into_iter().map(Term::Var).collect()), clauses)
                } else if vars.len() == 1 {
                    let names: Vec<Var> = (0..arity).map(|_| self.fresh.var()).collect();
                    let pat = Pattern::Tuple(names.iter().map(|v| Pattern::Var(v.as_str().to_string())).collect());
                    let body = Term::case(right_nest(names.into_iter().map(Term::Var).collect()), clauses);
                    self.destructure(&pat, Term::Var(vars[0].clone()), body)
                } else {
                    return Err(SyntaxError::new(
                        scrut.pos.line,
                        scrut.pos.col,
                        format!("scrutinee has {} components but clauses have {arity}", vars.len()),
                    ));
                }
            }
            ExprKind::IfZero(scrut, a, b) => {
                let v = self.value(scrut, &mut bs)?;
                let a = self.term(a)?;
                let b = self.term(b)?;
                let k = self.fresh.var();
                Term::app(Term::app(Term::der(v), Term::bang(a)), Term::bang(Term::Lam(k, Box::new(b))))
            }
        };
        Ok(wrap(bs, t))
    }
}

fn not_core<T>(e: &Expr, what: &str) -> Result<T, SyntaxError> {
    Err(SyntaxError::new(e.pos.line, e.pos.col, format!("{what} is not core syntax")))
}

fn core_value(e: &Expr, what: &str) -> Result<Term, SyntaxError> {
    let t = to_core(e)?;
    if t.is_value() {
        Ok(t)
    } else {
        Err(SyntaxError::new(e.pos.line, e.pos.col, format!("{what} must be a value")))
    }
}

/// Strict translation that accepts only core syntax.
pub fn to_core(e: &Expr) -> Result<Term, SyntaxError> {
    Ok(match &e.kind {
        ExprKind::Var(x) => Term::Var(Var::new(x.clone())),
        ExprKind::Bool(b) => Term::Bool(*b),
        ExprKind::Num(_) => return not_core(e, "a numeral"),
        ExprKind::IfZero(..) => return not_core(e, "ifZero"),
        ExprKind::Tuple(es) => right_nest(
            es.iter()
                .map(|c| core_value(c, "a tuple component"))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        ExprKind::Bang(inner) => Term::bang(to_core(inner)?),
        ExprKind::Der(inner) => Term::der(core_value(inner, "the argument of der")?),
        ExprKind::Lam(x, body) => Term::Lam(Var::new(x.clone()), Box::new(to_core(body)?)),
        ExprKind::App(f, a) => Term::app(to_core(f)?, core_value(a, "an argument")?),
        ExprKind::Let(Pattern::Var(x), u, body) => {
            Term::Let(Var::new(x.clone()), Box::new(to_core(u)?), Box::new(to_core(body)?))
        }
        ExprKind::Let(Pattern::Tuple(ps), v, body) => match ps.as_slice() {
            [Pattern::Var(x), Pattern::Var(y)] => Term::LetPair(
                Var::new(x.clone()),
                Var::new(y.clone()),
                Box::new(core_value(v, "the bound term of letp")?),
                Box::new(to_core(body)?),
            ),
            _ => return not_core(e, "a nested pattern"),
        },
        ExprKind::Sample(p) => Term::Sample(
            Bernoulli::new(*p).ok_or_else(|| SyntaxError::new(e.pos.line, e.pos.col, "probability must lie in [0, 1]"))?,
        ),
        ExprKind::Obs(inner, b) => match &inner.kind {
            ExprKind::Var(x) => Term::obs(x, *b),
            _ => return Err(SyntaxError::new(inner.pos.line, inner.pos.col, "obs expects a variable")),
        },
        ExprKind::Case(scrut, clauses) => {
            let clauses = sorted_clauses(clauses, e.pos)?;
            let v = core_value(scrut, "a case scrutinee")?;
            if v.tuple_arity() != clauses.len().trailing_zeros() as usize {
                return Err(SyntaxError::new(scrut.pos.line, scrut.pos.col, "scrutinee arity does not match the clauses"));
            }
            Term::case(v, clauses)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerals_are_values() {
        assert!(numeral(0).is_value());
        assert!(numeral(3).is_value());
        assert_eq!(numeral(2).free_vars().len(), 0);
    }
}
