use std::collections::BTreeSet;

use super::term::Prob;

/// Source position (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Var(String),
    Tuple(Vec<Pattern>),
}

impl Pattern {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            Pattern::Var(x) => vec![x.as_str()],
            Pattern::Tuple(ps) => ps.iter().flat_map(|p| p.vars()).collect(),
        }
    }
}

/// A case clause: the flattened Boolean pattern and its Bernoulli parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub bits: Vec<bool>,
    pub prob: Prob,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Var(String),
    Bool(bool),
    Num(u64),
    Tuple(Vec<Expr>),
    Bang(Box<Expr>),
    Der(Box<Expr>),
    Lam(String, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Let(Pattern, Box<Expr>, Box<Expr>),
    Sample(Prob),
    Case(Box<Expr>, Vec<Clause>),
    Obs(Box<Expr>, bool),
    IfZero(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Surface expression with its source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }

    fn boxed(kind: ExprKind, pos: Pos) -> Box<Self> {
        Box::new(Expr { kind, pos })
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match &self.kind {
            ExprKind::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            ExprKind::Bool(_) | ExprKind::Num(_) | ExprKind::Sample(_) => {}
            ExprKind::Tuple(es) => es.iter().for_each(|e| e.collect_free(bound, out)),
            ExprKind::Bang(e) | ExprKind::Der(e) | ExprKind::Case(e, _) | ExprKind::Obs(e, _) => {
                e.collect_free(bound, out)
            }
            ExprKind::Lam(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            ExprKind::App(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            ExprKind::Let(p, u, body) => {
                u.collect_free(bound, out);
                let vars = p.vars();
                let n = vars.len();
                bound.extend(vars.into_iter().map(String::from));
                body.collect_free(bound, out);
                bound.truncate(bound.len() - n);
            }
            ExprKind::IfZero(a, b, c) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
                c.collect_free(bound, out);
            }
        }
    }

    /// Every identifier occurring in the expression.
    pub fn identifiers(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            ExprKind::Var(x) => {
                out.insert(x.clone());
            }
            ExprKind::Bool(_) | ExprKind::Num(_) | ExprKind::Sample(_) => {}
            ExprKind::Tuple(es) => es.iter().for_each(|e| e.identifiers(out)),
            ExprKind::Bang(e) | ExprKind::Der(e) | ExprKind::Case(e, _) | ExprKind::Obs(e, _) => {
                e.identifiers(out)
            }
            ExprKind::Lam(x, body) => {
                out.insert(x.clone());
                body.identifiers(out);
            }
            ExprKind::App(a, b) => {
                a.identifiers(out);
                b.identifiers(out);
            }
            ExprKind::Let(p, u, body) => {
                out.extend(p.vars().into_iter().map(String::from));
                u.identifiers(out);
                body.identifiers(out);
            }
            ExprKind::IfZero(a, b, c) => {
                a.identifiers(out);
                b.identifiers(out);
                c.identifiers(out);
            }
        }
    }

    /// Capture-avoiding substitution of `with` for the free occurrences of `x`.
    pub fn substitute(&self, x: &str, with: &Expr) -> Expr {
        let fv = with.free_vars();
        let mut taken = BTreeSet::new();
        self.identifiers(&mut taken);
        with.identifiers(&mut taken);
        self.subst(x, with, &fv, &mut taken)
    }

    fn subst(&self, x: &str, with: &Expr, fv: &BTreeSet<String>, taken: &mut BTreeSet<String>) -> Expr {
        let pos = self.pos;
        let go = |e: &Expr, taken: &mut BTreeSet<String>| Box::new(e.subst(x, with, fv, taken));
        let kind = match &self.kind {
            ExprKind::Var(y) if y == x => return with.clone(),
            ExprKind::Var(_) | ExprKind::Bool(_) | ExprKind::Num(_) | ExprKind::Sample(_) => {
                return self.clone()
            }
            ExprKind::Tuple(es) => ExprKind::Tuple(es.iter().map(|e| *go(e, taken)).collect()),
            ExprKind::Bang(e) => ExprKind::Bang(go(e, taken)),
            ExprKind::Der(e) => ExprKind::Der(go(e, taken)),
            ExprKind::Case(e, cs) => ExprKind::Case(go(e, taken), cs.clone()),
            ExprKind::Obs(e, b) => ExprKind::Obs(go(e, taken), *b),
            ExprKind::App(a, b) => ExprKind::App(go(a, taken), go(b, taken)),
            ExprKind::IfZero(a, b, c) => ExprKind::IfZero(go(a, taken), go(b, taken), go(c, taken)),
            ExprKind::Lam(y, body) => {
                if y == x {
                    return self.clone();
                }
                let (p, body) = freshen(&Pattern::Var(y.clone()), body, fv, taken);
                let Pattern::Var(y) = p else { unreachable!() };
                ExprKind::Lam(y, go(&body, taken))
            }
            ExprKind::Let(p, u, body) => {
                let u = go(u, taken);
                if p.vars().contains(&x) {
                    ExprKind::Let(p.clone(), u, body.clone())
                } else {
                    let (p, body) = freshen(p, body, fv, taken);
                    ExprKind::Let(p, u, go(&body, taken))
                }
            }
        };
        Expr::new(kind, pos)
    }
}

fn freshen(p: &Pattern, body: &Expr, fv: &BTreeSet<String>, taken: &mut BTreeSet<String>) -> (Pattern, Expr) {
    match p {
        Pattern::Var(y) if fv.contains(y) => {
            let fresh = super::subst::fresh_like(&super::term::Var::new(y.clone()), |v| {
                taken.contains(v.as_str())
            })
            .as_str()
            .to_string();
            taken.insert(fresh.clone());
            let renamed = body.substitute(y, &Expr::new(ExprKind::Var(fresh.clone()), body.pos));
            (Pattern::Var(fresh), renamed)
        }
        Pattern::Var(_) => (p.clone(), body.clone()),
        Pattern::Tuple(ps) => {
            let mut body = body.clone();
            let mut out = Vec::new();
            for q in ps {
                let (q, b) = freshen(q, &body, fv, taken);
                body = b;
                out.push(q);
            }
            (Pattern::Tuple(out), body)
        }
    }
}

/// A program: top-level definitions followed by a main expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub defs: Vec<(String, Expr)>,
    pub main: Expr,
}

impl Program {
    /// Inlines the definitions into the main expression, last definition first.
    pub fn expand(&self) -> Expr {
        self.defs
            .iter()
            .rev()
            .fold(self.main.clone(), |acc, (name, body)| acc.substitute(name, body))
    }
}

pub(crate) fn mk(kind: ExprKind, pos: Pos) -> Box<Expr> {
    Expr::boxed(kind, pos)
}
