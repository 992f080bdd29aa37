use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::lexer::{tokenize, Spanned, Tok};
use super::pretty::clause_bits;
use super::surface::{mk, Clause, Expr, ExprKind, Pattern, Pos, Program};
use super::term::Prob;
use super::SyntaxError;

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
}

/// Parses a whole program: `def` bindings followed by the main expression.
pub fn parse_program(src: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser { toks: tokenize(src)?, at: 0 };
    let mut defs = Vec::new();
    while p.peek() == &Tok::Def {
        p.bump();
        let name = p.ident()?;
        p.expect(Tok::Eq)?;
        let body = p.expr()?;
        p.expect(Tok::Semi)?;
        defs.push((name, body));
    }
    let main = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(Program { defs, main })
}

fn starts_unary(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Ident(_)
            | Tok::True
            | Tok::False
            | Tok::Number(_)
            | Tok::LParen
            | Tok::LAngle
            | Tok::Bang
            | Tok::Der
            | Tok::Sample
            | Tok::Case
            | Tok::Obs
    )
}

fn leaves(e: &Expr) -> usize {
    match &e.kind {
        ExprKind::Tuple(es) => es.iter().map(leaves).sum(),
        _ => 1,
    }
}

fn parse_decimal(text: &str) -> Option<Prob> {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if int.len() + frac.len() > 18 {
        return None;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let num: i64 = format!("{int}{frac}").parse().ok()?;
    Some(Prob::new(num, den))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        let s = &self.toks[self.at];
        Pos { line: s.line, col: s.col }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let p = self.pos();
        Err(SyntaxError::new(p.line, p.col, msg))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", tok.describe(), self.peek().describe()))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Let | Tok::LetP => {
                let letp = self.bump() == Tok::LetP;
                let pat = self.pattern()?;
                if letp && !matches!(pat, Pattern::Tuple(_)) {
                    return self.error("letp expects a pair pattern");
                }
                self.expect(Tok::Eq)?;
                let bound = self.expr()?;
                self.expect(Tok::In)?;
                let body = self.expr()?;
                Ok(Expr::new(ExprKind::Let(pat, Box::new(bound), Box::new(body)), pos))
            }
            Tok::Backslash => {
                self.bump();
                let mut xs = vec![self.ident()?];
                while let Tok::Ident(_) = self.peek() {
                    xs.push(self.ident()?);
                }
                self.expect(Tok::Dot)?;
                let body = self.expr()?;
                Ok(xs
                    .into_iter()
                    .rev()
                    .fold(body, |acc, x| Expr::new(ExprKind::Lam(x, Box::new(acc)), pos)))
            }
            Tok::IfZero => {
                self.bump();
                let scrut = self.expr()?;
                self.expect(Tok::Then)?;
                let a = self.expr()?;
                self.expect(Tok::Else)?;
                let b = self.expr()?;
                Ok(Expr::new(ExprKind::IfZero(Box::new(scrut), Box::new(a), Box::new(b)), pos))
            }
            _ => self.app(),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, SyntaxError> {
        if self.peek() == &Tok::LAngle {
            self.bump();
            let mut ps = vec![self.pattern()?];
            while self.peek() == &Tok::Comma {
                self.bump();
                ps.push(self.pattern()?);
            }
            self.expect(Tok::RAngle)?;
            if ps.len() == 1 {
                return Ok(ps.pop().unwrap());
            }
            let mut seen = std::collections::BTreeSet::new();
            let pat = Pattern::Tuple(ps);
            for v in pat.vars() {
                if !seen.insert(v.to_string()) {
                    return self.error(format!("variable `{v}` bound twice in pattern"));
                }
            }
            Ok(pat)
        } else {
            Ok(Pattern::Var(self.ident()?))
        }
    }

    fn app(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        let mut f = self.unary()?;
        while starts_unary(self.peek()) {
            let arg = self.unary()?;
            f = Expr::new(ExprKind::App(Box::new(f), Box::new(arg)), pos);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::new(ExprKind::Bang(Box::new(self.unary()?)), pos))
            }
            Tok::Der => {
                self.bump();
                Ok(Expr::new(ExprKind::Der(Box::new(self.unary()?)), pos))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                Ok(Expr::new(ExprKind::Var(x), pos))
            }
            Tok::True | Tok::False => {
                let b = self.bump() == Tok::True;
                Ok(Expr::new(ExprKind::Bool(b), pos))
            }
            Tok::Number(n) => {
                if n.contains('.') {
                    return self.error(format!("unexpected decimal `{n}` in term position"));
                }
                let Ok(k) = n.parse::<u64>() else {
                    return self.error(format!("numeral `{n}` is too large"));
                };
                self.bump();
                Ok(Expr::new(ExprKind::Num(k), pos))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LAngle => {
                self.bump();
                let mut es = vec![self.expr()?];
                while self.peek() == &Tok::Comma {
                    self.bump();
                    es.push(self.expr()?);
                }
                self.expect(Tok::RAngle)?;
                if es.len() == 1 {
                    return Ok(es.pop().unwrap());
                }
                Ok(Expr::new(ExprKind::Tuple(es), pos))
            }
            Tok::Sample => {
                self.bump();
                let p = self.bern()?;
                Ok(Expr::new(ExprKind::Sample(p), pos))
            }
            Tok::Obs => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::Eq)?;
                let b = self.bool_lit()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::new(ExprKind::Obs(Box::new(e), b), pos))
            }
            Tok::Case => self.case(),
            other => self.error(format!("expected a term, found {}", other.describe())),
        }
    }

    fn bool_lit(&mut self) -> Result<bool, SyntaxError> {
        let b = match self.peek() {
            Tok::True => true,
            Tok::False => false,
            Tok::Ident(s) if s == "t" => true,
            Tok::Ident(s) if s == "f" => false,
            other => return self.error(format!("expected a boolean, found {}", other.describe())),
        };
        self.bump();
        Ok(b)
    }

    fn bern(&mut self) -> Result<Prob, SyntaxError> {
        self.expect(Tok::Bern)?;
        self.expect(Tok::LParen)?;
        let pos = self.pos();
        let p = self.prob()?;
        if p < Prob::zero() || p > Prob::one() {
            return Err(SyntaxError::new(pos.line, pos.col, "probability must lie in [0, 1]"));
        }
        self.expect(Tok::RParen)?;
        Ok(p)
    }

    fn number(&mut self) -> Result<Prob, SyntaxError> {
        match self.peek().clone() {
            Tok::Number(n) => match parse_decimal(&n) {
                Some(p) => {
                    self.bump();
                    Ok(p)
                }
                None => self.error(format!("number `{n}` out of range")),
            },
            other => self.error(format!("expected a probability, found {}", other.describe())),
        }
    }

    fn prob(&mut self) -> Result<Prob, SyntaxError> {
        let num = self.number()?;
        if self.peek() != &Tok::Slash {
            return Ok(num);
        }
        self.bump();
        let den = self.number()?;
        if den.is_zero() {
            return self.error("division by zero in probability");
        }
        Ok(num / den)
    }

    fn clause_pattern(&mut self, out: &mut Vec<bool>) -> Result<(), SyntaxError> {
        if self.peek() == &Tok::LAngle {
            self.bump();
            self.clause_pattern(out)?;
            while self.peek() == &Tok::Comma {
                self.bump();
                self.clause_pattern(out)?;
            }
            self.expect(Tok::RAngle)
        } else {
            out.push(self.bool_lit()?);
            Ok(())
        }
    }

    fn case(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        self.expect(Tok::Case)?;
        let scrut = self.expr()?;
        self.expect(Tok::Of)?;
        self.expect(Tok::LBrace)?;
        let mut clauses: Vec<Clause> = Vec::new();
        let mut seen = BTreeMap::new();
        while self.peek() != &Tok::RBrace {
            let cpos = self.pos();
            let mut bits = Vec::new();
            self.clause_pattern(&mut bits)?;
            self.expect(Tok::Arrow)?;
            if self.peek() == &Tok::Sample {
                self.bump();
            }
            let prob = self.bern()?;
            if let Some(first) = clauses.first() {
                if first.bits.len() != bits.len() {
                    return Err(SyntaxError::new(
                        cpos.line,
                        cpos.col,
                        format!("clause has {} components, expected {}", bits.len(), first.bits.len()),
                    ));
                }
            }
            if seen.insert(bits.clone(), ()).is_some() {
                return Err(SyntaxError::new(cpos.line, cpos.col, format!("duplicate clause for {}", show_bits(&bits))));
            }
            clauses.push(Clause { bits, prob });
            if self.peek() == &Tok::Semi {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        let Some(arity) = clauses.first().map(|c| c.bits.len()) else {
            return Err(SyntaxError::new(pos.line, pos.col, "case needs at least one clause"));
        };
        if arity > 16 {
            return Err(SyntaxError::new(pos.line, pos.col, "case scrutinee has too many components"));
        }
        for idx in (0..1usize << arity).rev() {
            let bits = clause_bits(idx, arity);
            if !seen.contains_key(&bits) {
                return Err(SyntaxError::new(pos.line, pos.col, format!("missing clause for {}", show_bits(&bits))));
            }
        }
        let n = leaves(&scrut);
        if n != arity && n != 1 {
            return Err(SyntaxError::new(
                scrut.pos.line,
                scrut.pos.col,
                format!("scrutinee has {n} components but clauses have {arity}"),
            ));
        }
        Ok(*mk(ExprKind::Case(Box::new(scrut), clauses), pos))
    }
}

pub(crate) fn show_bits(bits: &[bool]) -> String {
    let s: Vec<&str> = bits.iter().map(|&b| if b { "t" } else { "f" }).collect();
    if s.len() == 1 {
        s[0].to_string()
    } else {
        format!("<{}>", s.join(", "))
    }
}
