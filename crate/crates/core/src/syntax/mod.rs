//! Terms, concrete syntax and substitution.

mod desugar;
mod lexer;
mod parser;
mod prelude;
mod pretty;
mod subst;
mod surface;
mod term;

use thiserror::Error;

pub use desugar::{desugar, numeral, to_core};
pub use parser::parse_program;
pub use prelude::PRELUDE;
pub use pretty::{clause_bits, clause_index, format_prob, pretty};
pub use subst::{alpha_eq, canonical, fresh_like, rename_binders_away, substitute};
pub use surface::{Clause, Expr, ExprKind, Pattern, Pos, Program};
pub use term::{Bernoulli, Prob, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError { line, col, message: message.into() }
    }
}

/// Parses a surface program, inlining the prelude and user definitions.
pub fn parse(src: &str) -> Result<Term, SyntaxError> {
    let mut program = parse_program(src)?;
    let prelude = parse_program(PRELUDE).expect("prelude parses");
    let mut defs = prelude.defs;
    defs.append(&mut program.defs);
    program.defs = defs;
    desugar(&program.expand())
}

/// Parses a single core term, rejecting surface sugar.
pub fn parse_core(src: &str) -> Result<Term, SyntaxError> {
    let program = parse_program(src)?;
    if let Some((_, body)) = program.defs.first() {
        return Err(SyntaxError::new(body.pos.line, body.pos.col, "definitions are not core syntax"));
    }
    to_core(&program.main)
}

/// True for first-order terms built from variables, pairs, `let`, `letp`,
/// `sample`, `case` and `obs`.
pub fn is_low_level(t: &Term) -> bool {
    let mut ok = true;
    t.walk(&mut |s| {
        if matches!(s, Term::Lam(..) | Term::App(..) | Term::Bang(_) | Term::Der(_) | Term::Bool(_)) {
            ok = false;
        }
    });
    ok
}

/// Checks structural invariants that the parser guarantees: case clause counts
/// match the scrutinee, and case and obs subjects are variables.
pub fn is_well_formed(t: &Term) -> bool {
    let mut ok = true;
    t.walk(&mut |s| match s {
        Term::Case(v, clauses) => {
            ok &= v.tuple_vars().is_some() && clauses.len() == 1 << v.tuple_arity();
        }
        Term::Obs(v, _) => ok &= matches!(**v, Term::Var(_)),
        _ => {}
    });
    ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sprinkler_fragment() {
        let t = parse(
            "let d = sample bern(0.5) in \
             let r = case d of { t => bern(0.8); f => bern(0.1) } in <d, r>",
        )
        .unwrap();
        assert!(is_low_level(&t));
        assert_eq!(t.probabilistic_count(), 2);
    }

    #[test]
    fn missing_clause_is_reported() {
        let err = parse("let x = sample bern(1/2) in case <x, x> of { <t, t> => bern(1); <f, f> => bern(0); <t, f> => bern(0) }")
            .unwrap_err();
        assert!(err.message.contains("missing clause for <f, t>"), "{}", err.message);
        assert_eq!((err.line, err.col), (1, 29));
    }

    #[test]
    fn probability_out_of_range() {
        assert!(parse("sample bern(1.5)").is_err());
        assert!(parse("sample bern(3/2)").is_err());
    }

    #[test]
    fn round_trip() {
        let src = "let x = sample bern(0.3) in letp <a, b> = <x, x> in \\y. der y !(a b) <a, b>";
        let t = parse_core(src).unwrap();
        let again = parse_core(&pretty(&t)).unwrap();
        assert!(alpha_eq(&t, &again));
    }

    #[test]
    fn core_rejects_obs_on_terms() {
        assert!(parse_core("obs(sample bern(0.5) = t)").is_err());
        assert!(parse("obs(sample bern(0.5) = t)").is_ok());
    }

    #[test]
    fn prelude_expands() {
        let t = parse("pred 2").unwrap();
        assert!(t.free_vars().is_empty());
    }
}
