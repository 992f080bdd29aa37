use num_traits::Signed;

use super::term::{Bernoulli, Prob, Term};

const EXPR: u8 = 0;
const APP: u8 = 1;
const UNARY: u8 = 2;
const ATOM: u8 = 3;

/// Renders a term in the concrete syntax accepted by the parser.
pub fn pretty(t: &Term) -> String {
    let mut out = String::new();
    write_term(t, EXPR, &mut out);
    out
}

/// Exact decimal when the denominator allows it, otherwise `n/d`.
pub fn format_prob(p: &Prob) -> String {
    let (num, den) = (*p.numer(), *p.denom());
    let mut d = den;
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{num}/{den}");
    }
    let digits = twos.max(fives);
    if digits == 0 {
        return num.to_string();
    }
    let scale = 10i128.pow(digits);
    let scaled = num as i128 * (scale / den as i128);
    let sign = if p.is_negative() { "-" } else { "" };
    let scaled = scaled.abs();
    let int = scaled / scale;
    let frac = format!("{:0width$}", scaled % scale, width = digits as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn bern(d: &Bernoulli) -> String {
    format!("bern({})", format_prob(&d.p()))
}

fn level(t: &Term) -> u8 {
    match t {
        Term::Lam(..) | Term::Let(..) | Term::LetPair(..) => EXPR,
        Term::App(..) => APP,
        Term::Bang(_) | Term::Der(_) => UNARY,
        _ => ATOM,
    }
}

fn write_term(t: &Term, min: u8, out: &mut String) {
    if level(t) < min {
        out.push('(');
        write_term(t, EXPR, out);
        out.push(')');
        return;
    }
    match t {
        Term::Var(x) => out.push_str(x.as_str()),
        Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Term::Pair(a, b) => {
            out.push('<');
            write_term(a, EXPR, out);
            let mut rest = b.as_ref();
            while let Term::Pair(x, y) = rest {
                out.push_str(", ");
                write_term(x, EXPR, out);
                rest = y;
            }
            out.push_str(", ");
            write_term(rest, EXPR, out);
            out.push('>');
        }
        Term::Bang(t) => {
            out.push('!');
            write_term(t, UNARY, out);
        }
        Term::Der(t) => {
            out.push_str("der ");
            write_term(t, UNARY, out);
        }
        Term::Lam(x, body) => {
            out.push('\\');
            out.push_str(x.as_str());
            out.push_str(". ");
            write_term(body, EXPR, out);
        }
        Term::App(f, v) => {
            write_term(f, APP, out);
            out.push(' ');
            write_term(v, UNARY, out);
        }
        Term::Let(x, u, body) => {
            out.push_str("let ");
            out.push_str(x.as_str());
            out.push_str(" = ");
            write_term(u, EXPR, out);
            out.push_str(" in ");
            write_term(body, EXPR, out);
        }
        Term::LetPair(x, y, v, body) => {
            out.push_str(&format!("letp <{x}, {y}> = "));
            write_term(v, EXPR, out);
            out.push_str(" in ");
            write_term(body, EXPR, out);
        }
        Term::Sample(d) => {
            out.push_str("sample ");
            out.push_str(&bern(d));
        }
        Term::Case(v, clauses) => {
            out.push_str("case ");
            write_term(v, EXPR, out);
            out.push_str(" of { ");
            let arity = v.tuple_arity();
            let clauses: Vec<String> = (0..clauses.len())
                .rev()
                .map(|idx| format!("{} => sample {}", clause_pattern(idx, arity), bern(&clauses[idx])))
                .collect();
            out.push_str(&clauses.join("; "));
            out.push_str(" }");
        }
        Term::Obs(v, b) => {
            out.push_str("obs(");
            write_term(v, EXPR, out);
            out.push_str(if *b { " = t)" } else { " = f)" });
        }
    }
}

/// Boolean tuple for clause `idx` over `arity` leaves, first leaf most significant.
pub fn clause_bits(idx: usize, arity: usize) -> Vec<bool> {
    (0..arity).map(|i| (idx >> (arity - 1 - i)) & 1 == 1).collect()
}

/// Inverse of [`clause_bits`].
pub fn clause_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn clause_pattern(idx: usize, arity: usize) -> String {
    let bits: Vec<&str> = clause_bits(idx, arity)
        .into_iter()
        .map(|b| if b { "t" } else { "f" })
        .collect();
    if arity == 1 {
        bits[0].to_string()
    } else {
        format!("<{}>", bits.join(", "))
    }
}
