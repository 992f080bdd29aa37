//! Brute-force semantics of first-order programs by enumerating every
//! outcome of every random choice.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::factors::{Factor, FactorError, Scalar, VarDomain};
use crate::syntax::{clause_index, Term, Var};
use crate::types::{IType, Name};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("cannot enumerate `{0}`: not a closed first-order term")]
    Unsupported(String),
    #[error("unbound variable `{0}`")]
    Unbound(Var),
    #[error("output shape does not match type {0}")]
    Shape(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Value {
    Bit(bool),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    fn bit(&self) -> Option<bool> {
        match self {
            Value::Bit(b) => Some(*b),
            Value::Pair(..) => None,
        }
    }

    fn leaves(&self, out: &mut Vec<bool>) {
        match self {
            Value::Bit(b) => out.push(*b),
            Value::Pair(a, b) => {
                a.leaves(out);
                b.leaves(out);
            }
        }
    }
}

type Env = BTreeMap<Var, Value>;

fn eval<S: Scalar>(t: &Term, env: &Env) -> Result<Vec<(Value, S)>, OracleError> {
    let lookup = |x: &Var| env.get(x).cloned().ok_or_else(|| OracleError::Unbound(x.clone()));
    Ok(match t {
        Term::Var(x) => vec![(lookup(x)?, S::one())],
        Term::Pair(a, b) => {
            let mut out = Vec::new();
            for (va, wa) in eval::<S>(a, env)? {
                for (vb, wb) in eval::<S>(b, env)? {
                    out.push((Value::Pair(Box::new(va.clone()), Box::new(vb)), wa.clone() * wb));
                }
            }
            out
        }
        Term::Sample(d) => [false, true]
            .into_iter()
            .map(|b| (Value::Bit(b), S::from_prob(&d.mass(b))))
            .collect(),
        Term::Case(v, clauses) => {
            let mut out = Vec::new();
            for (value, w) in eval::<S>(v, env)? {
                let mut bits = Vec::new();
                value.leaves(&mut bits);
                let d = clauses
                    .get(clause_index(&bits))
                    .ok_or_else(|| OracleError::Unsupported(t.to_string()))?;
                for b in [false, true] {
                    out.push((Value::Bit(b), w.clone() * S::from_prob(&d.mass(b))));
                }
            }
            out
        }
        Term::Obs(v, b) => {
            let Term::Var(x) = &**v else {
                return Err(OracleError::Unsupported(t.to_string()));
            };
            let seen = lookup(x)?.bit().ok_or_else(|| OracleError::Unsupported(t.to_string()))?;
            let w = if seen == *b { S::one() } else { S::zero() };
            vec![(Value::Bit(*b), w)]
        }
        Term::Let(x, u, body) => {
            let mut out = Vec::new();
            for (value, w) in eval::<S>(u, env)? {
                let mut inner = env.clone();
                inner.insert(x.clone(), value);
                out.extend(eval::<S>(body, &inner)?.into_iter().map(|(v, w2)| (v, w.clone() * w2)));
            }
            out
        }
        Term::LetPair(x, y, v, body) => {
            let mut out = Vec::new();
            for (value, w) in eval::<S>(v, env)? {
                let Value::Pair(a, b) = value else {
                    return Err(OracleError::Unsupported(t.to_string()));
                };
                let mut inner = env.clone();
                inner.insert(x.clone(), *a);
                inner.insert(y.clone(), *b);
                out.extend(eval::<S>(body, &inner)?.into_iter().map(|(v, w2)| (v, w.clone() * w2)));
            }
            out
        }
        _ => return Err(OracleError::Unsupported(t.to_string())),
    })
}

/// Every output of `t` as a tuple of booleans with its weight.
pub fn outcomes<S: Scalar>(t: &Term) -> Result<Vec<(Vec<bool>, S)>, OracleError> {
    Ok(eval::<S>(t, &Env::new())?
        .into_iter()
        .map(|(v, w)| {
            let mut bits = Vec::new();
            v.leaves(&mut bits);
            (bits, w)
        })
        .collect())
}

/// The unnormalised distribution of the outputs of `t`, over the names of
/// `ty` read left to right.
pub fn marginal<S: Scalar>(t: &Term, ty: &IType) -> Result<Factor<S>, OracleError> {
    let atoms = ty.atoms();
    let mut table: BTreeMap<Vec<(Name, bool)>, S> = BTreeMap::new();
    for (bits, w) in outcomes::<S>(t)? {
        if bits.len() != atoms.len() {
            return Err(OracleError::Shape(ty.to_string()));
        }
        let mut assignment: BTreeMap<Name, bool> = BTreeMap::new();
        let consistent = atoms.iter().zip(&bits).all(|(a, b)| *assignment.entry(a.name.clone()).or_insert(*b) == *b);
        if consistent {
            let key: Vec<(Name, bool)> = assignment.into_iter().collect();
            let slot = table.entry(key).or_insert_with(S::zero);
            *slot = slot.clone() + w;
        }
    }
    let scope: Vec<VarDomain> = atoms.iter().map(|a| VarDomain::new(a.name.clone(), a.obs)).collect();
    Ok(Factor::from_fn(scope, |a| {
        let key: Vec<(Name, bool)> = a.iter().map(|(n, b)| (n.clone(), *b)).collect();
        table.get(&key).cloned().unwrap_or_else(S::zero)
    })?)
}
