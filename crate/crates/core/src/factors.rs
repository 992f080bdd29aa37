//! Factors over named Boolean random variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Debug};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::Prob;
use crate::types::{Name, Observation};

/// Numeric type of factor entries.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync {
    fn from_prob(p: &Prob) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_prob(p: &Prob) -> Self {
        *p.numer() as f64 / *p.denom() as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_prob(p: &Prob) -> Self {
        (*p.numer() as f64 / *p.denom() as f64) as f32
    }

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for BigRational {
    fn from_prob(p: &Prob) -> Self {
        BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("name {0} has different observation status in the operands")]
    DomainMismatch(Name),
    #[error("name {0} is not in the scope of the factor")]
    UnknownName(Name),
    #[error("the evidence has probability zero")]
    ZeroEvidence,
    #[error("table has {found} entries but the scope needs {expected}")]
    Shape { expected: usize, found: usize },
}

/// A name together with its value domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarDomain {
    pub name: Name,
    pub obs: Observation,
}

impl VarDomain {
    pub fn new(name: Name, obs: Observation) -> Self {
        VarDomain { name, obs }
    }

    pub fn free(name: &str) -> Self {
        VarDomain { name: Name::from(name), obs: Observation::Free }
    }

    pub fn values(&self) -> &'static [bool] {
        self.obs.values()
    }

    pub fn width(&self) -> usize {
        self.values().len()
    }
}

/// Counts of arithmetic operations performed on factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Accounting {
    pub multiplications: u64,
    pub additions: u64,
}

impl std::ops::AddAssign for Accounting {
    fn add_assign(&mut self, other: Self) {
        self.multiplications += other.multiplications;
        self.additions += other.additions;
    }
}

/// Dense table over a name-sorted scope, row-major with the last name
/// varying fastest and `f` before `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor<S: Scalar = f64> {
    scope: Vec<VarDomain>,
    table: Vec<S>,
}

pub type FactorF64 = Factor<f64>;
pub type FactorF32 = Factor<f32>;
pub type ExactFactor = Factor<BigRational>;

fn table_len(scope: &[VarDomain]) -> usize {
    scope.iter().map(VarDomain::width).product()
}

fn union_scope<'a>(scopes: impl IntoIterator<Item = &'a [VarDomain]>) -> Result<Vec<VarDomain>, FactorError> {
    let mut out: BTreeMap<Name, Observation> = BTreeMap::new();
    for scope in scopes {
        for v in scope {
            if let Some(prev) = out.insert(v.name.clone(), v.obs) {
                if prev != v.obs {
                    return Err(FactorError::DomainMismatch(v.name.clone()));
                }
            }
        }
    }
    Ok(out.into_iter().map(|(name, obs)| VarDomain { name, obs }).collect())
}

impl<S: Scalar> Factor<S> {
    /// Builds a factor from a table laid out over `scope` sorted by name.
    pub fn new(mut scope: Vec<VarDomain>, table: Vec<S>) -> Result<Self, FactorError> {
        let before: Vec<Name> = scope.iter().map(|v| v.name.clone()).collect();
        scope.sort();
        scope.dedup_by(|a, b| a.name == b.name);
        if scope.len() != before.len() || scope.iter().zip(&before).any(|(v, n)| &v.name != n) {
            return Err(FactorError::Shape { expected: table_len(&scope), found: table.len() });
        }
        if table.len() != table_len(&scope) {
            return Err(FactorError::Shape { expected: table_len(&scope), found: table.len() });
        }
        Ok(Factor { scope, table })
    }

    /// Tabulates `f` over every assignment of `scope`.
    pub fn from_fn(scope: Vec<VarDomain>, f: impl Fn(&BTreeMap<Name, bool>) -> S) -> Result<Self, FactorError> {
        let scope = union_scope([scope.as_slice()])?;
        let table = (0..table_len(&scope))
            .map(|row| f(&Self::decode(&scope, row)))
            .collect();
        Ok(Factor { scope, table })
    }

    /// All-ones factor over `scope`.
    pub fn unit(scope: Vec<VarDomain>) -> Result<Self, FactorError> {
        Self::from_fn(scope, |_| S::one())
    }

    /// The factor with empty scope and value 1.
    pub fn one() -> Self {
        Factor { scope: Vec::new(), table: vec![S::one()] }
    }

    pub fn scalar(value: S) -> Self {
        Factor { scope: Vec::new(), table: vec![value] }
    }

    pub fn scope(&self) -> &[VarDomain] {
        &self.scope
    }

    pub fn table(&self) -> &[S] {
        &self.table
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.scope.iter().map(|v| v.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn decode(scope: &[VarDomain], mut row: usize) -> BTreeMap<Name, bool> {
        let mut out = BTreeMap::new();
        for v in scope.iter().rev() {
            let w = v.width();
            out.insert(v.name.clone(), v.values()[row % w]);
            row /= w;
        }
        out
    }

    /// Assignment of row `row`.
    pub fn assignment(&self, row: usize) -> BTreeMap<Name, bool> {
        Self::decode(&self.scope, row)
    }

    fn index_of(scope: &[VarDomain], value: impl Fn(&Name) -> Option<bool>) -> Option<usize> {
        let mut idx = 0;
        for v in scope {
            let b = value(&v.name)?;
            let pos = v.values().iter().position(|&x| x == b)?;
            idx = idx * v.width() + pos;
        }
        Some(idx)
    }

    /// Entry at an assignment of (at least) the scope's names; zero when an
    /// observed name is assigned a value outside its domain.
    pub fn get(&self, assignment: &BTreeMap<Name, bool>) -> Option<S> {
        let missing = self.scope.iter().any(|v| !assignment.contains_key(&v.name));
        if missing {
            return None;
        }
        Some(match Self::index_of(&self.scope, |n| assignment.get(n).copied()) {
            Some(i) => self.table[i].clone(),
            None => S::zero(),
        })
    }

    /// Entry at the given name/value pairs.
    pub fn value(&self, pairs: &[(&str, bool)]) -> Option<S> {
        let map = pairs.iter().map(|(n, b)| (Name::from(*n), *b)).collect();
        self.get(&map)
    }

    /// Product of all operands in one pass. Costs `(k - 1) * |result|`
    /// multiplications where `k` counts the operands with non-empty scope.
    pub fn product_all(factors: &[&Factor<S>], acc: &mut Accounting) -> Result<Factor<S>, FactorError> {
        let scope = union_scope(factors.iter().map(|f| f.scope.as_slice()))?;
        let len = table_len(&scope);
        let strides: Vec<Vec<(usize, usize)>> = factors
            .iter()
            .map(|f| {
                let mut out = Vec::new();
                let mut stride = 1;
                for v in f.scope.iter().rev() {
                    let pos = scope.iter().position(|u| u.name == v.name).expect("union contains operand names");
                    out.push((pos, stride));
                    stride *= v.width();
                }
                out
            })
            .collect();
        let widths: Vec<usize> = scope.iter().map(VarDomain::width).collect();
        let mut digits = vec![0usize; scope.len()];
        let mut table = Vec::with_capacity(len);
        for row in 0..len {
            let mut r = row;
            for i in (0..scope.len()).rev() {
                digits[i] = r % widths[i];
                r /= widths[i];
            }
            let mut value = S::one();
            for (f, st) in factors.iter().zip(&strides) {
                let idx: usize = st.iter().map(|(pos, stride)| digits[*pos] * stride).sum();
                value = value * f.table[idx].clone();
            }
            table.push(value);
        }
        let nonempty = factors.iter().filter(|f| !f.scope.is_empty()).count() as u64;
        acc.multiplications += nonempty.saturating_sub(1) * len as u64;
        Ok(Factor { scope, table })
    }

    pub fn product(&self, other: &Factor<S>, acc: &mut Accounting) -> Result<Factor<S>, FactorError> {
        Self::product_all(&[self, other], acc)
    }

    /// Sums out `names`, costing `|in| - |out|` additions.
    pub fn sum_out(&self, names: &BTreeSet<Name>, acc: &mut Accounting) -> Result<Factor<S>, FactorError> {
        if let Some(n) = names.iter().find(|n| !self.scope.iter().any(|v| &v.name == *n)) {
            return Err(FactorError::UnknownName((*n).clone()));
        }
        if names.is_empty() {
            return Ok(self.clone());
        }
        let scope: Vec<VarDomain> = self.scope.iter().filter(|v| !names.contains(&v.name)).cloned().collect();
        let mut table = vec![S::zero(); table_len(&scope)];
        for (row, x) in self.table.iter().enumerate() {
            let a = self.assignment(row);
            let idx = Self::index_of(&scope, |n| a.get(n).copied()).expect("restriction of a valid row");
            table[idx] = table[idx].clone() + x.clone();
        }
        acc.additions += (self.table.len() - table.len()) as u64;
        Ok(Factor { scope, table })
    }

    pub fn total(&self) -> S {
        self.table.iter().cloned().fold(S::zero(), |a, b| a + b)
    }

    /// Scales the factor to total mass one, returning the mass.
    pub fn normalize_posterior(&self) -> Result<(Factor<S>, S), FactorError> {
        let mass = self.total();
        if mass.is_zero() {
            return Err(FactorError::ZeroEvidence);
        }
        let table = self.table.iter().map(|x| x.clone() / mass.clone()).collect();
        Ok((Factor { scope: self.scope.clone(), table }, mass))
    }

    /// Product with the unit factor over `names`.
    pub fn completion(&self, names: &[VarDomain]) -> Result<Factor<S>, FactorError> {
        let unit = Self::unit(names.to_vec())?;
        Self::product_all(&[self, &unit], &mut Accounting::default())
    }

    /// Largest entrywise difference, or `None` when the scopes differ.
    pub fn max_abs_diff(&self, other: &Factor<S>) -> Option<f64> {
        (self.scope == other.scope).then(|| {
            self.table
                .iter()
                .zip(&other.table)
                .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Factor<T> {
        Factor { scope: self.scope.clone(), table: self.table.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> Factor<f64> {
        self.map(Scalar::to_f64)
    }

    pub fn to_json(&self) -> FactorJson {
        FactorJson {
            scope: self
                .scope
                .iter()
                .map(|v| ScopeEntry {
                    name: v.name.to_string(),
                    observed: match v.obs {
                        Observation::Free => None,
                        Observation::Seen(b) => Some(b),
                    },
                })
                .collect(),
            table: self.table.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn from_json(j: &FactorJson) -> Result<Self, FactorError> {
        let scope = j
            .scope
            .iter()
            .map(|e| VarDomain {
                name: Name::new(e.name.clone()),
                obs: e.observed.map_or(Observation::Free, Observation::Seen),
            })
            .collect();
        Self::new(scope, j.table.iter().map(|x| S::from_f64(*x)).collect())
    }

    /// Aligned text table, one row per assignment.
    pub fn to_ascii(&self) -> String {
        let headers: Vec<String> = self
            .scope
            .iter()
            .map(|v| match v.obs {
                Observation::Free => v.name.to_string(),
                Observation::Seen(b) => format!("{}^{}", v.name, if b { "t" } else { "f" }),
            })
            .collect();
        let rows: Vec<(Vec<&str>, String)> = (0..self.table.len())
            .map(|row| {
                let a = self.assignment(row);
                let cells = self.scope.iter().map(|v| if a[&v.name] { "t" } else { "f" }).collect();
                (cells, format!("{:.6}", self.table[row].to_f64()))
            })
            .collect();
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(1)).collect();
        let vw = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let line = |cells: Vec<String>, value: &str| -> String {
            let mut s = String::from("|");
            for c in cells {
                s.push(' ');
                s.push_str(&c);
                s.push_str(" |");
            }
            format!("{s} {value:>vw$} |\n")
        };
        out.push_str(&line(
            headers.iter().zip(&widths).map(|(h, w)| format!("{h:<w$}")).collect(),
            "value",
        ));
        for (cells, value) in rows {
            out.push_str(&line(cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect(), &value));
        }
        out
    }
}

impl<S: Scalar> fmt::Display for Factor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScopeEntry {
    pub name: String,
    pub observed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub scope: Vec<ScopeEntry>,
    pub table: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(name: &str, p: f64) -> FactorF64 {
        Factor::from_fn(vec![VarDomain::free(name)], |a| if a[&Name::from(name)] { p } else { 1.0 - p }).unwrap()
    }

    #[test]
    fn product_layout_and_cost() {
        let x = bern("X", 0.3);
        let y = Factor::from_fn(vec![VarDomain::free("X"), VarDomain::free("Y")], |a| {
            let p = if a[&Name::from("X")] { 0.9 } else { 0.2 };
            if a[&Name::from("Y")] { p } else { 1.0 - p }
        })
        .unwrap();
        let mut acc = Accounting::default();
        let j = x.product(&y, &mut acc).unwrap();
        assert_eq!(acc.multiplications, 4);
        assert!((j.value(&[("X", true), ("Y", true)]).unwrap() - 0.27).abs() < 1e-12);
        assert_eq!(j.table().len(), 4);
        let z = j.sum_out(&[Name::from("X")].into(), &mut acc).unwrap();
        assert_eq!(acc.additions, 2);
        assert!((z.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_products_are_free() {
        let mut acc = Accounting::default();
        let x = bern("X", 0.3);
        let p = x.product(&Factor::one(), &mut acc).unwrap();
        assert_eq!(p, x);
        assert_eq!(acc.multiplications, 0);
    }

    #[test]
    fn observed_names_have_width_one() {
        let scope = vec![VarDomain::new(Name::from("W"), Observation::Seen(true))];
        let f: FactorF64 = Factor::from_fn(scope, |_| 0.5).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.value(&[("W", false)]), Some(0.0));
    }

    #[test]
    fn mismatched_domains() {
        let a: FactorF64 = Factor::unit(vec![VarDomain::free("X")]).unwrap();
        let b: FactorF64 = Factor::unit(vec![VarDomain::new(Name::from("X"), Observation::Seen(true))]).unwrap();
        assert_eq!(a.product(&b, &mut Accounting::default()), Err(FactorError::DomainMismatch(Name::from("X"))));
    }

    #[test]
    fn zero_evidence() {
        let f: FactorF64 = Factor::from_fn(vec![VarDomain::free("X")], |_| 0.0).unwrap();
        assert_eq!(f.normalize_posterior(), Err(FactorError::ZeroEvidence));
    }

    #[test]
    fn exact_arithmetic() {
        let p = ExactFactor::from_fn(vec![VarDomain::free("X")], |a| {
            BigRational::from_prob(&if a[&Name::from("X")] { Prob::new(1, 3) } else { Prob::new(2, 3) })
        })
        .unwrap();
        assert_eq!(p.total(), BigRational::from_integer(1.into()));
    }
}
