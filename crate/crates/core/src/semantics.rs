//! Factor semantics of typing derivations and the inference pipeline.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::factors::{Accounting, Factor, FactorError, Scalar, VarDomain};
use crate::flowgraph::{extract_bn, BayesianNetwork};
use crate::rewrite::{normalize, FuelExhausted};
use crate::syntax::{clause_index, Term};
use crate::types::{check, expand, infer_ground, infer_low, CheckError, Derivation, GroundCtx, IType, InferError, Name, RuleName, TypeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fuel(#[from] FuelExhausted),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("premises of the rule at node {path:?} are not compatible")]
    Incompatible { path: Vec<usize> },
}

impl From<InferError> for SemanticsError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::Type(t) => SemanticsError::Type(t),
            InferError::Fuel(f) => SemanticsError::Fuel(f),
        }
    }
}

fn domain(ty: &IType) -> Option<VarDomain> {
    ty.as_atom().map(|a| VarDomain::new(a.name.clone(), a.obs))
}

/// Names of the random variables a case axiom reads, one per scrutinee leaf.
pub fn cond_parents(d: &Derivation) -> Vec<VarDomain> {
    let Term::Case(v, _) = d.subject() else {
        return Vec::new();
    };
    v.tuple_vars()
        .unwrap_or_default()
        .into_iter()
        .filter_map(|x| d.judgment.ground.get(x).and_then(domain))
        .collect()
}

/// Factor of an axiom: the Bernoulli of a `sample`, the table of a `case`,
/// and the trivial factor otherwise.
pub fn axiom_factor<S: Scalar>(d: &Derivation) -> Result<Factor<S>, FactorError> {
    let Some(main) = domain(d.ty()) else {
        return Ok(Factor::one());
    };
    match d.subject() {
        Term::Sample(b) => Factor::from_fn(vec![main.clone()], |a| S::from_prob(&b.mass(a[&main.name]))),
        Term::Case(_, clauses) => {
            let parents = cond_parents(d);
            let mut scope = parents.clone();
            scope.push(main.clone());
            Factor::from_fn(scope, |a| {
                let bits: Vec<bool> = parents.iter().map(|p| a[&p.name]).collect();
                S::from_prob(&clauses[clause_index(&bits)].mass(a[&main.name]))
            })
        }
        _ => Ok(Factor::one()),
    }
}

/// Sum over every name outside the conclusion of the product of all axiom
/// factors.
pub fn interpret_global<S: Scalar>(d: &Derivation) -> Result<Factor<S>, FactorError> {
    let factors = d
        .axioms()
        .into_iter()
        .map(axiom_factor)
        .collect::<Result<Vec<Factor<S>>, _>>()?;
    let refs: Vec<&Factor<S>> = factors.iter().collect();
    let mut acc = Accounting::default();
    let joint = Factor::product_all(&refs, &mut acc)?;
    let keep = d.judgment.names();
    let drop = joint.names().into_iter().filter(|n| !keep.contains(n)).collect();
    joint.sum_out(&drop, &mut acc)
}

/// No name internal to one premise occurs in a sibling.
pub fn check_compatibility(premises: &[&Derivation]) -> bool {
    let all: Vec<BTreeSet<Name>> = premises.iter().map(|p| p.names()).collect();
    premises.iter().enumerate().all(|(j, p)| {
        let visible = p.judgment.names();
        all[j]
            .iter()
            .filter(|n| !visible.contains(*n))
            .all(|n| all.iter().enumerate().all(|(i, names)| i == j || !names.contains(n)))
    })
}

/// A derivation with the factor computed at every node.
#[derive(Clone, Debug)]
pub struct DecoratedDerivation<'a, S: Scalar = f64> {
    pub derivation: &'a Derivation,
    pub factor: Factor<S>,
    /// Names summed out at this node.
    pub summed: BTreeSet<Name>,
    /// Operations performed at this node alone.
    pub cost: Accounting,
    /// Unobserved names of the product formed here, before summing out.
    pub width: usize,
    pub premises: Vec<DecoratedDerivation<'a, S>>,
}

impl<S: Scalar> DecoratedDerivation<'_, S> {
    pub fn nodes(&self) -> Vec<&Self> {
        let mut out = vec![self];
        for p in &self.premises {
            out.extend(p.nodes());
        }
        out
    }

    pub fn total_cost(&self) -> Accounting {
        let mut acc = Accounting::default();
        for n in self.nodes() {
            acc += n.cost;
        }
        acc
    }

    /// Largest number of unobserved names in any factor formed.
    pub fn width(&self) -> usize {
        self.nodes().iter().map(|n| n.width).max().unwrap_or(0)
    }

    /// Indented text with the factor names and multiplication count per rule.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(0, &mut out);
        out
    }

    fn write_text(&self, depth: usize, out: &mut String) {
        let names: Vec<String> = self.factor.scope().iter().map(|v| v.name.to_string()).collect();
        let _ = writeln!(
            out,
            "{}{}  [{}] {{{}}}  {}",
            "  ".repeat(depth),
            self.derivation.rule,
            self.cost.multiplications,
            names.join(", "),
            self.derivation.judgment
        );
        for p in &self.premises {
            p.write_text(depth + 1, out);
        }
    }
}

fn free_count(scope: &[VarDomain]) -> usize {
    scope.iter().filter(|v| v.width() > 1).count()
}

/// Bottom-up decoration: axioms get their factor, every other rule the
/// product of its premises with the names no longer visible summed out.
pub fn interpret_inductive<S: Scalar>(d: &Derivation) -> Result<DecoratedDerivation<'_, S>, SemanticsError> {
    decorate(d, &mut Vec::new())
}

fn decorate<'a, S: Scalar>(d: &'a Derivation, path: &mut Vec<usize>) -> Result<DecoratedDerivation<'a, S>, SemanticsError> {
    if d.premises.is_empty() {
        let factor: Factor<S> = axiom_factor(d)?;
        return Ok(DecoratedDerivation {
            derivation: d,
            width: free_count(factor.scope()),
            factor,
            summed: BTreeSet::new(),
            cost: Accounting::default(),
            premises: Vec::new(),
        });
    }
    let refs: Vec<&Derivation> = d.premises.iter().collect();
    if !check_compatibility(&refs) {
        return Err(SemanticsError::Incompatible { path: path.clone() });
    }
    let mut premises = Vec::with_capacity(d.premises.len());
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        premises.push(decorate(p, path)?);
        path.pop();
    }
    let mut cost = Accounting::default();
    let factors: Vec<&Factor<S>> = premises.iter().map(|p| &p.factor).collect();
    let product = Factor::product_all(&factors, &mut cost)?;
    let visible = d.judgment.names();
    let summed: BTreeSet<Name> = product.names().into_iter().filter(|n| !visible.contains(n)).collect();
    let factor = product.sum_out(&summed, &mut cost)?;
    let width = free_count(product.scope());
    Ok(DecoratedDerivation { derivation: d, factor, summed, cost, width, premises })
}

/// Multiplications predicted from names alone: a rule whose premises carry
/// `k` non-empty name sets costs `(k - 1) * 2^w`, `w` the number of
/// unobserved names in their union.
pub fn static_cost(d: &Derivation) -> u64 {
    fn go(d: &Derivation, total: &mut u64) -> BTreeSet<VarDomain> {
        if d.premises.is_empty() {
            let mut out: BTreeSet<VarDomain> = BTreeSet::new();
            if d.rule.is_probabilistic() {
                out.extend(domain(d.ty()));
                if d.rule == RuleName::Cond {
                    out.extend(cond_parents(d));
                }
            }
            return out;
        }
        let sets: Vec<BTreeSet<VarDomain>> = d.premises.iter().map(|p| go(p, total)).collect();
        let union: BTreeSet<VarDomain> = sets.iter().flatten().cloned().collect();
        let k = sets.iter().filter(|s| !s.is_empty()).count() as u64;
        let w = union.iter().filter(|v| v.width() > 1).count() as u32;
        *total += k.saturating_sub(1) << w;
        let visible = d.judgment.names();
        union.into_iter().filter(|v| visible.contains(&v.name)).collect()
    }
    let mut total = 0;
    go(d, &mut total);
    total
}

/// Cost of the inductive computation and the bounds it must respect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub multiplications: u64,
    pub additions: u64,
    /// Number of probabilistic axioms.
    pub axioms: usize,
    /// Number of names occurring in axiom factors.
    pub names: usize,
    /// Largest number of unobserved names in any factor formed.
    pub width: usize,
    pub bound_inductive: u128,
    pub bound_global: u128,
}

fn bound(m: usize, e: usize) -> u128 {
    (m as u128).saturating_mul(1u128.checked_shl(e as u32).unwrap_or(u128::MAX))
}

impl CostReport {
    pub fn from_decorated<S: Scalar>(dec: &DecoratedDerivation<'_, S>) -> Self {
        let acc = dec.total_cost();
        let axioms = dec.derivation.axioms().len();
        let names: BTreeSet<Name> = dec
            .nodes()
            .iter()
            .filter(|n| n.derivation.rule.is_probabilistic())
            .flat_map(|n| n.factor.names())
            .collect();
        let width = dec.width();
        CostReport {
            multiplications: acc.multiplications,
            additions: acc.additions,
            axioms,
            names: names.len(),
            width,
            bound_inductive: bound(axioms, width),
            bound_global: bound(axioms, names.len()),
        }
    }
}

pub fn cost(d: &Derivation) -> Result<CostReport, SemanticsError> {
    Ok(CostReport::from_decorated(&interpret_inductive::<f64>(d)?))
}

/// Everything computed for a program of ground type.
#[derive(Clone, Debug)]
pub struct Query<S: Scalar = f64> {
    pub derivation: Derivation,
    /// Unnormalised joint of the conclusion's names.
    pub marginal: Factor<S>,
    pub posterior: Factor<S>,
    pub evidence: S,
    pub bn: BayesianNetwork<S>,
    pub cost: CostReport,
}

pub fn posterior_query<S: Scalar>(t: &Term, ctx: &GroundCtx, fuel: usize) -> Result<Query<S>, SemanticsError> {
    let derivation = infer_ground(t, ctx, fuel)?;
    check(&derivation)?;
    let dec = interpret_inductive::<S>(&derivation)?;
    let cost = CostReport::from_decorated(&dec);
    let marginal = dec.factor.clone();
    let (posterior, evidence) = marginal.normalize_posterior()?;
    let bn = extract_bn(&derivation)?;
    Ok(Query { derivation, marginal, posterior, evidence, bn, cost })
}

/// Derivations of every term along the leftmost-outermost reduction of `t`,
/// ending with the normal form.
pub fn derivations_along(t: &Term, fuel: usize) -> Result<(Vec<Term>, Vec<Derivation>), SemanticsError> {
    let trace = normalize(t, fuel)?;
    let mut d = infer_low(trace.result(), &GroundCtx::new())?;
    let mut out = vec![d.clone()];
    for i in (0..trace.steps.len()).rev() {
        let (path, rule) = &trace.steps[i];
        d = expand(&trace.terms[i], path, *rule, d, &GroundCtx::new())?;
        out.push(d.clone());
    }
    out.reverse();
    Ok((trace.terms, out))
}
