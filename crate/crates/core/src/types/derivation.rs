use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::itype::{IType, Name, Observation};
use super::TypeError;
use crate::syntax::{parse_core, pretty, Term, Var};

pub type GroundCtx = BTreeMap<Var, IType>;
pub type MultisetCtx = BTreeMap<Var, Vec<IType>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleName {
    Sample,
    Cond,
    Obs,
    Var,
    Let,
    Pair,
    LetPair,
    Abs,
    App,
    Bang,
    Der,
}

impl RuleName {
    pub const ALL: [RuleName; 11] = [
        RuleName::Sample,
        RuleName::Cond,
        RuleName::Obs,
        RuleName::Var,
        RuleName::Let,
        RuleName::Pair,
        RuleName::LetPair,
        RuleName::Abs,
        RuleName::App,
        RuleName::Bang,
        RuleName::Der,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RuleName::Sample => "i-sample",
            RuleName::Cond => "i-cond",
            RuleName::Obs => "i-obs",
            RuleName::Var => "i-var",
            RuleName::Let => "i-let",
            RuleName::Pair => "i-pair",
            RuleName::LetPair => "i-letp",
            RuleName::Abs => "i-abs",
            RuleName::App => "i-app",
            RuleName::Bang => "i-bang",
            RuleName::Der => "i-der",
        }
    }

    /// `sample` and `case` axioms, which introduce a random variable.
    pub fn is_probabilistic(self) -> bool {
        matches!(self, RuleName::Sample | RuleName::Cond)
    }

    pub fn is_axiom(self) -> bool {
        matches!(self, RuleName::Sample | RuleName::Cond | RuleName::Obs | RuleName::Var)
    }

    /// The rule that types terms built with this constructor.
    pub fn for_term(t: &Term) -> Option<RuleName> {
        Some(match t {
            Term::Var(_) => RuleName::Var,
            Term::Bool(_) => return None,
            Term::Pair(..) => RuleName::Pair,
            Term::Bang(_) => RuleName::Bang,
            Term::Der(_) => RuleName::Der,
            Term::Lam(..) => RuleName::Abs,
            Term::App(..) => RuleName::App,
            Term::Let(..) => RuleName::Let,
            Term::LetPair(..) => RuleName::LetPair,
            Term::Sample(_) => RuleName::Sample,
            Term::Case(..) => RuleName::Cond,
            Term::Obs(..) => RuleName::Obs,
        })
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RuleName {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleName::ALL
            .into_iter()
            .find(|r| r.tag() == s)
            .ok_or_else(|| TypeError::new(format!("unknown rule `{s}`")))
    }
}

/// `Λ; Γ ⊢ subject : ty`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub ground: GroundCtx,
    pub multiset: MultisetCtx,
    pub subject: Term,
    pub ty: IType,
}

impl Judgment {
    pub fn new(subject: Term, ty: IType) -> Self {
        Judgment { ground: GroundCtx::new(), multiset: MultisetCtx::new(), subject, ty }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = self.ty.names();
        for t in self.ground.values() {
            out.extend(t.names());
        }
        for ts in self.multiset.values() {
            for t in ts {
                out.extend(t.names());
            }
        }
        out
    }

    fn visit_types_mut(&mut self, f: &mut impl FnMut(&mut IType)) {
        self.ground.values_mut().for_each(&mut *f);
        self.multiset.values_mut().flatten().for_each(&mut *f);
        f(&mut self.ty);
    }

    fn context_string(&self) -> String {
        let mut parts: Vec<String> = self.ground.iter().map(|(x, t)| format!("{x}: {t}")).collect();
        parts.extend(
            self.multiset
                .iter()
                .map(|(x, ts)| format!("{x}: {}", IType::Multiset(ts.clone()))),
        );
        parts.join(", ")
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ctx = self.context_string();
        if ctx.is_empty() {
            write!(f, "|- {} : {}", pretty(&self.subject), self.ty)
        } else {
            write!(f, "{ctx} |- {} : {}", pretty(&self.subject), self.ty)
        }
    }
}

/// A typing derivation tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: RuleName,
    pub judgment: Judgment,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn new(rule: RuleName, judgment: Judgment, premises: Vec<Derivation>) -> Self {
        Derivation { rule, judgment, premises }
    }

    pub fn ty(&self) -> &IType {
        &self.judgment.ty
    }

    pub fn subject(&self) -> &Term {
        &self.judgment.subject
    }

    /// Nodes in preorder.
    pub fn nodes(&self) -> Vec<&Derivation> {
        let mut out = Vec::new();
        self.walk(&mut |d| out.push(d));
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Derivation)) {
        f(self);
        self.premises.iter().for_each(|p| p.walk(f));
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn at(&self, path: &[usize]) -> Option<&Derivation> {
        path.iter().try_fold(self, |d, &i| d.premises.get(i))
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Derivation> {
        path.iter().try_fold(self, |d, &i| d.premises.get_mut(i))
    }

    /// Names occurring anywhere in the derivation.
    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.walk(&mut |d| out.extend(d.judgment.names()));
        out
    }

    /// Probabilistic axioms in preorder.
    pub fn axioms(&self) -> Vec<&Derivation> {
        self.nodes().into_iter().filter(|d| d.rule.is_probabilistic()).collect()
    }

    /// Main names of the probabilistic axioms, in preorder.
    pub fn main_names(&self) -> Vec<Name> {
        self.axioms()
            .into_iter()
            .filter_map(|d| d.ty().as_atom().map(|a| a.name.clone()))
            .collect()
    }

    /// Weighted count of `let`, `der`, `app` and `letp` rules.
    pub fn measure(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |d| {
            n += match d.rule {
                RuleName::Let | RuleName::Der => 1,
                RuleName::App => 2,
                RuleName::LetPair => 3,
                _ => 0,
            }
        });
        n
    }

    pub fn visit_types_mut(&mut self, f: &mut impl FnMut(&mut IType)) {
        self.judgment.visit_types_mut(f);
        self.premises.iter_mut().for_each(|p| p.visit_types_mut(f));
    }

    /// Sets the observation status of every atom named in `status`.
    pub fn set_observations(&mut self, status: &BTreeMap<Name, Observation>) {
        self.visit_types_mut(&mut |t| {
            t.visit_mut(&mut |a| {
                if let Some(o) = status.get(&a.name) {
                    a.obs = *o;
                }
            })
        });
    }

    /// Makes unobserved every atom whose name does not type an `obs` subject.
    pub fn generalize(&self) -> Derivation {
        let mut forced = BTreeSet::new();
        self.walk(&mut |d| {
            if d.rule == RuleName::Obs {
                forced.extend(d.ty().names());
            }
        });
        let mut out = self.clone();
        out.visit_types_mut(&mut |t| {
            t.visit_mut(&mut |a| {
                if !forced.contains(&a.name) {
                    a.obs = Observation::Free;
                }
            })
        });
        out
    }

    /// Indented text, one rule per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(0, &mut out);
        out
    }

    fn write_text(&self, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("{}  {}\n", self.rule, self.judgment));
        self.premises.iter().for_each(|p| p.write_text(depth + 1, out));
    }

    pub fn to_json(&self) -> DerivationJson {
        DerivationJson {
            rule: self.rule.tag().to_string(),
            ground: self.judgment.ground.iter().map(|(x, t)| (x.to_string(), t.to_string())).collect(),
            multiset: self
                .judgment
                .multiset
                .iter()
                .map(|(x, ts)| (x.to_string(), IType::Multiset(ts.clone()).to_string()))
                .collect(),
            subject: pretty(&self.judgment.subject),
            ty: self.judgment.ty.to_string(),
            premises: self.premises.iter().map(Derivation::to_json).collect(),
        }
    }

    pub fn from_json(j: &DerivationJson) -> Result<Derivation, TypeError> {
        let subject = parse_core(&j.subject)
            .map_err(|e| TypeError::new(format!("bad subject `{}`: {e}", j.subject)))?;
        let ground = j
            .ground
            .iter()
            .map(|(x, t)| Ok((Var::new(x.clone()), t.parse::<IType>()?)))
            .collect::<Result<GroundCtx, TypeError>>()?;
        let multiset = j
            .multiset
            .iter()
            .map(|(x, t)| match t.parse::<IType>()? {
                IType::Multiset(items) => Ok((Var::new(x.clone()), items)),
                other => Err(TypeError::new(format!("multiset context entry `{x}: {other}` is not a multiset"))),
            })
            .collect::<Result<MultisetCtx, TypeError>>()?;
        Ok(Derivation {
            rule: j.rule.parse()?,
            judgment: Judgment { ground, multiset, subject, ty: j.ty.parse()? },
            premises: j.premises.iter().map(Derivation::from_json).collect::<Result<_, _>>()?,
        })
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Serialized form of a derivation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationJson {
    pub rule: String,
    #[serde(default)]
    pub ground: BTreeMap<String, String>,
    #[serde(default)]
    pub multiset: BTreeMap<String, String>,
    pub subject: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub premises: Vec<DerivationJson>,
}
