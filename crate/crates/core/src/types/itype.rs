use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::TypeError;

/// Name of a random variable, shared by all atoms that denote it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(String);

impl Name {
    pub fn new(s: impl Into<String>) -> Self {
        Name(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Observation {
    #[default]
    Free,
    Seen(bool),
}

impl Observation {
    /// The values a variable with this status can take, `f` before `t`.
    pub fn values(self) -> &'static [bool] {
        match self {
            Observation::Free => &[false, true],
            Observation::Seen(false) => &[false],
            Observation::Seen(true) => &[true],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub name: Name,
    pub obs: Observation,
}

impl Atom {
    pub fn free(name: impl Into<String>) -> Self {
        Atom { name: Name::new(name), obs: Observation::Free }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.obs {
            Observation::Free => write!(f, "{}", self.name),
            Observation::Seen(b) => write!(f, "{}^{}", self.name, if b { "t" } else { "f" }),
        }
    }
}

/// Intersection types.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IType {
    Atom(Atom),
    Tensor(Box<IType>, Box<IType>),
    Multiset(Vec<IType>),
    Arrow(Box<IType>, Box<IType>),
}

impl IType {
    pub fn atom(name: &str) -> IType {
        IType::Atom(Atom::free(name))
    }

    pub fn observed(name: &str, b: bool) -> IType {
        IType::Atom(Atom { name: Name::from(name), obs: Observation::Seen(b) })
    }

    pub fn tensor(a: IType, b: IType) -> IType {
        IType::Tensor(Box::new(a), Box::new(b))
    }

    pub fn arrow(p: IType, a: IType) -> IType {
        IType::Arrow(Box::new(p), Box::new(a))
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            IType::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            IType::Atom(_) => true,
            IType::Tensor(a, b) => a.is_ground() && b.is_ground(),
            _ => false,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.is_ground() || matches!(self, IType::Multiset(_))
    }

    /// Atom occurrences, left to right.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit(&mut |a| out.push(a));
        out
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            IType::Atom(a) => f(a),
            IType::Tensor(a, b) | IType::Arrow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            IType::Multiset(items) => items.iter().for_each(|t| t.visit(f)),
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut Atom)) {
        match self {
            IType::Atom(a) => f(a),
            IType::Tensor(a, b) | IType::Arrow(a, b) => {
                a.visit_mut(f);
                b.visit_mut(f);
            }
            IType::Multiset(items) => items.iter_mut().for_each(|t| t.visit_mut(f)),
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.atoms().into_iter().map(|a| a.name.clone()).collect()
    }

    /// Representative up to reordering of multisets.
    pub fn canonical(&self) -> IType {
        match self {
            IType::Atom(_) => self.clone(),
            IType::Tensor(a, b) => IType::tensor(a.canonical(), b.canonical()),
            IType::Arrow(a, b) => IType::arrow(a.canonical(), b.canonical()),
            IType::Multiset(items) => {
                let mut items: Vec<IType> = items.iter().map(IType::canonical).collect();
                items.sort_by_cached_key(|t| t.to_string());
                IType::Multiset(items)
            }
        }
    }

    /// Equality treating multisets as unordered.
    pub fn same(&self, other: &IType) -> bool {
        self == other || self.canonical() == other.canonical()
    }
}

/// Equality of multisets of types, ignoring order.
pub fn same_multiset(a: &[IType], b: &[IType]) -> bool {
    IType::Multiset(a.to_vec()).same(&IType::Multiset(b.to_vec()))
}

impl fmt::Display for IType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IType::Atom(a) => write!(f, "{a}"),
            IType::Tensor(a, b) => {
                if matches!(**a, IType::Tensor(..) | IType::Arrow(..)) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                if matches!(**b, IType::Arrow(..)) {
                    write!(f, " * ({b})")
                } else {
                    write!(f, " * {b}")
                }
            }
            IType::Multiset(items) => {
                f.write_str("[")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str("]")
            }
            IType::Arrow(p, a) => {
                if matches!(**p, IType::Arrow(..)) {
                    write!(f, "({p}) -o {a}")
                } else {
                    write!(f, "{p} -o {a}")
                }
            }
        }
    }
}

impl FromStr for IType {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TypeParser { src: s.as_bytes(), at: 0 };
        let t = p.arrow()?;
        p.skip_ws();
        if p.at != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

struct TypeParser<'a> {
    src: &'a [u8],
    at: usize,
}

impl TypeParser<'_> {
    fn error(&self, what: &str) -> TypeError {
        TypeError::new(format!(
            "cannot parse type `{}`: {what} at offset {}",
            String::from_utf8_lossy(self.src),
            self.at
        ))
    }

    fn skip_ws(&mut self) {
        while self.at < self.src.len() && self.src[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.at..].starts_with(tok.as_bytes()) {
            self.at += tok.len();
            true
        } else {
            false
        }
    }

    fn arrow(&mut self) -> Result<IType, TypeError> {
        let left = self.tensor()?;
        if self.eat("-o") {
            Ok(IType::arrow(left, self.arrow()?))
        } else {
            Ok(left)
        }
    }

    fn tensor(&mut self) -> Result<IType, TypeError> {
        let left = self.primary()?;
        if self.eat("*") {
            Ok(IType::tensor(left, self.tensor()?))
        } else {
            Ok(left)
        }
    }

    fn primary(&mut self) -> Result<IType, TypeError> {
        if self.eat("(") {
            let t = self.arrow()?;
            return if self.eat(")") { Ok(t) } else { Err(self.error("expected `)`")) };
        }
        if self.eat("[") {
            let mut items = Vec::new();
            if self.eat("]") {
                return Ok(IType::Multiset(items));
            }
            loop {
                items.push(self.arrow()?);
                if self.eat("]") {
                    return Ok(IType::Multiset(items));
                }
                if !self.eat(",") {
                    return Err(self.error("expected `,` or `]`"));
                }
            }
        }
        self.skip_ws();
        let start = self.at;
        while self.at < self.src.len()
            && (self.src[self.at].is_ascii_alphanumeric() || matches!(self.src[self.at], b'_' | b'\''))
        {
            self.at += 1;
        }
        if start == self.at {
            return Err(self.error("expected an atom"));
        }
        let name = String::from_utf8_lossy(&self.src[start..self.at]).into_owned();
        let obs = if self.eat("^t") {
            Observation::Seen(true)
        } else if self.eat("^f") {
            Observation::Seen(false)
        } else {
            Observation::Free
        };
        Ok(IType::Atom(Atom { name: Name(name), obs }))
    }
}
