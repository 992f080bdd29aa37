//! Named intersection types and typing derivations.

mod check;
mod derivation;
mod infer;
mod itype;

use thiserror::Error;

pub use check::{check, CheckError};
pub use derivation::{Derivation, DerivationJson, GroundCtx, Judgment, MultisetCtx, RuleName};
pub use infer::{expand, infer_ground, infer_low, rebuild, Scope};
pub use itype::{same_multiset, Atom, IType, Name, Observation};

use crate::rewrite::FuelExhausted;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("type error: {message}")]
pub struct TypeError {
    pub message: String,
}

impl TypeError {
    pub fn new(message: impl Into<String>) -> Self {
        TypeError { message: message.into() }
    }
}

impl From<CheckError> for TypeError {
    fn from(e: CheckError) -> Self {
        TypeError::new(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fuel(#[from] FuelExhausted),
}
