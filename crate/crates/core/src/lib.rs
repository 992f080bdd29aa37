//! Bayesian networks as typed probabilistic programs: a small calculus with
//! `sample`, conditional `case` and `obs`, an intersection type system whose
//! derivations carry factor semantics, and extraction of the network.

pub mod cli;
pub mod factors;
pub mod flowgraph;
pub mod generate;
pub mod oracle;
pub mod rewrite;
pub mod semantics;
pub mod syntax;
pub mod types;

pub use factors::{ExactFactor, Factor, FactorF32, FactorF64, Scalar};
pub use semantics::{posterior_query, Query};

pub type QueryF64 = Query<f64>;
pub type ExactQuery = Query<num_rational::BigRational>;
