//! Expansion–modification random substitution dynamics.
//!
//! Finite-marginal Markov chains and their stationary vectors, the two-site
//! correlation recurrence in high precision, scaling-exponent tools, Monte
//! Carlo cross-validation, and numeric verifiers for the model's quantitative
//! claims.

pub mod dynamics;
pub mod correlation;
pub mod error;
pub mod marginals;
pub mod montecarlo;
pub mod probability;
pub mod scaling;
pub mod verify;

pub use dynamics::{
    apply_global, apply_local, reachability_witness, replay_witness, ModelParams, Symbol,
    SubstitutionSymbol, SubstitutionWord, Word,
};
pub use error::{Error, Result};
pub use probability::Probability;
