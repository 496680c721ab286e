//! Distribution-rule design and exact efficiency analysis for multiagent
//! set-covering games.

pub mod equilibrium;
pub mod error;
pub mod game;
pub mod instances;
pub mod profile;
pub mod rules;
pub mod scalar;
pub mod search;
pub mod state_based;
pub mod verify;

pub use error::{Error, Result};
pub use game::{Agent, Allocation, Choice, Game, Resource};
pub use rules::{DistributionRule, FrontierPoint};
pub use scalar::{Rational, Scalar};

/// A game with floating-point resource values.
pub type Game64 = Game<f64>;
/// A game with exact rational resource values.
pub type ExactGame = Game<Rational>;
