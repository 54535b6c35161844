//! Simulation and limit-law analytics for increasing positive self-similar
//! Markov processes driven by subordinators.

pub mod error;
pub mod exp_functional;
pub mod fragmentation;
pub mod lamperti;
pub mod limit_laws;
pub mod mc_stats;
pub mod numeric;
pub mod path_engine;
pub mod subordinator_models;

pub use error::{Error, Result};
pub use subordinator_models::{JumpLaw, SubordinatorKind, SubordinatorSpec};
