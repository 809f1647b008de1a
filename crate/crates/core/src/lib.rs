//! Supervisory control of discrete event systems under joint sensor and
//! actuator attacks: attack-aware estimation, verification, synthesis and
//! closed-loop simulation.

pub mod attack;
pub mod automaton;
pub mod dot;
pub mod error;
pub mod estimation;
pub mod model;
pub mod simulation;
pub mod synthesis;
pub mod verification;

pub use error::{Error, Result};
