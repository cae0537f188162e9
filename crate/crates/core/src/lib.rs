//! Simulation, identification and verbalization of interactive differential
//! games.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: state/intention-field dynamics, the RK4 tick engine, synthetic
//!   policies, coalitions and memory-feedback reduction.
//! - [`epsilon`]: ε-representations of feedbacks, their inversion, relation
//!   mining and cell-transition partitions.
//! - [`verbal`]: window functionals, the fitted dialogue recursion and
//!   transcripts.
//! - [`perception`]: multistage perception games with stop functionals.
//! - [`scenarios`]: ready-made scenario documents.

pub mod epsilon;
pub mod error;
pub mod game;
mod linalg;
pub mod perception;
pub mod scenarios;
pub mod verbal;

pub use error::{GameError, Result};
