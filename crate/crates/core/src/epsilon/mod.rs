//! ε-representations, their inversion along trajectories, relation mining
//! and cell-transition segmentation.

pub mod cells;
pub mod relations;
pub mod representation;
pub mod trace;

pub use cells::{
    detect_cell_transitions, CellComplex, CellId, CellObservation, CellTracker, Partition, DEFAULT_HYSTERESIS,
};
pub use relations::{
    find_correlation_integrals, BasisSpec, CorrelationIntegral, Monomial, DEFAULT_RELATION_TOLERANCE,
};
pub use representation::{
    estimate_epsilon, AffineBasis, EpsilonEstimate, EpsilonRepresentation, Feature, Representation,
    DEFAULT_EVAL_BUDGET,
};
pub use trace::{epsilon_trace, player_trace, EpsilonEstimator, EpsilonTrace, TickEstimate};
