//! Multistage perception games.

pub mod game;
pub mod stop;

pub use game::{
    run_match, run_set, MatchConfig, MatchEnd, MatchObserver, MatchOutcome, MatchRecord, SetLimit, SetRecord,
    SetTicks, StopReason, DEFAULT_HORIZON_CAP,
};
pub use stop::{recalibrate_stop, RecalibrationMap, StopCriterion, StopFunctional};
