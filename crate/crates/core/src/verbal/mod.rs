//! Verbalization: window functionals over partition intervals, the fitted
//! dialogue recursion and transcripts.

pub mod functionals;
pub mod recursion;
pub mod transcript;

pub use functionals::{
    apply_builtin, compute_window_functionals, windows_for_partition, Builtin, Channel, ChannelFunctional,
    DialogueState, FunctionalSpec, Window,
};
pub use recursion::{
    fit_recursion, fit_recursion_with_context, verbalizability_score, RecursionModel,
    DEFAULT_VERBALIZABLE_THRESHOLD,
};
pub use transcript::{transcript, Transcript, Utterance};
