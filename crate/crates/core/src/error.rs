use thiserror::Error;

/// Errors raised by the simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("integration diverged at tick {tick}")]
    Diverged { tick: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("memory kernel `{0}` is not implemented")]
    UnsupportedKernel(String),

    #[error("under-determined problem: need at least {required} samples, have {available}")]
    UnderDetermined { required: usize, available: usize },

    #[error("evaluation failed at tick {tick}: {reason}")]
    Evaluation { tick: usize, reason: String },

    #[error("control source for player {player} disconnected")]
    Disconnected { player: usize },

    #[error("{context} (set {set}): {source}")]
    InSet {
        set: usize,
        context: String,
        #[source]
        source: Box<GameError>,
    },

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(GameError::Dimension {
            context: context.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GameError::NonFinite(context.to_string()))
    }
}
