//! Built-in scenarios: pursuit with planted feedback, the dialogue toy, the
//! multi-observer figure and a constant-rate relay for set chaining.

pub mod dialogue;
pub mod figure;
pub mod pursuit;
pub mod relay;
pub mod spec;

pub use dialogue::{build_dialogue_toy, DIALOGUE_PLAN};
pub use figure::{
    build_iavr_figure, run_figure, single_user_library, two_user_script, FigureMonitor, FigureRun, FigureSpec,
    FigureState, FigureUpdate, SCRIPT_LIBRARY_VERSION,
};
pub use pursuit::{build_pursuit, build_pursuit_with, pursuit_representation, PursuitOptions};
pub use relay::build_relay;
pub use spec::{PerceptionSettings, ScenarioSpec, SCENARIO_SCHEMA_VERSION};

use crate::error::{GameError, Result};

pub const BUILTIN_NAMES: [&str; 6] = ["pursuit1d", "pursuit2d", "dialogue-toy", "iavr-figure", "iavr-solo", "relay"];

/// Built-in scenario by name.
pub fn builtin(name: &str, seed: u64) -> Result<ScenarioSpec> {
    let mut spec = match name {
        "pursuit1d" => build_pursuit(1, vec![0.3], 0.0, seed)?,
        "pursuit2d" => build_pursuit(2, vec![0.3, -0.1], 0.0, seed)?,
        "dialogue-toy" => build_dialogue_toy(seed)?,
        "iavr-figure" => build_iavr_figure(2, 0.5, vec![vec![2, 2]])?,
        "iavr-solo" => ScenarioSpec { name: "iavr-solo".into(), ..build_iavr_figure(1, 0.5, vec![vec![2, 2]])? },
        "relay" => build_relay(1.0, 1.0, 0.5)?,
        other => return Err(GameError::Invalid(format!("unknown scenario `{other}`"))),
    };
    spec.seed = seed;
    Ok(spec)
}
