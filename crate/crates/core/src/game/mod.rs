//! Interactive systems: dynamics, integration, policies, coalitions and the
//! memory-feedback reduction.

pub mod coalition;
pub mod dynamics;
pub mod engine;
pub mod integrator;
pub mod invariants;
pub mod jet;
pub mod policy;
pub mod reduction;

pub use coalition::{coalition_control, Coalition, CoalitionSpec};
pub use dynamics::{ControlInputs, Dims, Dynamics, DynamicsSpec, FnDynamics, Term};
pub use engine::{
    simulate, simulate_with, ticks_for_horizon, ControlSource, Engine, GameSetup, NominalSource, TickSample,
    Trajectory,
};
pub use integrator::{rk4_step, SystemState};
pub use invariants::{check_invariants, check_invariants_with, Invariant, InvariantFn, InvariantSpec, TickView};
pub use jet::{jets_for_states, Jet, JetHistory};
pub use policy::{FeedbackPolicy, NominalPolicy, Schedule, Segment};
pub use reduction::{memory_form, reduce_memory_feedback, KernelSpec, MemoryKernel};
