use std::time::Instant;

use ifgame_core::game::{
    check_invariants, memory_form, reduce_memory_feedback, simulate, Coalition, CoalitionSpec, Dims, DynamicsSpec,
    FeedbackPolicy, GameSetup, Invariant, InvariantFn, InvariantSpec, KernelSpec, MemoryKernel, NominalPolicy,
    Schedule, SystemState, Term,
};
use proptest::prelude::*;

/// φ̇ = a·φ with one inert player.
fn linear_decay(a: f64, dt: f64) -> GameSetup {
    let dims = Dims { state: 1, field: 0, players: 1, actuators: 1, control: 1 };
    GameSetup {
        dynamics: DynamicsSpec::zero(dims).state_coeff(0, Term::Phi(0), a),
        initial: SystemState::new(vec![1.0], vec![]),
        dt,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![NominalPolicy::Zero],
        feedback: vec![FeedbackPolicy::Identity],
        coalitions: None,
    }
}

fn final_error(dt: f64) -> f64 {
    let traj = simulate(&linear_decay(-1.0, dt), 1.0, 0).unwrap();
    (traj.samples.last().unwrap().phi[0] - (-1.0f64).exp()).abs()
}

#[test]
fn rk4_error_ratio_on_halving() {
    let started = Instant::now();
    let ratio = final_error(0.02) / final_error(0.01);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn tick_count_matches_horizon() {
    let traj = simulate(&linear_decay(-1.0, 0.01), 2.5, 0).unwrap();
    assert_eq!(traj.len(), 251);
    assert_eq!(traj.samples[250].t, 2.5);
}

#[test]
fn simulation_is_deterministic() {
    let a = simulate(&linear_decay(-0.3, 0.01), 3.0, 9).unwrap();
    let b = simulate(&linear_decay(-0.3, 0.01), 3.0, 9).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

/// φ̇ = −φ + u with a piecewise-constant nominal control.
fn driven() -> GameSetup {
    let dims = Dims { state: 1, field: 0, players: 1, actuators: 1, control: 1 };
    GameSetup {
        dynamics: DynamicsSpec::zero(dims)
            .state_coeff(0, Term::Phi(0), -1.0)
            .state_coeff(0, Term::Actuated { slot: 0, k: 0 }, 1.0),
        initial: SystemState::new(vec![0.2], vec![]),
        dt: 0.01,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![NominalPolicy::Scheduled {
            schedule: Schedule::from_pairs([(0.0, vec![1.0]), (3.0, vec![-2.0]), (6.5, vec![0.5])]),
        }],
        feedback: vec![FeedbackPolicy::Identity],
        coalitions: None,
    }
}

fn control_gap(kernel: &MemoryKernel, base: &GameSetup) -> f64 {
    let reduced = simulate(&reduce_memory_feedback(kernel, base).unwrap(), 10.0, 0).unwrap();
    let direct = simulate(&memory_form(kernel, base).unwrap(), 10.0, 0).unwrap();
    let phi_gap = reduced
        .samples
        .iter()
        .zip(&direct.samples)
        .flat_map(|(a, b)| a.phi.iter().zip(&b.phi).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let u_gap = reduced
        .samples
        .iter()
        .zip(&direct.samples)
        .flat_map(|(a, b)| a.realized[0].iter().zip(&b.realized[0]).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    phi_gap.max(u_gap)
}

#[test]
fn exp_lag_reduction_matches_memory_form() {
    for lambda in [0.2, 0.5, 2.0] {
        let gap = control_gap(&MemoryKernel::ExpLag { lambda, initial: vec![0.1] }, &driven());
        assert!(gap <= 1e-6, "λ {lambda}: {gap}");
    }
}

#[test]
fn integral_reduction_on_smooth_state() {
    // Autonomous oscillator; the integral feedback is read out but does not act.
    let dims = Dims { state: 2, field: 0, players: 1, actuators: 1, control: 2 };
    let base = GameSetup {
        dynamics: DynamicsSpec::zero(dims).state_coeff(0, Term::Phi(1), 1.0).state_coeff(1, Term::Phi(0), -1.0),
        initial: SystemState::new(vec![1.0, 0.0], vec![]),
        dt: 0.01,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![NominalPolicy::Linear { gain: vec![vec![0.0; 2]; 2], offset: vec![0.5, -0.5] }],
        feedback: vec![FeedbackPolicy::Identity],
        coalitions: None,
    };
    let gap = control_gap(&MemoryKernel::Integral, &base);
    assert!(gap <= 1e-6, "{gap}");
}

#[test]
fn kernel_specs_parse() {
    let lag = KernelSpec { kind: "exponential-lag".into(), lambda: Some(0.5), initial: None };
    assert!(matches!(MemoryKernel::from_spec(&lag, 2).unwrap(), MemoryKernel::ExpLag { .. }));
    let none = KernelSpec { kind: "none".into(), lambda: None, initial: None };
    assert_eq!(MemoryKernel::from_spec(&none, 1).unwrap(), MemoryKernel::None);
}

#[test]
fn coalition_aggregate_drives_state() {
    let dims = Dims { state: 1, field: 0, players: 2, actuators: 1, control: 1 };
    let setup = GameSetup {
        dynamics: DynamicsSpec::zero(dims).state_coeff(0, Term::Actuated { slot: 0, k: 0 }, 1.0),
        initial: SystemState::new(vec![0.0], vec![]),
        dt: 0.01,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![
            NominalPolicy::Linear { gain: vec![vec![0.0]], offset: vec![1.0] },
            NominalPolicy::Linear { gain: vec![vec![0.0]], offset: vec![3.0] },
        ],
        feedback: vec![FeedbackPolicy::Identity; 2],
        coalitions: Some(CoalitionSpec { coalitions: vec![Coalition::new(vec![0, 1], vec![0.5, 0.5])] }),
    };
    let traj = simulate(&setup, 1.0, 0).unwrap();
    assert!((traj.samples.last().unwrap().phi[0] - 2.0).abs() < 1e-12);
    assert_eq!(traj.samples[0].coalition.as_ref().unwrap()[0], vec![2.0]);
}

#[test]
fn conserved_sum_has_no_drift() {
    // φ̇₁ = u, φ̇₂ = −u, so φ₁ + φ₂ is invariant while t is not.
    let dims = Dims { state: 2, field: 0, players: 1, actuators: 1, control: 1 };
    let setup = GameSetup {
        dynamics: DynamicsSpec::zero(dims)
            .state_coeff(0, Term::Actuated { slot: 0, k: 0 }, 1.0)
            .state_coeff(1, Term::Actuated { slot: 0, k: 0 }, -1.0),
        initial: SystemState::new(vec![0.3, 0.4], vec![]),
        dt: 0.01,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![NominalPolicy::Linear { gain: vec![vec![-1.0, 0.5]], offset: vec![0.2] }],
        feedback: vec![FeedbackPolicy::Identity],
        coalitions: None,
    };
    let traj = simulate(&setup, 5.0, 0).unwrap();
    let spec = InvariantSpec {
        invariants: vec![
            Invariant {
                name: "sum".into(),
                function: InvariantFn::Affine {
                    realized: vec![],
                    pure: vec![],
                    jet: vec![1.0, 1.0, 0.0, 0.0],
                    constant: 0.0,
                },
            },
            Invariant { name: "time".into(), function: InvariantFn::Time },
        ],
    };
    let drift = check_invariants(&traj, &spec).unwrap();
    assert!(drift[0] < 1e-12, "{drift:?}");
    assert!((drift[1] - 5.0).abs() < 1e-12);
}

#[test]
fn bad_invariant_reports_tick() {
    let traj = simulate(&linear_decay(-1.0, 0.01), 0.1, 0).unwrap();
    let spec = InvariantSpec {
        invariants: vec![Invariant {
            name: "wrong".into(),
            function: InvariantFn::Affine { realized: vec![], pure: vec![], jet: vec![1.0; 5], constant: 0.0 },
        }],
    };
    let err = check_invariants(&traj, &spec).unwrap_err();
    assert!(matches!(err, ifgame_core::GameError::Evaluation { tick: 0, .. }));
}

proptest! {
    #[test]
    fn linear_decay_tracks_exponential(a in -3.0f64..0.5, steps in 1usize..200) {
        let horizon = steps as f64 * 0.01;
        let traj = simulate(&linear_decay(a, 0.01), horizon, 0).unwrap();
        let exact = (a * horizon).exp();
        prop_assert!((traj.samples.last().unwrap().phi[0] - exact).abs() <= 1e-8 * exact.max(1.0));
    }
}
