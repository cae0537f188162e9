use ifgame_core::epsilon::{
    detect_cell_transitions, estimate_epsilon, find_correlation_integrals, AffineBasis, BasisSpec,
    CellComplex, EpsilonRepresentation, EpsilonTrace, Feature, Representation, DEFAULT_EVAL_BUDGET,
};
use ifgame_core::game::{simulate, Dims, DynamicsSpec, FeedbackPolicy, GameSetup, Jet, NominalPolicy, Schedule, SystemState, Term};
use ifgame_core::scenarios::pursuit_representation;
use proptest::prelude::*;

fn jet2(e: [f64; 4]) -> Jet {
    let mut j = Jet::from_state(&e, 1);
    j.values[1] = vec![0.1, -0.2, 0.3, 0.05];
    j.available = 2;
    j
}

fn grid() -> Vec<[f64; 2]> {
    let axis: Vec<f64> = (0..10).map(|i| -1.0 + 2.0 * i as f64 / 9.0).collect();
    axis.iter().flat_map(|a| axis.iter().map(move |b| [*a, *b])).collect()
}

fn round_trip_error(rep: &EpsilonRepresentation, pure: &[f64], jet: &Jet) -> f64 {
    grid()
        .iter()
        .map(|eps| {
            let u = rep.apply(pure, jet, eps).unwrap();
            let est = estimate_epsilon(rep, &u, pure, jet, DEFAULT_EVAL_BUDGET).unwrap();
            est.epsilon.iter().zip(eps).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn affine_round_trip_on_grid() {
    let jet = jet2([0.8, -0.4, 0.0, 0.5]);
    let pure = [0.3, -1.2];
    assert!(round_trip_error(&pursuit_representation(2), &pure, &jet) <= 1e-9);

    // A full-rank basis mixing derivatives, pure controls and constants.
    let basis = AffineBasis::zeros(4, 1, 2, 2)
        .entry(0, 0, Feature::One, 2.0)
        .entry(0, 1, Feature::Jet { order: 1, k: 2 }, 1.0)
        .entry(1, 0, Feature::Pure(1), 0.5)
        .entry(1, 1, Feature::One, -1.5)
        .offset_entry(0, Feature::Jet { order: 0, k: 3 }, 0.7);
    assert!(round_trip_error(&EpsilonRepresentation::affine(basis), &pure, &jet) <= 1e-9);
}

#[test]
fn rank_deficient_basis_gives_minimal_norm() {
    // Two identical columns: every ε with ε₁ + ε₂ = s fits exactly.
    let basis = AffineBasis::zeros(1, 1, 1, 2).entry(0, 0, Feature::One, 1.0).entry(1, 0, Feature::One, 1.0);
    let rep = EpsilonRepresentation::affine(basis);
    let jet = Jet::from_state(&[0.0], 1);
    let s = 0.84;
    let est = estimate_epsilon(&rep, &[s], &[0.0], &jet, DEFAULT_EVAL_BUDGET).unwrap();
    // Brute-force oracle over the exact-solution line ε = (t, s − t).
    let best = (0..=20000)
        .map(|i| -2.0 + 4.0 * i as f64 / 20000.0)
        .min_by(|a, b| (a * a + (s - a).powi(2)).total_cmp(&(b * b + (s - b).powi(2))))
        .unwrap();
    assert!((est.epsilon[0] - best).abs() < 1e-3);
    assert!((est.epsilon[1] - (s - best)).abs() < 1e-3);
    assert!(est.residual < 1e-12);
}

#[test]
fn saturating_representation_is_inverted_within_budget() {
    let basis = AffineBasis::zeros(1, 1, 1, 1).entry(0, 0, Feature::One, 1.0);
    let rep = EpsilonRepresentation::Saturating { basis, scale: 2.0 };
    let jet = Jet::from_state(&[0.0], 1);
    let u = rep.apply(&[0.0], &jet, &[0.6]).unwrap();
    let est = estimate_epsilon(&rep, &u, &[0.0], &jet, 400).unwrap();
    assert!((est.epsilon[0] - 0.6).abs() < 1e-3, "{est:?}");
}

/// Two players with additive planted feedback and ε schedules given per tick.
fn two_player_trace(eps: impl Fn(f64) -> [f64; 2]) -> Vec<EpsilonTrace> {
    let dims = Dims { state: 2, field: 0, players: 2, actuators: 2, control: 1 };
    let rep = EpsilonRepresentation::affine(AffineBasis::additive(2, 1, 1));
    let times: Vec<f64> = (0..500).map(|j| j as f64 * 0.01).collect();
    let feedback = (0..2)
        .map(|p| FeedbackPolicy::Planted {
            representation: rep.clone(),
            epsilon: Schedule::from_pairs(times.iter().map(|t| (*t, vec![eps(*t)[p]]))),
            noise_std: 0.0,
        })
        .collect();
    let setup = GameSetup {
        dynamics: DynamicsSpec::zero(dims)
            .state_coeff(0, Term::Actuated { slot: 0, k: 0 }, 1.0)
            .state_coeff(1, Term::Actuated { slot: 1, k: 0 }, 1.0),
        initial: SystemState::new(vec![0.0, 0.0], vec![]),
        dt: 0.01,
        t0: 0.0,
        jet_order: 1,
        nominal: vec![NominalPolicy::Zero; 2],
        feedback,
        coalitions: None,
    };
    let traj = simulate(&setup, 4.99, 0).unwrap();
    (0..2).map(|p| ifgame_core::epsilon::player_trace(&traj, p, &rep).unwrap()).collect()
}

#[test]
fn planted_linear_relation_is_found() {
    let traces = two_player_trace(|t| {
        let e2 = 0.3 * (1.7 * t).sin() + 0.1;
        [2.0 * e2, e2]
    });
    let found = find_correlation_integrals(&traces, None, &BasisSpec::linear(2), 1e-6).unwrap();
    assert_eq!(found.len(), 1);
    let expect = [1.0 / 5f64.sqrt(), -2.0 / 5f64.sqrt()];
    for (c, e) in found[0].coefficients.iter().zip(expect) {
        assert!((c - e).abs() <= 1e-6);
    }
    assert!(found[0].residual_rms <= 1e-8);
}

#[test]
fn independent_traces_have_no_relation() {
    let traces = two_player_trace(|t| [0.4 * (1.3 * t).sin(), 0.2 * (3.1 * t).cos() + 0.05 * t]);
    let found = find_correlation_integrals(&traces, None, &BasisSpec::linear(2), 1e-6).unwrap();
    assert!(found.is_empty(), "{found:?}");
}

#[test]
fn player_traces_follow_their_plants() {
    let traces = two_player_trace(|_| [0.25, -0.5]);
    assert_eq!(traces[0].values[0], None);
    assert_eq!(traces[0].values[1], Some(vec![0.25]));
    assert_eq!(traces[1].values[1], Some(vec![-0.5]));
    assert_eq!(traces[0].len(), 500);
}

fn trace_1d(values: &[f64]) -> EpsilonTrace {
    EpsilonTrace::from_values(0.0, 0.01, values.iter().map(|v| Some(vec![*v])).collect())
}

proptest! {
    #[test]
    fn partition_is_ordered_and_complete(values in prop::collection::vec(-0.2f64..3.2, 2..300), h in 0.0f64..0.3) {
        let complex = CellComplex::uniform(vec![0.0], vec![3.0], vec![3], h).unwrap();
        let trace = trace_1d(&values);
        let p = detect_cell_transitions(&trace, &complex).unwrap();
        prop_assert_eq!(p.ticks[0], 0);
        prop_assert!(p.ticks.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(p.cells.len(), p.ticks.len());
        prop_assert!(p.cells.windows(2).all(|w| w[0] != w[1]));
        let covered: usize = p.ranges().iter().map(|(a, b)| b - a).sum();
        prop_assert_eq!(covered, values.len());
        // Each new interval starts with a sample that lies in its cell.
        for (tick, cell) in p.ticks.iter().zip(&p.cells).skip(1) {
            prop_assert_eq!(&complex.cell_of(&[values[*tick]]).0, cell);
        }
    }

    #[test]
    fn oscillation_below_half_margin_never_switches(
        amplitude_frac in 0.0f64..0.499,
        freq in 0.5f64..20.0,
        phase in 0.0f64..6.28,
        h in 0.02f64..0.3,
    ) {
        let complex = CellComplex::uniform(vec![0.0], vec![2.0], vec![2], h).unwrap();
        let amp = amplitude_frac * h / 2.0 * complex.width(0);
        let values: Vec<f64> = (0..400).map(|j| 1.0 + amp * (freq * j as f64 * 0.01 + phase).sin()).collect();
        let p = detect_cell_transitions(&trace_1d(&values), &complex).unwrap();
        prop_assert_eq!(p.ticks.len(), 1);
    }

    #[test]
    fn affine_inversion_recovers_random_full_rank(
        entries in prop::collection::vec(-2.0f64..2.0, 4),
        eps in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let det = entries[0] * entries[3] - entries[1] * entries[2];
        prop_assume!(det.abs() > 0.1);
        let basis = AffineBasis::zeros(1, 1, 2, 2)
            .entry(0, 0, Feature::One, entries[0])
            .entry(1, 0, Feature::One, entries[1])
            .entry(0, 1, Feature::One, entries[2])
            .entry(1, 1, Feature::One, entries[3]);
        let rep = EpsilonRepresentation::affine(basis);
        let jet = Jet::from_state(&[0.0], 1);
        let u = rep.apply(&[0.1, 0.2], &jet, &eps).unwrap();
        let est = estimate_epsilon(&rep, &u, &[0.1, 0.2], &jet, DEFAULT_EVAL_BUDGET).unwrap();
        for (a, b) in est.epsilon.iter().zip(&eps) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
