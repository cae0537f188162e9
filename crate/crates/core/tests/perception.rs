use ifgame_core::game::engine::{Engine, NominalSource};
use ifgame_core::perception::{
    recalibrate_stop, run_match, run_set, MatchEnd, RecalibrationMap, SetLimit, StopCriterion,
    StopFunctional, StopReason,
};
use ifgame_core::scenarios::{build_pursuit_with, build_relay, PursuitOptions, ScenarioSpec};
use ifgame_core::GameError;
use proptest::prelude::*;

fn linear_closure() -> ScenarioSpec {
    let mut o = PursuitOptions::new(1, vec![0.0], 0.0, 3);
    o.gain = 0.0;
    o.closing_speed = 0.5;
    o.target_speed = 0.0;
    build_pursuit_with(&o).unwrap()
}

fn play(spec: &ScenarioSpec, limit: SetLimit) -> ifgame_core::perception::MatchOutcome {
    let mut engine = Engine::new(spec.setup.clone(), spec.seed).unwrap();
    run_match(&mut engine, &spec.match_config(Some(limit)).unwrap(), &mut NominalSource, &mut ()).unwrap()
}

#[test]
fn analytic_crossing_within_one_tick() {
    let spec = linear_closure();
    let out = play(&spec, SetLimit::Count { sets: 1 });
    let set = &out.record.sets[0];
    assert_eq!(set.reason, StopReason::Threshold);
    // e(t) = e0 − s·t reaches 0.05 at t* = (1 − 0.05)/0.5.
    let t_star = (1.0 - 0.05) / 0.5;
    let expected = t_star / spec.setup.dt;
    assert!((set.end_tick as f64 - expected).abs() <= 1.0, "stop {} vs {expected}", set.end_tick);
    assert!(set.satisfies_first_crossing());
}

#[test]
fn limit_one_gives_one_set() {
    let out = play(&linear_closure(), SetLimit::Count { sets: 1 });
    assert_eq!(out.record.sets.len(), 1);
    assert_eq!(out.record.end, MatchEnd::SetLimit);
}

#[test]
fn immediate_stop_is_zero_length() {
    let spec = linear_closure();
    let mut engine = Engine::new(spec.setup.clone(), 0).unwrap();
    let crit = StopCriterion::new(StopFunctional::Constant { value: 1.0 }, 0.5);
    let (rec, ticks) =
        run_set(&mut engine, 0, &crit, &[0.0], &spec.estimator(), &mut NominalSource, 100, &mut ()).unwrap();
    assert_eq!(rec.reason, StopReason::Threshold);
    assert_eq!(rec.start_tick, rec.end_tick);
    assert!(ticks.samples.is_empty());
}

#[test]
fn unreachable_threshold_hits_cap() {
    let spec = linear_closure();
    let mut engine = Engine::new(spec.setup.clone(), 0).unwrap();
    let crit = StopCriterion::new(StopFunctional::Constant { value: -1.0 }, 0.0);
    let (rec, _) =
        run_set(&mut engine, 0, &crit, &[0.0], &spec.estimator(), &mut NominalSource, 250, &mut ()).unwrap();
    assert_eq!(rec.reason, StopReason::HorizonCap);
    assert_eq!(rec.end_tick, 250);
    assert_eq!(rec.f_trace.len(), 251);
}

#[test]
fn disconnect_aborts_set() {
    let spec = linear_closure();
    let mut engine = Engine::new(spec.setup.clone(), 0).unwrap();
    let mut calls = 0;
    let mut source = |e: &Engine| {
        calls += 1;
        if calls > 10 {
            Err(GameError::Disconnected { player: 0 })
        } else {
            Ok(e.nominal_controls())
        }
    };
    let config = spec.match_config(Some(SetLimit::Count { sets: 3 })).unwrap();
    let out = run_match(&mut engine, &config, &mut source, &mut ()).unwrap();
    assert_eq!(out.record.end, MatchEnd::Aborted);
    assert_eq!(out.record.sets.len(), 1);
    assert_eq!(out.record.sets[0].reason, StopReason::Aborted);
    assert_eq!(out.record.sets[0].end_tick, 10);
    assert!(out.record.sets[0].abort_detail.is_some());
}

#[test]
fn three_sets_chain_bit_exactly() {
    // F = φ − 2ω with ω the progress of the previous set: every set ends on a threshold.
    let mut spec = build_relay(1.0, 1.0, 0.0).unwrap();
    let p = spec.perception.as_mut().unwrap();
    p.criterion = StopCriterion::new(
        StopFunctional::Linear { phi_weights: vec![1.0], omega_weights: vec![-2.0], constant: 0.0 },
        1.0,
    );
    let out = play(&spec, SetLimit::Count { sets: 3 });
    let sets = &out.record.sets;
    assert_eq!(sets.len(), 3);
    assert!(out.record.chained());
    for w in sets.windows(2) {
        assert_eq!(w[0].final_phi, w[1].initial_phi);
        assert_eq!(w[0].end_tick, w[1].start_tick);
    }
    for s in sets {
        assert_eq!(s.reason, StopReason::Threshold);
        assert!(s.satisfies_first_crossing());
        assert!(s.duration_ticks() > 0);
    }
    assert_eq!(out.record.final_criterion, spec.perception.unwrap().criterion);
    // Perception-mode partition: one interval per set.
    assert_eq!(out.record.transcript.len(), 3);
    let starts: Vec<usize> = sets.iter().map(|s| s.start_tick).collect();
    assert_eq!(out.record.partition(0.0, 0.01).ticks, starts);
    assert_eq!(out.trajectory.len(), sets[2].end_tick + 1);
}

/// Direct simulation of the relay closure `φ ← φ + rate·dt` with the same
/// stopping and recalibration rules.
fn relay_oracle(rate: f64, mut threshold: f64, gain: f64, dt: f64, sets: usize) -> Vec<usize> {
    let mut phi = 0.0;
    let mut durations = Vec::new();
    for _ in 0..sets {
        let mut history = vec![phi];
        while phi < threshold {
            phi += rate * dt;
            history.push(phi);
        }
        let n = history.len() - 1;
        durations.push(n);
        if n > 0 {
            threshold += gain * (history[n - 1] - history[0]);
        }
    }
    durations
}

#[test]
fn tightening_recalibration_shortens_sets() {
    let spec = build_relay(1.0, 1.0, 0.5).unwrap();
    let out = play(&spec, SetLimit::Count { sets: 3 });
    let got: Vec<usize> = out.record.sets.iter().map(|s| s.duration_ticks()).collect();
    let oracle = relay_oracle(1.0, 1.0, 0.5, 0.01, 3);
    for (g, o) in got.iter().zip(&oracle) {
        assert!(g.abs_diff(*o) <= 1, "durations {got:?} vs oracle {oracle:?}");
    }
    assert!(got.windows(2).all(|w| w[1] < w[0]), "{got:?}");
    assert!(out.record.chained());
}

#[test]
fn threshold_shift_arithmetic() {
    let c = StopCriterion::new(StopFunctional::Constant { value: 0.0 }, 2.0)
        .with_recalibration(RecalibrationMap::threshold_shift(2, 3, 0.1));
    let next = recalibrate_stop(&c, &[0.5, 1.0, 1.5]).unwrap();
    assert!((next.threshold - 2.1).abs() < 1e-12);
}

fn affine(theta: usize, omega: usize, seed: &[f64]) -> RecalibrationMap {
    let mut it = seed.iter().cycle().copied();
    RecalibrationMap::Affine {
        params: (0..theta).map(|_| (0..theta).map(|_| it.next().unwrap()).collect()).collect(),
        omega: (0..theta).map(|_| (0..omega).map(|_| it.next().unwrap()).collect()).collect(),
        offset: (0..theta).map(|_| it.next().unwrap()).collect(),
    }
}

proptest! {
    #[test]
    fn composition_matches_sequential_application(
        seed in prop::collection::vec(-2.0f64..2.0, 7..20),
        seed2 in prop::collection::vec(-2.0f64..2.0, 7..20),
        theta in prop::collection::vec(-5.0f64..5.0, 3),
        omega in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let m1 = affine(3, 2, &seed);
        let m2 = affine(3, 2, &seed2);
        let sequential = m2.apply(&m1.apply(&theta, &omega).unwrap(), &omega).unwrap();
        let composed = m1.then(&m2, 3, 2).unwrap().apply(&theta, &omega).unwrap();
        for (a, b) in sequential.iter().zip(&composed) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn identity_recalibration_is_a_fixed_point(f0 in -10.0f64..10.0, omega in prop::collection::vec(-5.0f64..5.0, 1..4)) {
        let c = StopCriterion::new(StopFunctional::NegDistance { target: vec![0.3], indices: None }, f0);
        prop_assert_eq!(recalibrate_stop(&c, &omega).unwrap(), c);
    }
}
