use sleigh_core::analysis::{self, VerificationReport, Witness};
use sleigh_core::controller::ControllerForm;
use sleigh_core::{
    batch_simulate, reference_scenarios, simulate, ControllerParams, Error, IntegratorConfig,
    ModelParams, QState, StopReason,
};

fn short(t_final: f64) -> IntegratorConfig {
    IntegratorConfig {
        t_final,
        ..IntegratorConfig::default()
    }
}

#[test]
fn recorded_rows_are_evenly_spaced_and_end_on_t_final() {
    let s = &reference_scenarios()[0];
    let traj = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &short(1.0)).unwrap();
    assert_eq!(traj.samples.len(), 51);
    for (k, row) in traj.samples.iter().enumerate() {
        assert!((row.t - 0.02 * k as f64).abs() < 1e-12, "row {k} at t={}", row.t);
    }
    assert_eq!(traj.last().t, 1.0);
    assert_eq!(traj.stop, StopReason::Completed);
}

#[test]
fn rate_agreement_and_constraint_hold_on_reference_runs() {
    for s in reference_scenarios() {
        let traj = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &short(20.0)).unwrap();
        let rate = analysis::check_rate_agreement(&traj);
        assert!(rate.passed, "{}: {rate:?}", s.name);
        let c = analysis::check_constraint(&traj);
        assert!(c.passed, "{}: {c:?}", s.name);
    }
}

#[test]
fn momentum_form_tracks_velocity_form() {
    let s = &reference_scenarios()[1];
    let model = ModelParams::reference();
    let a = simulate(&s.initial, &model, &ControllerParams::reference(), &short(10.0)).unwrap();
    let b = simulate(
        &s.initial,
        &model,
        &ControllerParams::reference().with_form(ControllerForm::Momentum),
        &short(10.0),
    )
    .unwrap();
    assert!((a.last().state.q - b.last().state.q).norm() < 1e-8);
}

#[test]
fn mirrored_scenarios_stay_mirrored() {
    let sc = reference_scenarios();
    let model = ModelParams::reference().with_damping(sleigh_core::DampingModel::Zero);
    let a = simulate(&sc[0].initial, &model, &ControllerParams::reference(), &short(5.0)).unwrap();
    let b = simulate(&sc[1].initial, &model, &ControllerParams::reference(), &short(5.0)).unwrap();
    let (qa, qb) = (a.last().state.q, b.last().state.q);
    assert!((qa[0] - qb[0]).abs() < 1e-8);
    assert!((qa[1] + qb[1]).abs() < 1e-8);
    assert!((qa[2] + qb[2]).abs() < 1e-8);
}

#[test]
fn batch_preserves_order_and_isolates_failures() {
    let mut initials: Vec<QState> = reference_scenarios().into_iter().map(|s| s.initial).collect();
    initials.insert(2, QState::from_array([1.0, 1.0, 0.0, 0.0, 0.0]));
    let cfg = short(2.0);
    let results = batch_simulate(&initials, &ModelParams::reference(), &ControllerParams::reference(), &cfg);
    assert_eq!(results.len(), 5);
    assert!(matches!(results[2], Err(Error::InitialSingularity { .. })));
    for (i, r) in results.iter().enumerate().filter(|(i, _)| *i != 2) {
        let traj = r.as_ref().unwrap();
        assert_eq!(traj.first().state, initials[i]);
        let alone = simulate(&initials[i], &ModelParams::reference(), &ControllerParams::reference(), &cfg).unwrap();
        assert_eq!(traj.last().state, alone.last().state);
    }
}

#[test]
fn empty_batch_is_empty() {
    let out = batch_simulate(&[], &ModelParams::reference(), &ControllerParams::reference(), &short(1.0));
    assert!(out.is_empty());
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let s = &reference_scenarios()[2];
    let run = || simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &short(3.0)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.accepted_steps, b.accepted_steps);
}

#[test]
fn stop_tolerance_ends_early() {
    let s = &reference_scenarios()[0];
    let cfg = IntegratorConfig {
        stop_tol: Some(0.5),
        ..short(100.0)
    };
    let traj = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &cfg).unwrap();
    assert_eq!(traj.stop, StopReason::Converged);
    let last = traj.last();
    assert!(last.t < 100.0);
    assert!(last.state.q.norm() + last.state.p.norm() < 0.5);
}

#[test]
fn invalid_inputs_are_rejected_before_integration() {
    let s = &reference_scenarios()[0];
    let bad_cfg = IntegratorConfig {
        dt_max: -1.0,
        ..IntegratorConfig::default()
    };
    let err = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &bad_cfg).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field == "dt_max"));

    let nan = QState::from_array([f64::NAN, 0.0, 1.0, 0.0, 0.0]);
    assert!(matches!(
        simulate(&nan, &ModelParams::reference(), &ControllerParams::reference(), &short(1.0)),
        Err(Error::NonFiniteInput { .. })
    ));
}

#[test]
fn open_loop_run_keeps_shaped_quantities_defined() {
    let s = &reference_scenarios()[0];
    let ctrl = ControllerParams::reference().with_form(ControllerForm::Disabled);
    let traj = simulate(&s.initial, &ModelParams::reference(), &ctrl, &short(1.0)).unwrap();
    assert!(traj.samples.iter().all(|r| r.u.norm() == 0.0));
    assert_eq!(traj.first().state, traj.last().state);
}

#[test]
fn report_serialises_to_json() {
    let report = VerificationReport::fail("dissipation", -1e-3, 10, Witness::new("row 4", vec![0.1, 0.2]));
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["name"], "dissipation");
    assert_eq!(json["passed"], false);
    assert_eq!(json["witness"]["point"][1], 0.2);

    let s = &reference_scenarios()[0];
    let traj = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &short(1.0)).unwrap();
    let summary = serde_json::to_value(analysis::convergence_metrics(&traj)).unwrap();
    assert!(summary["shaped_energy_final"].as_f64().unwrap() < summary["shaped_energy_initial"].as_f64().unwrap());
    assert_eq!(summary["shaped_energy_monotone"], true);
}

#[test]
fn convergence_check_flags_short_horizon() {
    let s = &reference_scenarios()[0];
    let traj = simulate(&s.initial, &ModelParams::reference(), &ControllerParams::reference(), &short(2.0)).unwrap();
    let r = analysis::check_convergence(&traj, 0.05, 0.01);
    assert!(!r.passed);
    assert!(r.worst_margin < 0.0);
    assert!(analysis::check_convergence(&traj, 10.0, 10.0).passed);
}

#[test]
fn tolerance_consistency_on_short_run() {
    let s = &reference_scenarios()[3];
    let r = analysis::check_tolerance_consistency(
        &s.initial,
        &ModelParams::reference(),
        &ControllerParams::reference(),
        &short(10.0),
        10.0,
        1e-3,
    )
    .unwrap();
    assert!(r.passed, "{r:?}");
    let bad = QState::from_array([1.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(analysis::check_tolerance_consistency(
        &bad,
        &ModelParams::reference(),
        &ControllerParams::reference(),
        &short(1.0),
        10.0,
        1e-3
    )
    .is_err());
}

#[test]
fn round_trip_check_is_seed_stable() {
    let a = analysis::check_round_trips(500, 3);
    assert!(a.passed, "{a:?}");
    assert_eq!(a, analysis::check_round_trips(500, 3));
}
