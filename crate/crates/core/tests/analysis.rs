use deepsense::analysis::{
    build_tables, calibration_rows, error_statistics, learning_curve, summarize_conditions, AnalysisError, TableKind,
};
use deepsense::cohort::simulate_cohort;
use deepsense::config::SessionConfig;
use deepsense::log::{LogHeader, SessionLog, SessionStatus, TrialRecord, SCHEMA_VERSION};
use deepsense::mapping::AngleDeg;
use deepsense::protocol::{canonical_angles, Condition, Group, PhaseKind};

/// Log with hand-placed testing errors: `err(condition, angle index)`.
fn scripted(id: &str, err: impl Fn(Condition, usize) -> f64) -> SessionLog {
    let mut log = SessionLog::new(LogHeader {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        config_hash: String::new(),
        participant_id: id.into(),
        group: Group::HapticFirst,
        status: SessionStatus::Complete,
    })
    .unwrap();
    let mut t = 0.0;
    for (b, c) in Group::HapticFirst.test_order().into_iter().enumerate() {
        for (i, target) in canonical_angles().into_iter().enumerate() {
            t += 5.0;
            let e = err(c, i);
            log.append_trial(TrialRecord {
                phase: PhaseKind::Testing,
                condition: c,
                block_index: b as u32,
                trial_index: i as u32,
                target,
                final_angle: AngleDeg::saturating(target.get() + e),
                signed_error: e,
                duration: 5.0,
                key_presses: 3,
                steady_force: if c.has_haptic() { 10.0 - target.get() / 20.0 } else { 0.0 },
                end_time: t,
            })
            .unwrap();
        }
    }
    log
}

#[test]
fn summaries_average_participants_not_trials() {
    // participant a: all errors +2 in H nV; participant b: alternating ±4
    let a = scripted("a", |c, _| if c == Condition::H_NV { 2.0 } else { 1.0 });
    let b = scripted("b", |c, i| if c == Condition::H_NV { if i % 2 == 0 { 4.0 } else { -4.0 } } else { 1.0 });
    let s = summarize_conditions(&[a, b]).unwrap();
    let h_nv = s.iter().find(|x| x.condition == Condition::H_NV).unwrap();
    assert_eq!(h_nv.n, 2);
    assert!((h_nv.mean_abs - 3.0).abs() < 1e-12);
    assert!((h_nv.mean_signed - 1.0).abs() < 1e-12);
    assert!((h_nv.se_abs - 1.0).abs() < 1e-12);
    let order: Vec<_> = s.iter().map(|x| x.condition).collect();
    assert_eq!(order, Condition::SUMMARY_ORDER.to_vec());
}

#[test]
fn missing_condition_names_participant() {
    let mut log = scripted("lonely", |_, _| 1.0);
    // keep only the first testing condition
    let trimmed = {
        let mut l = SessionLog::new(log.header.clone()).unwrap();
        for t in log.trials().iter().take(10) {
            l.append_trial(t.clone()).unwrap();
        }
        l
    };
    log = trimmed;
    match summarize_conditions(&[log]).unwrap_err() {
        AnalysisError::MissingCondition { participant, .. } => assert_eq!(participant, "lonely"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn tables_fail_independently() {
    // scripted logs have no calibration and no practice, but the summary works
    let logs: Vec<_> = (0..4)
        .map(|k| scripted(&format!("p{k}"), move |c, i| (k + i) as f64 * 0.1 + if c.has_haptic() { 0.5 } else { 2.0 }))
        .collect();
    let out = build_tables(&logs, &TableKind::ALL);
    for (kind, result) in &out {
        match kind {
            TableKind::Calibration => assert!(matches!(result, Err(AnalysisError::MissingCalibration { .. }))),
            TableKind::Learning => assert!(matches!(result, Err(AnalysisError::MissingBlock { .. }))),
            _ => assert!(result.is_ok(), "{kind:?}: {result:?}"),
        }
    }
    let summary = &out.iter().find(|(k, _)| *k == TableKind::Summary).unwrap().1.as_ref().unwrap();
    assert_eq!(summary[0].file_name(), "summary.csv");
    assert_eq!(summary[1].file_name(), "stats.csv");
    assert_eq!(summary[0].rows.len(), 4);
    assert_eq!(summary[1].rows.len(), 7);
    let csv = summary[0].to_csv();
    assert!(csv.starts_with("condition,n,mean_abs_error_deg"));
    assert!(build_tables(&[], &[TableKind::Angle])[0].1.is_err());
}

#[test]
fn full_pipeline_on_a_small_cohort() {
    let logs = simulate_cohort(&SessionConfig::default(), 6, 2).unwrap();
    let stats = error_statistics(&logs).unwrap();
    assert_eq!(stats.two_way.n, 6);
    assert_eq!(stats.haptic_nv.effect.df_error, 5.0);
    assert!(stats.posthoc_nv.p_adjusted >= stats.posthoc_nv.p_raw);
    let curve = learning_curve(&logs).unwrap();
    assert_eq!(curve.iter().map(|p| p.block).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert!(curve.iter().all(|p| p.mean_speed > 0.0 && p.mean_abs.is_finite()));
    let calib = calibration_rows(&logs).unwrap();
    assert!(calib.iter().all(|r| r.repetitions >= 3 && r.detection_force < r.comfort_force));
    for (kind, result) in build_tables(&logs, &TableKind::ALL) {
        let tables = result.unwrap_or_else(|e| panic!("{kind:?}: {e}"));
        for t in tables {
            assert!(t.rows.iter().all(|r| r.len() == t.header.len()), "{}", t.name);
        }
    }
}
