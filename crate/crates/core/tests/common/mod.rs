#![allow(dead_code)]

pub mod stats;

use deepsense::log::{LogHeader, SampleRecord, SessionLog, SessionStatus, TrialRecord, SCHEMA_VERSION};
use deepsense::mapping::{AngleDeg, CalibrationResult};
use deepsense::protocol::{Condition, Group, PhaseKind};
use proptest::prelude::*;

pub const PHASES: [PhaseKind; 7] = [
    PhaseKind::Calibration,
    PhaseKind::Instructions,
    PhaseKind::Explore,
    PhaseKind::Target,
    PhaseKind::HapticFeedback,
    PhaseKind::Practice,
    PhaseKind::Testing,
];

pub const STATUSES: [SessionStatus; 4] = [
    SessionStatus::Complete,
    SessionStatus::SafetyStop,
    SessionStatus::Disconnected,
    SessionStatus::CalibrationFailed,
];

pub fn condition() -> impl Strategy<Value = Condition> {
    prop::sample::select(Condition::SUMMARY_ORDER.to_vec())
}

// awkward floats on purpose: long mantissas, subnormal-ish, negatives
fn any_real(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![lo..hi, Just(lo), Just(hi), Just(0.1 + 0.2), Just(1e-300_f64.max(lo).min(hi))]
}

fn sample(t: f64) -> impl Strategy<Value = SampleRecord> {
    (
        any_real(0.0, 30.0),
        any_real(0.0, 30.0),
        any_real(0.0, 45.0),
        any_real(45.0, 180.0),
        prop::sample::select(PHASES.to_vec()),
        prop::option::of(condition()),
    )
        .prop_map(move |(a, c, f, arm, phase, condition)| SampleRecord {
            t,
            actuator_pos: a,
            commanded_pos: c,
            force: f,
            arm_angle: arm,
            phase,
            condition,
        })
}

fn trial(end: f64) -> impl Strategy<Value = TrialRecord> {
    (
        prop::sample::select(PHASES.to_vec()),
        condition(),
        0u32..8,
        0u32..10,
        45.0f64..=180.0,
        45.0f64..=180.0,
        0.0f64..100.0,
        0u32..500,
        any_real(0.0, 45.0),
    )
        .prop_map(move |(phase, condition, b, i, tgt, fin, dur, keys, force)| TrialRecord {
            phase,
            condition,
            block_index: b,
            trial_index: i,
            target: AngleDeg::new(tgt).unwrap(),
            final_angle: AngleDeg::new(fin).unwrap(),
            signed_error: fin - tgt,
            duration: dur,
            key_presses: keys,
            steady_force: force,
            end_time: end,
        })
}

fn increasing(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-9f64..5.0, n).prop_map(|gaps| {
        let mut t = 0.0;
        gaps.into_iter()
            .map(|g| {
                t += g;
                t
            })
            .collect()
    })
}

fn calibration() -> impl Strategy<Value = Option<CalibrationResult>> {
    prop::option::of(
        (0.0f64..14.0, 15.0f64..30.0, 0.0f64..5.0, 5.5f64..45.0, 3u32..10)
            .prop_map(|(a, b, c, d, r)| CalibrationResult::new(a, b, c, d, r).unwrap()),
    )
}

/// Arbitrary well-formed session logs.
pub fn session_log() -> impl Strategy<Value = SessionLog> {
    (
        any::<u64>(),
        "[0-9a-f]{0,64}",
        "[A-Za-z0-9_.-]{1,12}",
        prop::sample::select(vec![Group::HapticFirst, Group::NoHapticFirst]),
        prop::sample::select(STATUSES.to_vec()),
        calibration(),
        increasing(0..40),
        increasing(0..200),
    )
        .prop_flat_map(|(seed, hash, id, group, status, calib, trial_t, sample_t)| {
            let trials: Vec<_> = trial_t.into_iter().map(trial).collect();
            let samples: Vec<_> = sample_t.into_iter().map(sample).collect();
            (
                Just((seed, hash, id, group, status, calib)),
                trials,
                samples,
            )
        })
        .prop_map(|((seed, hash, id, group, status, calib), trials, samples)| {
            let mut log = SessionLog::new(LogHeader {
                schema_version: SCHEMA_VERSION,
                seed,
                config_hash: hash,
                participant_id: id,
                group,
                status,
            })
            .unwrap();
            if let Some(c) = calib {
                log.set_calibration(c);
            }
            for t in trials {
                log.append_trial(t).unwrap();
            }
            for s in samples {
                log.append_sample(s).unwrap();
            }
            log
        })
}
