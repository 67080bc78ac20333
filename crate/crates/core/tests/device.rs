use deepsense::device::{
    fsm_transition, run_until, skin_force, Device, DeviceConfig, DeviceEvent, DeviceMode, SkinModel, STROKE_MM,
};
use deepsense::ActuatorPos;
use proptest::prelude::*;

fn runtime(skin: SkinModel) -> Device {
    let mut d = Device::new(DeviceConfig::default(), skin, 7);
    d.handle(DeviceEvent::CalibrationDone);
    d
}

/// Stand-alone closed loop: PID on position error producing a velocity,
/// integral frozen while the output saturates and clamped to its bound,
/// then an explicit Euler step. Returns the time after which the position
/// stays within `band` of the target.
fn oracle_settle_time(start: f64, target: f64, band: f64, horizon: f64) -> f64 {
    let (kp, ki, kd, vmax, ilim, dt) = (8.0, 2.0, 0.1, 12.0, 5.0, 0.01);
    let mut pos = start;
    let mut integral: f64 = 0.0;
    let mut prev: Option<f64> = None;
    let mut last_outside = 0.0;
    let steps = (horizon / dt).round() as usize;
    for k in 1..=steps {
        let e = target - pos;
        let de = prev.map_or(0.0, |p| (e - p) / dt);
        prev = Some(e);
        let trial = (integral + e * dt).clamp(-ilim, ilim);
        let raw = kp * e + ki * trial + kd * de;
        if raw.abs() <= vmax {
            integral = trial;
        }
        let v = (kp * e + ki * integral + kd * de).clamp(-vmax, vmax);
        pos += v * dt;
        if (pos - target).abs() > band {
            last_outside = k as f64 * dt;
        }
    }
    last_outside
}

fn device_settle_time(start_target: f64, step: f64, band: f64, horizon: f64) -> f64 {
    let mut d = runtime(SkinModel::default().noiseless());
    d.set_target(start_target).unwrap();
    run_until(&mut d, 5.0, |_| false).unwrap();
    let target = start_target + step;
    d.set_target(target).unwrap();
    let dt = d.config().dt;
    let mut last_outside = 0.0;
    let steps = (horizon / dt).round() as usize;
    for k in 1..=steps {
        d.step(dt).unwrap();
        if (d.position() - target).abs() > band {
            last_outside = k as f64 * dt;
        }
    }
    last_outside
}

// settling time of a 5 mm step to within 2%, from the stand-alone loop
const FROZEN_SETTLE_S: f64 = 0.60;

#[test]
fn five_mm_step_settles_under_one_second() {
    let band = 0.02 * 5.0;
    let oracle = oracle_settle_time(6.0, 11.0, band, 3.0);
    assert!((oracle - FROZEN_SETTLE_S).abs() < 1e-9, "oracle settle {oracle}");
    let got = device_settle_time(6.0, 5.0, band, 3.0);
    assert!((got - oracle).abs() < 1e-9, "device {got} vs oracle {oracle}");
    assert!(got < 1.0);
}

#[test]
fn settles_in_both_directions_anywhere_in_stroke() {
    for &(from, step) in &[(1.0, 5.0), (12.0, -5.0), (6.0, 5.0), (13.0, 5.0)] {
        let t = device_settle_time(from, step, 0.1, 3.0);
        assert!(t < 1.0, "from {from} step {step}: {t}");
    }
}

#[test]
fn converges_with_constant_setpoint() {
    let mut d = runtime(SkinModel::default().noiseless());
    d.set_target(14.0).unwrap();
    run_until(&mut d, 10.0, |_| false).unwrap();
    assert!((d.position() - 14.0).abs() < 0.02 * STROKE_MM);
}

#[test]
fn step_from_zero_rate_limited() {
    let mut d = runtime(SkinModel::default().noiseless());
    // drive to the low end first
    d.set_target(0.0).unwrap();
    run_until(&mut d, 5.0, |_| false).unwrap();
    d.set_target(30.0).unwrap();
    let before = d.position();
    d.step(0.1).unwrap();
    assert!(d.position() - before <= 1.2 + 1e-12);
}

#[test]
fn estop_from_every_mode_stops_motion() {
    for mode in DeviceMode::ALL {
        assert_eq!(fsm_transition(mode, DeviceEvent::SafetyPressed), DeviceMode::EStop);
    }
    let mut d = runtime(SkinModel::default().noiseless());
    d.set_target(20.0).unwrap();
    for _ in 0..20 {
        d.step(0.01).unwrap();
    }
    d.handle(DeviceEvent::SafetyPressed);
    let frozen = d.position();
    assert!(d.set_target(5.0).is_err());
    for _ in 0..100 {
        d.step(0.01).unwrap();
        assert_eq!(d.position(), frozen);
        assert_eq!(d.commanded_velocity(), 0.0);
    }
    assert_eq!(d.handle(DeviceEvent::OperatorReset), DeviceMode::Calibration);
    assert!(d.set_target(5.0).is_ok());
}

#[derive(Debug, Clone)]
enum Cmd {
    Target(f64),
    Step(f64),
    Event(DeviceEvent),
}

fn cmd() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        4 => (-5.0f64..40.0).prop_map(Cmd::Target),
        8 => (0.001f64..0.2).prop_map(Cmd::Step),
        1 => prop::sample::select(DeviceEvent::ALL.to_vec()).prop_map(Cmd::Event),
    ]
}

proptest! {
    #[test]
    fn position_bounded_and_rate_limited(cmds in prop::collection::vec(cmd(), 1..200), seed in any::<u64>()) {
        let mut d = Device::new(DeviceConfig::default(), SkinModel::default(), seed);
        let max_speed = d.config().max_speed;
        for c in cmds {
            match c {
                Cmd::Target(mm) => { let _ = d.set_target(mm); }
                Cmd::Event(e) => { d.handle(e); }
                Cmd::Step(dt) => {
                    let before = d.position();
                    let mode = d.mode();
                    d.step(dt).unwrap();
                    let moved = (d.position() - before).abs();
                    prop_assert!(moved <= max_speed * dt + 1e-12);
                    if mode == DeviceMode::EStop {
                        prop_assert_eq!(moved, 0.0);
                    }
                }
            }
            prop_assert!((0.0..=STROKE_MM).contains(&d.position()));
            prop_assert!(d.true_force().get() <= 15.0 + 1e-9);
            prop_assert!((0.0..=45.0).contains(&d.measured_force()));
        }
    }

    #[test]
    fn skin_force_monotone(a in 0.0f64..30.0, b in 0.0f64..30.0, k in 0.1f64..5.0, c in 0.0f64..20.0) {
        let skin = SkinModel { contact_pos: c, stiffness: k, sensor_noise_sigma: 0.0, quantization_step: 0.0 };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let fl = skin_force(ActuatorPos::new(lo).unwrap(), &skin).get();
        let fh = skin_force(ActuatorPos::new(hi).unwrap(), &skin).get();
        prop_assert!(fl <= fh);
        if lo <= c {
            prop_assert_eq!(fl, 0.0);
        }
    }
}
