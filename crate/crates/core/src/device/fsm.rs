use serde::{Deserialize, Serialize};

/// Operating mode of the stimulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceMode {
    Calibration,
    Runtime,
    /// Safety stop. Only an operator reset leaves this mode.
    EStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceEvent {
    StartCalibration,
    CalibrationDone,
    SafetyPressed,
    OperatorReset,
}

impl DeviceMode {
    pub const ALL: [DeviceMode; 3] = [DeviceMode::Calibration, DeviceMode::Runtime, DeviceMode::EStop];
}

impl DeviceEvent {
    pub const ALL: [DeviceEvent; 4] = [
        DeviceEvent::StartCalibration,
        DeviceEvent::CalibrationDone,
        DeviceEvent::SafetyPressed,
        DeviceEvent::OperatorReset,
    ];
}

/// Mode transition table. Pairs not listed below leave the mode unchanged.
pub fn fsm_transition(mode: DeviceMode, event: DeviceEvent) -> DeviceMode {
    use DeviceEvent::*;
    use DeviceMode::*;
    match (mode, event) {
        (_, SafetyPressed) => EStop,
        (EStop, OperatorReset) => Calibration,
        (Runtime, StartCalibration) => Calibration,
        (Calibration, CalibrationDone) => Runtime,
        (m, _) => m,
    }
}
