//! JSON messages exchanged with the participant's browser over the websocket.
//!
//! Every message is a JSON object with a protocol version `v` and a `type`
//! tag. Server to client:
//!
//! ```json
//! {"v":1,"type":"state","t_s":12.5,"stage_id":7,"stage":"trial","phase":"testing",
//!  "condition":"H V","target_deg":90.0,"arm_deg":102.0,"accepts_keys":true,"block":0,"trial":3}
//! {"v":1,"type":"busy","message":"..."}
//! {"v":1,"type":"error","message":"..."}
//! {"v":1,"type":"end","status":"complete","log_file":"session_p01_1.csv"}
//! ```
//!
//! `arm_deg` is omitted whenever the arm is not on screen. Client to server:
//!
//! ```json
//! {"v":1,"type":"key","key":"Flex"}      // or Extend, Confirm
//! {"v":1,"type":"signal","signal":"Detection"}   // or Comfort
//! {"v":1,"type":"safety"}
//! ```

use deepsense::protocol::{Action, CalibrationSignal, Observation, Stage};
use deepsense::KeyDirection;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub t_s: f64,
    /// Increments every time a new stage instance (trial, pause, ramp) starts.
    pub stage_id: u64,
    pub stage: String,
    pub phase: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countdown_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub accepts_keys: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    State(StateMsg),
    Busy { message: String },
    Error { message: String },
    End {
        status: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_file: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Key {
    Flex,
    Extend,
    Confirm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Key { key: Key },
    Signal { signal: CalibrationSignal },
    Safety,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

impl ServerMsg {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            body: self,
        })
        .expect("server messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let env: Envelope<ServerMsg> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        check_version(env.v)?;
        Ok(env.body)
    }
}

impl ClientMsg {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            body: self,
        })
        .expect("client messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let env: Envelope<ClientMsg> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        check_version(env.v)?;
        Ok(env.body)
    }

    pub fn action(self) -> Action {
        match self {
            ClientMsg::Key { key: Key::Flex } => Action::Key(KeyDirection::Flex),
            ClientMsg::Key { key: Key::Extend } => Action::Key(KeyDirection::Extend),
            ClientMsg::Key { key: Key::Confirm } => Action::Confirm,
            ClientMsg::Signal { signal } => Action::Signal(signal),
            ClientMsg::Safety => Action::Safety,
        }
    }
}

fn check_version(v: u32) -> Result<(), String> {
    if v == PROTOCOL_VERSION {
        Ok(())
    } else {
        Err(format!("unsupported protocol version {v}, expected {PROTOCOL_VERSION}"))
    }
}

fn prompt(stage: &Stage) -> Option<String> {
    match stage {
        Stage::Calibration {
            completed,
            required,
            awaiting,
        } => {
            let ask = match awaiting {
                CalibrationSignal::Detection => "Press when you first feel pressure",
                CalibrationSignal::Comfort => "Press when the pressure becomes uncomfortable",
            };
            Some(format!("{ask} ({completed} of {required} done)"))
        }
        Stage::Instructions { next, .. } => Some(format!("Get ready: {}", next.id().replace('_', " "))),
        Stage::Explore { .. } => Some("Move the arm freely and feel the pressure change".into()),
        Stage::Stimulus { .. } => Some("Feel the pressure for this angle".into()),
        Stage::Corrective { .. } => Some("Your arm and the target".into()),
        Stage::Trial { .. } => None,
    }
}

fn stage_name(stage: &Stage) -> &'static str {
    match stage {
        Stage::Calibration { .. } => "calibration",
        Stage::Instructions { .. } => "instructions",
        Stage::Explore { .. } => "explore",
        Stage::Trial { .. } => "trial",
        Stage::Stimulus { .. } => "stimulus",
        Stage::Corrective { .. } => "corrective",
    }
}

impl StateMsg {
    /// What the participant may see of this tick. The arm angle is copied
    /// only from the observation, which already hides it when it is off
    /// screen.
    pub fn from_observation(obs: &Observation, stage_id: u64) -> Self {
        let (condition, block, trial) = match obs.stage {
            Stage::Trial {
                condition, block, trial, ..
            } => (Some(condition.code().to_string()), Some(block), Some(trial)),
            _ => (None, None, None),
        };
        Self {
            t_s: obs.t,
            stage_id,
            stage: stage_name(&obs.stage).to_string(),
            phase: obs.stage.phase().id().to_string(),
            condition,
            target_deg: obs.stage.target().map(|a| a.get()),
            arm_deg: obs.arm.map(|a| a.get()),
            countdown_s: obs.stage.countdown(),
            prompt: prompt(&obs.stage),
            accepts_keys: obs.stage.accepts_keys(),
            block,
            trial,
        }
    }
}
