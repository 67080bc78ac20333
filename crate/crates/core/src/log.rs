//! Session logs: header, calibration, per-trial outcomes and the control-tick
//! sample stream, persisted as a single CSV file.
//!
//! File layout (UTF-8, `\n` line endings):
//!
//! ```text
//! # deepsense session log
//! # schema_version,1
//! # seed,<u64>
//! # config_hash,<hex>
//! # participant_id,<id>
//! # group,HapticFirst|NoHapticFirst
//! # status,complete|safety_stop|disconnected|calibration_failed
//! # calibration,<min_pos>,<max_pos>,<min_force>,<max_force>,<repetitions>   (or `# calibration,none`)
//! # table,trials,<rows>
//! phase,condition,block,trial,target_deg,final_deg,signed_error_deg,duration_s,key_presses,steady_force_n,end_s
//! ...
//! # table,samples,<rows>
//! t_s,actuator_pos_mm,commanded_pos_mm,force_n,arm_angle_deg,phase,condition
//! ...
//! # end
//! ```
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! identical `f64`, so export followed by import is lossless.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::mapping::{AngleDeg, CalibrationResult};
use crate::protocol::{Condition, Group, PhaseKind};

pub const SCHEMA_VERSION: u32 = 1;

const TRIAL_COLUMNS: &str =
    "phase,condition,block,trial,target_deg,final_deg,signed_error_deg,duration_s,key_presses,steady_force_n,end_s";
const SAMPLE_COLUMNS: &str = "t_s,actuator_pos_mm,commanded_pos_mm,force_n,arm_angle_deg,phase,condition";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema version {found} not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("timestamp {t} s does not advance past {last} s")]
    TimeRegression { t: f64, last: f64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> LogError {
    LogError::Parse {
        line,
        message: message.into(),
    }
}

/// How a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Complete,
    SafetyStop,
    Disconnected,
    CalibrationFailed,
}

impl SessionStatus {
    pub fn id(self) -> &'static str {
        match self {
            SessionStatus::Complete => "complete",
            SessionStatus::SafetyStop => "safety_stop",
            SessionStatus::Disconnected => "disconnected",
            SessionStatus::CalibrationFailed => "calibration_failed",
        }
    }

    fn from_id(s: &str) -> Option<Self> {
        Some(match s {
            "complete" => SessionStatus::Complete,
            "safety_stop" => SessionStatus::SafetyStop,
            "disconnected" => SessionStatus::Disconnected,
            "calibration_failed" => SessionStatus::CalibrationFailed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub participant_id: String,
    pub group: Group,
    pub status: SessionStatus,
}

/// One control-tick snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// s
    pub t: f64,
    /// mm
    pub actuator_pos: f64,
    /// mm
    pub commanded_pos: f64,
    /// Sensor reading, N.
    pub force: f64,
    /// deg
    pub arm_angle: f64,
    pub phase: PhaseKind,
    pub condition: Option<Condition>,
}

/// Outcome of one target presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub phase: PhaseKind,
    pub condition: Condition,
    pub block_index: u32,
    pub trial_index: u32,
    pub target: AngleDeg,
    pub final_angle: AngleDeg,
    /// final − target, deg.
    pub signed_error: f64,
    /// Presentation to confirmation, s.
    pub duration: f64,
    pub key_presses: u32,
    /// Mean sensor force over the window before confirmation, N.
    pub steady_force: f64,
    /// Session time of confirmation, s.
    pub end_time: f64,
}

impl TrialRecord {
    pub fn abs_error(&self) -> f64 {
        self.signed_error.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    calibration: Option<CalibrationResult>,
    samples: Vec<SampleRecord>,
    trials: Vec<TrialRecord>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains([',', '\n', '\r', '#']) && id.trim() == id
}

impl SessionLog {
    pub fn new(header: LogHeader) -> Result<Self, LogError> {
        if !valid_id(&header.participant_id) {
            return Err(LogError::InvalidRecord(format!(
                "participant id '{}' must be non-empty without commas, '#', or surrounding whitespace",
                header.participant_id
            )));
        }
        Ok(Self {
            header,
            calibration: None,
            samples: Vec::new(),
            trials: Vec::new(),
        })
    }

    pub fn calibration(&self) -> Option<&CalibrationResult> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, calib: CalibrationResult) {
        self.calibration = Some(calib);
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn is_complete(&self) -> bool {
        self.header.status == SessionStatus::Complete
    }

    /// `session_<participant>_<seed>.csv`
    pub fn file_name(&self) -> String {
        format!("session_{}_{}.csv", self.header.participant_id, self.header.seed)
    }

    pub fn append_sample(&mut self, record: SampleRecord) -> Result<(), LogError> {
        if !record.t.is_finite() {
            return Err(LogError::InvalidRecord(format!("non-finite sample time {}", record.t)));
        }
        if let Some(last) = self.samples.last() {
            if record.t <= last.t {
                return Err(LogError::TimeRegression { t: record.t, last: last.t });
            }
        }
        self.samples.push(record);
        Ok(())
    }

    pub fn append_trial(&mut self, record: TrialRecord) -> Result<(), LogError> {
        if !record.end_time.is_finite() {
            return Err(LogError::InvalidRecord(format!("non-finite trial end {}", record.end_time)));
        }
        if let Some(last) = self.trials.last() {
            if record.end_time <= last.end_time {
                return Err(LogError::TimeRegression {
                    t: record.end_time,
                    last: last.end_time,
                });
            }
        }
        self.trials.push(record);
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.samples.len() + self.trials.len()) + 512);
        let h = &self.header;
        out.push_str("# deepsense session log\n");
        let _ = writeln!(out, "# schema_version,{}", h.schema_version);
        let _ = writeln!(out, "# seed,{}", h.seed);
        let _ = writeln!(out, "# config_hash,{}", h.config_hash);
        let _ = writeln!(out, "# participant_id,{}", h.participant_id);
        let _ = writeln!(out, "# group,{}", h.group.name());
        let _ = writeln!(out, "# status,{}", h.status.id());
        match &self.calibration {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "# calibration,{},{},{},{},{}",
                    c.min_pos.get(),
                    c.max_pos.get(),
                    c.min_force.get(),
                    c.max_force.get(),
                    c.repetitions
                );
            }
            None => out.push_str("# calibration,none\n"),
        }

        let _ = writeln!(out, "# table,trials,{}", self.trials.len());
        out.push_str(TRIAL_COLUMNS);
        out.push('\n');
        for r in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.phase.id(),
                r.condition.code(),
                r.block_index,
                r.trial_index,
                r.target.get(),
                r.final_angle.get(),
                r.signed_error,
                r.duration,
                r.key_presses,
                r.steady_force,
                r.end_time
            );
        }

        let _ = writeln!(out, "# table,samples,{}", self.samples.len());
        out.push_str(SAMPLE_COLUMNS);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t,
                s.actuator_pos,
                s.commanded_pos,
                s.force,
                s.arm_angle,
                s.phase.id(),
                s.condition.map_or("-", Condition::code)
            );
        }
        out.push_str("# end\n");
        out
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), LogError> {
        let io = |source| LogError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(self.to_csv_string().as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)
    }

    pub fn import_csv(path: &Path) -> Result<Self, LogError> {
        let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, LogError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut last_line = 0;
        let mut next = |what: &str| -> Result<(usize, &str), LogError> {
            match lines.next() {
                Some((n, l)) => {
                    last_line = n;
                    Ok((n, l))
                }
                None => Err(parse_err(last_line + 1, format!("unexpected end of file, expected {what}"))),
            }
        };

        let (n, l) = next("title line")?;
        if l != "# deepsense session log" {
            return Err(parse_err(n, "not a session log"));
        }
        let (_, version) = header_field(next("schema_version")?, "schema_version")?;
        if version != SCHEMA_VERSION.to_string() {
            return Err(LogError::SchemaVersion {
                found: version.to_string(),
            });
        }
        let (n, seed) = header_field(next("seed")?, "seed")?;
        let seed = seed.parse::<u64>().map_err(|e| parse_err(n, format!("seed: {e}")))?;
        let (_, config_hash) = header_field(next("config_hash")?, "config_hash")?;
        let (n, participant_id) = header_field(next("participant_id")?, "participant_id")?;
        if !valid_id(participant_id) {
            return Err(parse_err(n, "invalid participant id"));
        }
        let (n, group) = header_field(next("group")?, "group")?;
        let group = group.parse::<Group>().map_err(|e| parse_err(n, e))?;
        let (n, status) = header_field(next("status")?, "status")?;
        let status = SessionStatus::from_id(status).ok_or_else(|| parse_err(n, format!("unknown status '{status}'")))?;
        let (n, calib) = header_field(next("calibration")?, "calibration")?;
        let calibration = if calib == "none" {
            None
        } else {
            let f: Vec<&str> = calib.split(',').collect();
            if f.len() != 5 {
                return Err(parse_err(n, format!("calibration: expected 5 fields, got {}", f.len())));
            }
            let num = |i: usize| parse_f64(f[i], n, "calibration");
            let reps = f[4].parse::<u32>().map_err(|e| parse_err(n, format!("calibration repetitions: {e}")))?;
            Some(
                CalibrationResult::new(num(0)?, num(1)?, num(2)?, num(3)?, reps)
                    .map_err(|e| parse_err(n, e.to_string()))?,
            )
        };

        let mut log = SessionLog::new(LogHeader {
            schema_version: SCHEMA_VERSION,
            seed,
            config_hash: config_hash.to_string(),
            participant_id: participant_id.to_string(),
            group,
            status,
        })
        .map_err(|e| parse_err(n, e.to_string()))?;
        log.calibration = calibration;

        let trial_rows = table_marker(next("trials table marker")?, "trials")?;
        let (n, cols) = next("trial columns")?;
        if cols != TRIAL_COLUMNS {
            return Err(parse_err(n, "unexpected trial columns"));
        }
        for _ in 0..trial_rows {
            let (n, row) = next("trial row")?;
            let rec = parse_trial(n, row)?;
            log.append_trial(rec).map_err(|e| parse_err(n, e.to_string()))?;
        }

        let sample_rows = table_marker(next("samples table marker")?, "samples")?;
        let (n, cols) = next("sample columns")?;
        if cols != SAMPLE_COLUMNS {
            return Err(parse_err(n, "unexpected sample columns"));
        }
        log.samples.reserve(sample_rows);
        for _ in 0..sample_rows {
            let (n, row) = next("sample row")?;
            let rec = parse_sample(n, row)?;
            log.append_sample(rec).map_err(|e| parse_err(n, e.to_string()))?;
        }

        let (n, end) = next("end marker")?;
        if end != "# end" {
            return Err(parse_err(n, "expected '# end'"));
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(parse_err(n, "content after end marker"));
        }
        Ok(log)
    }
}

fn header_field<'a>((n, line): (usize, &'a str), key: &str) -> Result<(usize, &'a str), LogError> {
    let rest = line
        .strip_prefix("# ")
        .and_then(|r| r.strip_prefix(key))
        .and_then(|r| r.strip_prefix(','))
        .ok_or_else(|| parse_err(n, format!("expected header '# {key},...'")))?;
    Ok((n, rest))
}

fn table_marker((n, line): (usize, &str), name: &str) -> Result<usize, LogError> {
    let (_, rest) = header_field((n, line), "table")?;
    let count = rest
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix(','))
        .ok_or_else(|| parse_err(n, format!("expected '# table,{name},<rows>'")))?;
    count.parse::<usize>().map_err(|e| parse_err(n, format!("row count: {e}")))
}

fn parse_f64(s: &str, line: usize, field: &str) -> Result<f64, LogError> {
    let v = s
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("{field}: '{s}' is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("{field}: non-finite value")))
    }
}

fn parse_angle(s: &str, line: usize, field: &str) -> Result<AngleDeg, LogError> {
    AngleDeg::new(parse_f64(s, line, field)?).map_err(|e| parse_err(line, format!("{field}: {e}")))
}

fn parse_phase(s: &str, line: usize) -> Result<PhaseKind, LogError> {
    PhaseKind::from_id(s).ok_or_else(|| parse_err(line, format!("unknown phase '{s}'")))
}

fn parse_trial(n: usize, row: &str) -> Result<TrialRecord, LogError> {
    let f: Vec<&str> = row.split(',').collect();
    if f.len() != 11 {
        return Err(parse_err(n, format!("trial row: expected 11 fields, got {}", f.len())));
    }
    let int = |i: usize, name: &str| f[i].parse::<u32>().map_err(|e| parse_err(n, format!("{name}: {e}")));
    let rec = TrialRecord {
        phase: parse_phase(f[0], n)?,
        condition: f[1].parse::<Condition>().map_err(|e| parse_err(n, e))?,
        block_index: int(2, "block")?,
        trial_index: int(3, "trial")?,
        target: parse_angle(f[4], n, "target_deg")?,
        final_angle: parse_angle(f[5], n, "final_deg")?,
        signed_error: parse_f64(f[6], n, "signed_error_deg")?,
        duration: parse_f64(f[7], n, "duration_s")?,
        key_presses: int(8, "key_presses")?,
        steady_force: parse_f64(f[9], n, "steady_force_n")?,
        end_time: parse_f64(f[10], n, "end_s")?,
    };
    if rec.signed_error != rec.final_angle.get() - rec.target.get() {
        return Err(parse_err(n, "signed_error_deg does not equal final_deg - target_deg"));
    }
    Ok(rec)
}

fn parse_sample(n: usize, row: &str) -> Result<SampleRecord, LogError> {
    let f: Vec<&str> = row.split(',').collect();
    if f.len() != 7 {
        return Err(parse_err(n, format!("sample row: expected 7 fields, got {}", f.len())));
    }
    let condition = match f[6] {
        "-" => None,
        c => Some(c.parse::<Condition>().map_err(|e| parse_err(n, e))?),
    };
    Ok(SampleRecord {
        t: parse_f64(f[0], n, "t_s")?,
        actuator_pos: parse_f64(f[1], n, "actuator_pos_mm")?,
        commanded_pos: parse_f64(f[2], n, "commanded_pos_mm")?,
        force: parse_f64(f[3], n, "force_n")?,
        arm_angle: parse_f64(f[4], n, "arm_angle_deg")?,
        phase: parse_phase(f[5], n)?,
        condition,
    })
}
