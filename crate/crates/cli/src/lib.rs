//! Operator commands behind the `deepsense` binary.

pub mod commands;
pub mod serve;
pub mod wire;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Bad arguments or an invalid config.
    pub const USAGE: u8 = 1;
    pub const RUNTIME: u8 = 2;
    /// Analysis wrote some tables but skipped files or tables.
    pub const PARTIAL: u8 = 3;
}

/// One machine-readable diagnostic line for standard error.
pub fn error_line(kind: &str, field: Option<&str>, message: &str) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("level".into(), "error".into());
    obj.insert("kind".into(), kind.into());
    if let Some(f) = field {
        obj.insert("field".into(), f.into());
    }
    obj.insert("message".into(), message.into());
    serde_json::Value::Object(obj).to_string()
}
