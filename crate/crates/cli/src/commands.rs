use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use deepsense::analysis::{build_tables, summarize_conditions, summary_table, Table, TableKind};
use deepsense::cohort::simulate_cohort;
use deepsense::config::ConfigError;
use deepsense::log::SessionLog;
use deepsense::SessionConfig;

use crate::{error_line, exit};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Runtime(_) => exit::RUNTIME,
        }
    }

    /// Diagnostic lines, one per problem.
    pub fn lines(&self) -> Vec<String> {
        match self {
            CliError::Usage(m) => vec![error_line("usage", None, m)],
            CliError::Config(ConfigError::Invalid(fields)) => fields
                .iter()
                .map(|f| error_line("config", Some(f.field), &f.message))
                .collect(),
            CliError::Config(e) => vec![error_line("config", None, &e.to_string())],
            CliError::Runtime(e) => vec![error_line("runtime", None, &format!("{e:#}"))],
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Defaults when no file is given; validated either way.
pub fn load_config(path: Option<&Path>) -> Result<SessionConfig, CliError> {
    let cfg = match path {
        Some(p) => SessionConfig::load(p).map_err(CliError::Config)?,
        None => SessionConfig::default(),
    };
    cfg.validate().map_err(|e| CliError::Config(ConfigError::Invalid(e)))?;
    Ok(cfg)
}

fn write_table(dir: &Path, table: &Table) -> anyhow::Result<PathBuf> {
    let path = dir.join(table.file_name());
    fs::write(&path, table.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

#[derive(Debug)]
pub struct SimulateReport {
    pub logs: Vec<PathBuf>,
    pub summary: PathBuf,
    /// Human-readable condition means.
    pub text: String,
}

/// Run `n` synthetic participants and write their logs plus a summary table.
pub fn simulate(cfg: &SessionConfig, n: usize, seed: u64, out: &Path) -> Result<SimulateReport, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let logs = simulate_cohort(cfg, n, seed).context("simulation failed")?;
    let mut paths = Vec::with_capacity(n);
    for log in &logs {
        let path = out.join(log.file_name());
        log.export_csv(&path).with_context(|| format!("cannot write {}", path.display()))?;
        paths.push(path);
    }
    let table = summary_table(&logs).context("cannot summarise cohort")?;
    let summary = write_table(out, &table)?;
    let mut text = String::new();
    for s in summarize_conditions(&logs).context("cannot summarise cohort")? {
        text.push_str(&format!(
            "{:<6} |error| {:6.2} ± {:4.2} deg   signed {:+6.2} deg\n",
            s.condition.code(),
            s.mean_abs,
            s.se_abs,
            s.mean_signed
        ));
    }
    Ok(SimulateReport {
        logs: paths,
        summary,
        text,
    })
}

#[derive(Debug, Default)]
pub struct AnalyzeReport {
    pub logs: usize,
    pub written: Vec<PathBuf>,
    pub file_errors: Vec<(PathBuf, String)>,
    pub table_errors: Vec<(TableKind, String)>,
}

impl AnalyzeReport {
    pub fn exit_code(&self) -> u8 {
        if self.written.is_empty() {
            exit::RUNTIME
        } else if self.file_errors.is_empty() && self.table_errors.is_empty() {
            exit::OK
        } else {
            exit::PARTIAL
        }
    }

    pub fn error_lines(&self) -> Vec<String> {
        let files = self
            .file_errors
            .iter()
            .map(|(p, e)| error_line("log", Some(&p.display().to_string()), e));
        let tables = self
            .table_errors
            .iter()
            .map(|(k, e)| error_line("table", Some(k.name()), e));
        files.chain(tables).collect()
    }
}

/// Directories contribute their `session_*.csv` files; explicit files are
/// taken as given.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("cannot read {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && p.file_name()
                            .and_then(|n| n.to_str())
                            .is_some_and(|n| n.starts_with("session_") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::Usage(format!("{} does not exist", input.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no session logs found in the given inputs".into()));
    }
    Ok(files)
}

pub fn analyze(inputs: &[PathBuf], out: &Path, kinds: &[TableKind]) -> Result<AnalyzeReport, CliError> {
    let files = collect_inputs(inputs)?;
    let mut report = AnalyzeReport::default();
    let mut logs: Vec<SessionLog> = Vec::new();
    for f in files {
        match SessionLog::import_csv(&f) {
            Ok(log) => logs.push(log),
            Err(e) => report.file_errors.push((f, e.to_string())),
        }
    }
    report.logs = logs.len();
    if logs.is_empty() {
        return Ok(report);
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (kind, result) in build_tables(&logs, kinds) {
        match result {
            Ok(tables) => {
                for t in &tables {
                    report.written.push(write_table(out, t)?);
                }
            }
            Err(e) => report.table_errors.push((kind, e.to_string())),
        }
    }
    Ok(report)
}

/// `all` or a list of table names.
pub fn parse_tables(names: &[String]) -> Result<Vec<TableKind>, CliError> {
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(TableKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for n in names {
        let k: TableKind = n.parse().map_err(CliError::Usage)?;
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    Ok(kinds)
}
