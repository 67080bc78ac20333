//! Comma-separated result tables, one per figure-style view of the data.

use std::fmt::Display;
use std::str::FromStr;

use crate::log::SessionLog;
use crate::protocol::Condition;

use super::{
    calibration_rows, error_by_angle, error_statistics, force_angle_regression, force_by_angle, learning_curve,
    mean_se, summarize_conditions, AnalysisError, EffectResult, ForceFit, PairedTest,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableKind {
    Calibration,
    Summary,
    Angle,
    Force,
    Learning,
}

impl TableKind {
    pub const ALL: [TableKind; 5] = [
        TableKind::Calibration,
        TableKind::Summary,
        TableKind::Angle,
        TableKind::Force,
        TableKind::Learning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::Calibration => "calibration",
            TableKind::Summary => "summary",
            TableKind::Angle => "angle",
            TableKind::Force => "force",
            TableKind::Learning => "learning",
        }
    }
}

impl FromStr for TableKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown table {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `summary` for `summary.csv`.
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn s<T: Display>(v: T) -> String {
    v.to_string()
}

fn calibration(logs: &[SessionLog]) -> Result<Table, AnalysisError> {
    let rows = calibration_rows(logs)?;
    let mut t = Table::new(
        "calibration",
        &["participant_id", "min_pos_mm", "max_pos_mm", "detection_force_n", "comfort_force_n", "repetitions"],
    );
    for r in &rows {
        t.push(vec![
            r.participant_id.clone(),
            s(r.min_pos),
            s(r.max_pos),
            s(r.detection_force),
            s(r.comfort_force),
            s(r.repetitions),
        ]);
    }
    let col = |f: fn(&super::CalibrationRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let cols = [
        col(|r| r.min_pos),
        col(|r| r.max_pos),
        col(|r| r.detection_force),
        col(|r| r.comfort_force),
    ];
    let sd = |xs: &[f64]| mean_se(xs).1 * (xs.len() as f64).sqrt();
    let mut mean_row = vec!["mean".to_string()];
    let mut sd_row = vec!["sd".to_string()];
    for c in &cols {
        mean_row.push(s(mean_se(c).0));
        sd_row.push(s(sd(c)));
    }
    mean_row.push(String::new());
    sd_row.push(String::new());
    t.push(mean_row);
    t.push(sd_row);
    Ok(t)
}

/// Per-condition means and SEs, without the statistical tests.
pub fn summary_table(logs: &[SessionLog]) -> Result<Table, AnalysisError> {
    let mut t = Table::new(
        "summary",
        &[
            "condition",
            "n",
            "mean_abs_error_deg",
            "se_abs_error_deg",
            "mean_signed_error_deg",
            "se_signed_error_deg",
        ],
    );
    for c in summarize_conditions(logs)? {
        t.push(vec![
            c.condition.code().to_string(),
            s(c.n),
            s(c.mean_abs),
            s(c.se_abs),
            s(c.mean_signed),
            s(c.se_signed),
        ]);
    }
    Ok(t)
}

fn summary(logs: &[SessionLog]) -> Result<Vec<Table>, AnalysisError> {
    let t = summary_table(logs)?;
    let stats = error_statistics(logs)?;
    let mut st = Table::new(
        "stats",
        &["test", "effect", "statistic", "df_effect", "df_error", "p", "p_adjusted", "eta_squared_classical"],
    );
    let anova_row = |test: &str, effect: &str, e: &EffectResult| {
        vec![
            test.to_string(),
            effect.to_string(),
            s(e.f),
            s(e.df_effect),
            s(e.df_error),
            s(e.p),
            String::new(),
            s(e.eta_squared),
        ]
    };
    let t_row = |effect: &str, p: &PairedTest| {
        vec![
            "paired_t_bonferroni".to_string(),
            effect.to_string(),
            s(p.t),
            String::new(),
            s(p.df),
            s(p.p_raw),
            s(p.p_adjusted),
            String::new(),
        ]
    };
    st.push(anova_row("rm_anova_2x2", "haptic", &stats.two_way.a));
    st.push(anova_row("rm_anova_2x2", "visual", &stats.two_way.b));
    st.push(anova_row("rm_anova_2x2", "haptic_x_visual", &stats.two_way.interaction));
    st.push(anova_row("one_way_rm_anova", "haptic_in_nV", &stats.haptic_nv.effect));
    st.push(anova_row("one_way_rm_anova", "haptic_in_V", &stats.haptic_v.effect));
    st.push(t_row("H nV vs nH nV", &stats.posthoc_nv));
    st.push(t_row("H V vs nH V", &stats.posthoc_v));
    Ok(vec![t, st])
}

fn angle(logs: &[SessionLog]) -> Table {
    let mut t = Table::new(
        "angle",
        &["condition", "target_deg", "n", "mean_abs_error_deg", "se_abs_error_deg", "mean_signed_error_deg"],
    );
    for p in error_by_angle(logs) {
        t.push(vec![
            p.condition.code().to_string(),
            s(p.target.get()),
            s(p.n),
            s(p.mean_abs),
            s(p.se_abs),
            s(p.mean_signed),
        ]);
    }
    t
}

fn force(logs: &[SessionLog]) -> Result<Vec<Table>, AnalysisError> {
    let mut points = Table::new("force", &["condition", "target_deg", "n", "mean_force_n", "se_force_n"]);
    for p in force_by_angle(logs) {
        points.push(vec![
            p.condition.code().to_string(),
            s(p.target.get()),
            s(p.n),
            s(p.mean_force),
            s(p.se_force),
        ]);
    }
    let mut fits = Table::new(
        "force_fit",
        &["condition", "applicable", "n", "slope_n_per_deg", "intercept_n", "r_squared", "mean_force_n"],
    );
    for c in Condition::SUMMARY_ORDER {
        let row = match force_angle_regression(logs, c)? {
            ForceFit::Linear {
                slope,
                intercept,
                r_squared,
                n,
            } => vec![
                c.code().to_string(),
                "true".into(),
                s(n),
                s(slope),
                s(intercept),
                s(r_squared),
                String::new(),
            ],
            ForceFit::NotApplicable { mean_force, n } => vec![
                c.code().to_string(),
                "false".into(),
                s(n),
                String::new(),
                String::new(),
                String::new(),
                s(mean_force),
            ],
        };
        fits.push(row);
    }
    Ok(vec![points, fits])
}

fn learning(logs: &[SessionLog]) -> Result<Table, AnalysisError> {
    let mut t = Table::new(
        "learning",
        &["block", "order", "n", "mean_abs_error_deg", "se_abs_error_deg", "targets_per_min"],
    );
    for p in learning_curve(logs)? {
        let order = match p.kind {
            crate::protocol::BlockKind::Descending => "descending",
            crate::protocol::BlockKind::MixedBlock2 => "mixed",
            crate::protocol::BlockKind::Random => "random",
        };
        t.push(vec![
            s(p.block),
            order.to_string(),
            s(p.n),
            s(p.mean_abs),
            s(p.se_abs),
            s(p.mean_speed),
        ]);
    }
    Ok(t)
}

/// Build the requested tables. Each kind fails independently; the summary
/// kind also yields the statistics table and the force kind also yields the
/// per-condition fits.
pub fn build_tables(logs: &[SessionLog], kinds: &[TableKind]) -> Vec<(TableKind, Result<Vec<Table>, AnalysisError>)> {
    kinds
        .iter()
        .map(|&k| {
            let result = if logs.is_empty() {
                Err(AnalysisError::NoLogs)
            } else {
                match k {
                    TableKind::Calibration => calibration(logs).map(|t| vec![t]),
                    TableKind::Summary => summary(logs),
                    TableKind::Angle => Ok(vec![angle(logs)]),
                    TableKind::Force => force(logs),
                    TableKind::Learning => learning(logs).map(|t| vec![t]),
                }
            };
            (k, result)
        })
        .collect()
}
