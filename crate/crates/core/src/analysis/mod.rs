//! Metrics and statistics over session logs.

pub mod anova;
pub mod special;
mod tables;

use thiserror::Error;

use crate::log::{SessionLog, TrialRecord};
use crate::mapping::AngleDeg;
use crate::protocol::{canonical_angles, BlockKind, Condition, PhaseKind};

pub use anova::{one_way_rm_anova, paired_t_bonferroni, rm_anova_2x2, Anova2x2, EffectResult, OneWay, PairedTest, Ss2x2};
pub use tables::{build_tables, summary_table, Table, TableKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {min} participants, got {n}")]
    TooFewParticipants { n: usize, min: usize },
    #[error("need at least 2 levels, got {k}")]
    TooFewLevels { k: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    Unbalanced { row: usize, expected: usize, found: usize },
    #[error("missing or non-finite cell at position {index}")]
    MissingCell { index: usize },
    #[error("comparison count must be at least 1")]
    NoComparisons,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no session logs to analyze")]
    NoLogs,
    #[error("participant {participant}: no testing trials for condition {condition}")]
    MissingCondition { participant: String, condition: Condition },
    #[error("participant {participant}: practice block {block} missing")]
    MissingBlock { participant: String, block: u32 },
    #[error("participant {participant}: no calibration result")]
    MissingCalibration { participant: String },
    #[error("condition {condition}: need at least 3 distinct target angles, found {found}")]
    TooFewAngles { condition: Condition, found: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Signed angle error, final minus target, deg.
pub fn angle_error(final_angle: AngleDeg, target: AngleDeg) -> f64 {
    final_angle.get() - target.get()
}

pub fn angle_error_magnitude(final_angle: AngleDeg, target: AngleDeg) -> f64 {
    angle_error(final_angle, target).abs()
}

/// Mean and standard error (sample sd / √n). SE is 0 for a single value.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn testing_trials(log: &SessionLog, condition: Condition) -> impl Iterator<Item = &TrialRecord> {
    log.trials()
        .iter()
        .filter(move |t| t.phase == PhaseKind::Testing && t.condition == condition)
}

/// One participant's mean errors in one testing condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionMeans {
    pub mean_abs: f64,
    pub mean_signed: f64,
    pub trials: usize,
}

/// Per-participant means for each condition in summary order.
pub fn participant_condition_means(log: &SessionLog) -> Result<[ConditionMeans; 4], AnalysisError> {
    let mut out = [ConditionMeans {
        mean_abs: 0.0,
        mean_signed: 0.0,
        trials: 0,
    }; 4];
    for (slot, condition) in out.iter_mut().zip(Condition::SUMMARY_ORDER) {
        let errors: Vec<f64> = testing_trials(log, condition).map(|t| t.signed_error).collect();
        if errors.is_empty() {
            return Err(AnalysisError::MissingCondition {
                participant: log.header.participant_id.clone(),
                condition,
            });
        }
        let n = errors.len() as f64;
        *slot = ConditionMeans {
            mean_abs: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
            mean_signed: errors.iter().sum::<f64>() / n,
            trials: errors.len(),
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSummary {
    pub condition: Condition,
    /// Participants.
    pub n: usize,
    pub mean_abs: f64,
    pub se_abs: f64,
    pub mean_signed: f64,
    pub se_signed: f64,
}

/// Across-participant mean and SE of the per-participant condition means,
/// in the order nH V, H V, nH nV, H nV.
pub fn summarize_conditions(logs: &[SessionLog]) -> Result<Vec<ConditionSummary>, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::NoLogs);
    }
    let per: Vec<[ConditionMeans; 4]> = logs.iter().map(participant_condition_means).collect::<Result<_, _>>()?;
    Ok(Condition::SUMMARY_ORDER
        .iter()
        .enumerate()
        .map(|(k, &condition)| {
            let abs: Vec<f64> = per.iter().map(|p| p[k].mean_abs).collect();
            let signed: Vec<f64> = per.iter().map(|p| p[k].mean_signed).collect();
            let (mean_abs, se_abs) = mean_se(&abs);
            let (mean_signed, se_signed) = mean_se(&signed);
            ConditionSummary {
                condition,
                n: logs.len(),
                mean_abs,
                se_abs,
                mean_signed,
                se_signed,
            }
        })
        .collect())
}

fn summary_index(condition: Condition) -> usize {
    Condition::SUMMARY_ORDER
        .iter()
        .position(|&c| c == condition)
        .expect("every condition is in the summary order")
}

/// The statistical tests run on testing-phase |error|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStatistics {
    /// Haptic × visual.
    pub two_way: Anova2x2,
    /// Haptic effect without the arm on screen.
    pub haptic_nv: OneWay,
    /// Haptic effect with the arm on screen.
    pub haptic_v: OneWay,
    /// H nV vs nH nV, Bonferroni over the two visual levels.
    pub posthoc_nv: PairedTest,
    /// H V vs nH V.
    pub posthoc_v: PairedTest,
}

pub fn error_statistics(logs: &[SessionLog]) -> Result<ErrorStatistics, AnalysisError> {
    let per: Vec<[ConditionMeans; 4]> = logs.iter().map(participant_condition_means).collect::<Result<_, _>>()?;
    let at = |p: &[ConditionMeans; 4], c: Condition| p[summary_index(c)].mean_abs;
    let table: Vec<[[f64; 2]; 2]> = per
        .iter()
        .map(|p| {
            [
                [at(p, Condition::H_V), at(p, Condition::H_NV)],
                [at(p, Condition::NH_V), at(p, Condition::NH_NV)],
            ]
        })
        .collect();
    let nv: Vec<[f64; 2]> = per.iter().map(|p| [at(p, Condition::H_NV), at(p, Condition::NH_NV)]).collect();
    let v: Vec<[f64; 2]> = per.iter().map(|p| [at(p, Condition::H_V), at(p, Condition::NH_V)]).collect();
    let pairs = |rows: &[[f64; 2]]| rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>();
    Ok(ErrorStatistics {
        two_way: rm_anova_2x2(&table)?,
        haptic_nv: one_way_rm_anova(&nv)?,
        haptic_v: one_way_rm_anova(&v)?,
        posthoc_nv: paired_t_bonferroni(&pairs(&nv), 2)?,
        posthoc_v: paired_t_bonferroni(&pairs(&v), 2)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleErrorPoint {
    pub condition: Condition,
    pub target: AngleDeg,
    /// Trials pooled across participants.
    pub n: usize,
    pub mean_abs: f64,
    pub se_abs: f64,
    pub mean_signed: f64,
}

/// Testing-phase error by condition and target angle, trials pooled.
pub fn error_by_angle(logs: &[SessionLog]) -> Vec<AngleErrorPoint> {
    let mut out = Vec::new();
    for condition in Condition::SUMMARY_ORDER {
        for target in canonical_angles() {
            let errors: Vec<f64> = logs
                .iter()
                .flat_map(|l| testing_trials(l, condition))
                .filter(|t| t.target == target)
                .map(|t| t.signed_error)
                .collect();
            if errors.is_empty() {
                continue;
            }
            let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
            let (mean_abs, se_abs) = mean_se(&abs);
            out.push(AngleErrorPoint {
                condition,
                target,
                n: errors.len(),
                mean_abs,
                se_abs,
                mean_signed: mean_se(&errors).0,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceFit {
    Linear {
        /// N/deg
        slope: f64,
        /// N at 0°
        intercept: f64,
        r_squared: f64,
        n: usize,
    },
    /// The device was parked, so force does not track the angle.
    NotApplicable { mean_force: f64, n: usize },
}

/// Least-squares `y = slope·x + intercept` with R². R² is 1 when `y` is
/// constant and fitted exactly.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Steady-state force against target angle over the testing trials of
/// `condition`.
pub fn force_angle_regression(logs: &[SessionLog], condition: Condition) -> Result<ForceFit, AnalysisError> {
    let trials: Vec<&TrialRecord> = logs.iter().flat_map(|l| testing_trials(l, condition)).collect();
    let xs: Vec<f64> = trials.iter().map(|t| t.target.get()).collect();
    let ys: Vec<f64> = trials.iter().map(|t| t.steady_force).collect();
    if !condition.has_haptic() {
        if ys.is_empty() {
            return Err(AnalysisError::TooFewAngles { condition, found: 0 });
        }
        return Ok(ForceFit::NotApplicable {
            mean_force: ys.iter().sum::<f64>() / ys.len() as f64,
            n: ys.len(),
        });
    }
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(AnalysisError::TooFewAngles {
            condition,
            found: distinct.len(),
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ForceFit::Linear {
        slope,
        intercept,
        r_squared,
        n: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcePoint {
    pub condition: Condition,
    pub target: AngleDeg,
    pub n: usize,
    pub mean_force: f64,
    pub se_force: f64,
}

pub fn force_by_angle(logs: &[SessionLog]) -> Vec<ForcePoint> {
    let mut out = Vec::new();
    for condition in Condition::SUMMARY_ORDER {
        for target in canonical_angles() {
            let forces: Vec<f64> = logs
                .iter()
                .flat_map(|l| testing_trials(l, condition))
                .filter(|t| t.target == target)
                .map(|t| t.steady_force)
                .collect();
            if forces.is_empty() {
                continue;
            }
            let (mean_force, se_force) = mean_se(&forces);
            out.push(ForcePoint {
                condition,
                target,
                n: forces.len(),
                mean_force,
                se_force,
            });
        }
    }
    out
}

pub const PRACTICE_BLOCKS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningPoint {
    /// 1-based.
    pub block: u32,
    pub kind: BlockKind,
    pub n: usize,
    pub mean_abs: f64,
    pub se_abs: f64,
    /// Targets completed per minute of matching time.
    pub mean_speed: f64,
}

/// Per-participant block mean |error| and speed, then averaged across
/// participants.
pub fn learning_curve(logs: &[SessionLog]) -> Result<Vec<LearningPoint>, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::NoLogs);
    }
    let kinds = [BlockKind::Descending, BlockKind::MixedBlock2, BlockKind::Random, BlockKind::Random];
    let mut out = Vec::new();
    for b in 0..PRACTICE_BLOCKS {
        let mut errors = Vec::new();
        let mut speeds = Vec::new();
        for log in logs {
            let trials: Vec<&TrialRecord> = log
                .trials()
                .iter()
                .filter(|t| t.phase == PhaseKind::Practice && t.block_index == b)
                .collect();
            if trials.is_empty() {
                return Err(AnalysisError::MissingBlock {
                    participant: log.header.participant_id.clone(),
                    block: b + 1,
                });
            }
            let n = trials.len() as f64;
            errors.push(trials.iter().map(|t| t.abs_error()).sum::<f64>() / n);
            let minutes = trials.iter().map(|t| t.duration).sum::<f64>() / 60.0;
            speeds.push(block_speed(trials.len(), minutes));
        }
        let (mean_abs, se_abs) = mean_se(&errors);
        out.push(LearningPoint {
            block: b + 1,
            kind: kinds[b as usize],
            n: logs.len(),
            mean_abs,
            se_abs,
            mean_speed: speeds.iter().sum::<f64>() / speeds.len() as f64,
        });
    }
    Ok(out)
}

/// Targets per minute.
pub fn block_speed(targets: usize, minutes: f64) -> f64 {
    targets as f64 / minutes
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub participant_id: String,
    pub min_pos: f64,
    pub max_pos: f64,
    pub detection_force: f64,
    pub comfort_force: f64,
    pub repetitions: u32,
}

pub fn calibration_rows(logs: &[SessionLog]) -> Result<Vec<CalibrationRow>, AnalysisError> {
    logs.iter()
        .map(|log| {
            let c = log.calibration().ok_or_else(|| AnalysisError::MissingCalibration {
                participant: log.header.participant_id.clone(),
            })?;
            Ok(CalibrationRow {
                participant_id: log.header.participant_id.clone(),
                min_pos: c.min_pos.get(),
                max_pos: c.max_pos.get(),
                detection_force: c.min_force.get(),
                comfort_force: c.max_force.get(),
                repetitions: c.repetitions,
            })
        })
        .collect()
}
