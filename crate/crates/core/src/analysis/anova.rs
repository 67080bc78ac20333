//! Repeated-measures ANOVA and paired t-tests.

use super::special::{f_sf, t_two_sided};
use super::StatsError;

/// Error sums of squares at or below this fraction of the total count as
/// exactly zero.
const ZERO_SS_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectResult {
    pub f: f64,
    pub df_effect: f64,
    pub df_error: f64,
    pub p: f64,
    /// Classical η²: effect sum of squares over the total sum of squares.
    pub eta_squared: f64,
    pub ss_effect: f64,
    pub ss_error: f64,
}

fn effect(ss_effect: f64, df_effect: f64, ss_error: f64, df_error: f64, ss_total: f64) -> EffectResult {
    let scale = ZERO_SS_REL * ss_total.max(f64::MIN_POSITIVE);
    let (f, p) = if ss_error <= scale {
        if ss_effect <= scale {
            (0.0, 1.0)
        } else {
            // perfectly consistent effect across participants
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ss_effect / df_effect) / (ss_error / df_error);
        (f, f_sf(f, df_effect, df_error))
    };
    EffectResult {
        f,
        df_effect,
        df_error,
        p,
        eta_squared: if ss_total > 0.0 { ss_effect / ss_total } else { 0.0 },
        ss_effect,
        ss_error,
    }
}

/// Sum-of-squares decomposition of a 2×2 within-subjects design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ss2x2 {
    pub total: f64,
    pub subjects: f64,
    pub a: f64,
    pub b: f64,
    pub ab: f64,
    pub a_error: f64,
    pub b_error: f64,
    pub ab_error: f64,
}

impl Ss2x2 {
    pub fn components_sum(&self) -> f64 {
        self.subjects + self.a + self.b + self.ab + self.a_error + self.b_error + self.ab_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anova2x2 {
    pub n: usize,
    /// First factor (haptic feedback in the experiment tables).
    pub a: EffectResult,
    /// Second factor (visual feedback).
    pub b: EffectResult,
    pub interaction: EffectResult,
    pub ss: Ss2x2,
}

fn check_finite(rows: impl Iterator<Item = f64>) -> Result<(), StatsError> {
    for (i, v) in rows.enumerate() {
        if !v.is_finite() {
            return Err(StatsError::MissingCell { index: i });
        }
    }
    Ok(())
}

/// Two-way repeated-measures ANOVA. `table[s][i][j]` is participant `s` at
/// level `i` of the first factor and level `j` of the second.
pub fn rm_anova_2x2(table: &[[[f64; 2]; 2]]) -> Result<Anova2x2, StatsError> {
    let n = table.len();
    if n < 2 {
        return Err(StatsError::TooFewParticipants { n, min: 2 });
    }
    check_finite(table.iter().flat_map(|r| r.iter().flatten().copied()))?;
    let nf = n as f64;

    let grand = table.iter().flat_map(|r| r.iter().flatten()).sum::<f64>() / (4.0 * nf);
    let subj: Vec<f64> = table.iter().map(|r| r.iter().flatten().sum::<f64>() / 4.0).collect();
    let mut cell = [[0.0; 2]; 2];
    for r in table {
        for i in 0..2 {
            for j in 0..2 {
                cell[i][j] += r[i][j] / nf;
            }
        }
    }
    let a_mean = [(cell[0][0] + cell[0][1]) / 2.0, (cell[1][0] + cell[1][1]) / 2.0];
    let b_mean = [(cell[0][0] + cell[1][0]) / 2.0, (cell[0][1] + cell[1][1]) / 2.0];

    let mut ss = Ss2x2 {
        total: 0.0,
        subjects: 0.0,
        a: 0.0,
        b: 0.0,
        ab: 0.0,
        a_error: 0.0,
        b_error: 0.0,
        ab_error: 0.0,
    };
    for i in 0..2 {
        ss.a += 2.0 * nf * (a_mean[i] - grand).powi(2);
        ss.b += 2.0 * nf * (b_mean[i] - grand).powi(2);
        for j in 0..2 {
            ss.ab += nf * (cell[i][j] - a_mean[i] - b_mean[j] + grand).powi(2);
        }
    }
    for (s, r) in table.iter().enumerate() {
        ss.subjects += 4.0 * (subj[s] - grand).powi(2);
        let sa = [(r[0][0] + r[0][1]) / 2.0, (r[1][0] + r[1][1]) / 2.0];
        let sb = [(r[0][0] + r[1][0]) / 2.0, (r[0][1] + r[1][1]) / 2.0];
        for i in 0..2 {
            ss.a_error += 2.0 * (sa[i] - subj[s] - a_mean[i] + grand).powi(2);
            ss.b_error += 2.0 * (sb[i] - subj[s] - b_mean[i] + grand).powi(2);
            for j in 0..2 {
                let x = r[i][j];
                ss.total += (x - grand).powi(2);
                ss.ab_error +=
                    (x - sa[i] - sb[j] - cell[i][j] + subj[s] + a_mean[i] + b_mean[j] - grand).powi(2);
            }
        }
    }

    let df_err = nf - 1.0;
    Ok(Anova2x2 {
        n,
        a: effect(ss.a, 1.0, ss.a_error, df_err, ss.total),
        b: effect(ss.b, 1.0, ss.b_error, df_err, ss.total),
        interaction: effect(ss.ab, 1.0, ss.ab_error, df_err, ss.total),
        ss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneWay {
    pub n: usize,
    pub levels: usize,
    pub effect: EffectResult,
    pub ss_total: f64,
    pub ss_subjects: f64,
}

/// One-way repeated-measures ANOVA. Each row is one participant with one
/// value per level.
pub fn one_way_rm_anova<R: AsRef<[f64]>>(table: &[R]) -> Result<OneWay, StatsError> {
    let n = table.len();
    if n < 2 {
        return Err(StatsError::TooFewParticipants { n, min: 2 });
    }
    let k = table[0].as_ref().len();
    if k < 2 {
        return Err(StatsError::TooFewLevels { k });
    }
    for (row, r) in table.iter().enumerate() {
        if r.as_ref().len() != k {
            return Err(StatsError::Unbalanced {
                row,
                expected: k,
                found: r.as_ref().len(),
            });
        }
    }
    check_finite(table.iter().flat_map(|r| r.as_ref().iter().copied()))?;
    let (nf, kf) = (n as f64, k as f64);

    let grand = table.iter().flat_map(|r| r.as_ref().iter()).sum::<f64>() / (nf * kf);
    let level: Vec<f64> = (0..k)
        .map(|j| table.iter().map(|r| r.as_ref()[j]).sum::<f64>() / nf)
        .collect();
    let mut ss_total = 0.0;
    let mut ss_subjects = 0.0;
    let mut ss_error = 0.0;
    for r in table {
        let r = r.as_ref();
        let m = r.iter().sum::<f64>() / kf;
        ss_subjects += kf * (m - grand).powi(2);
        for j in 0..k {
            ss_total += (r[j] - grand).powi(2);
            ss_error += (r[j] - m - level[j] + grand).powi(2);
        }
    }
    let ss_effect: f64 = level.iter().map(|l| nf * (l - grand).powi(2)).sum();
    Ok(OneWay {
        n,
        levels: k,
        effect: effect(ss_effect, kf - 1.0, ss_error, (kf - 1.0) * (nf - 1.0), ss_total),
        ss_total,
        ss_subjects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    /// The differences have zero variance, so t is undefined. `t` is then 0
    /// (all differences zero) or ±∞.
    pub degenerate: bool,
}

/// Paired t-test on `(a, b)` pairs with Bonferroni correction for `m`
/// comparisons.
pub fn paired_t_bonferroni(pairs: &[(f64, f64)], m: usize) -> Result<PairedTest, StatsError> {
    if m == 0 {
        return Err(StatsError::NoComparisons);
    }
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewParticipants { n, min: 2 });
    }
    check_finite(pairs.iter().flat_map(|&(a, b)| [a, b]))?;
    let nf = n as f64;
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    let scale = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let degenerate = var <= (ZERO_SS_REL * scale).powi(2);
    let (t, p_raw) = if degenerate {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / nf).sqrt();
        (t, t_two_sided(t, df))
    };
    Ok(PairedTest {
        n,
        mean_diff: mean,
        t,
        df,
        p_raw,
        p_adjusted: (m as f64 * p_raw).min(1.0),
        degenerate,
    })
}
