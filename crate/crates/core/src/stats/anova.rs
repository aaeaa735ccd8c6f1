//! Two-factor fully within-subject ANOVA for 2×2 designs.
//!
//! With two levels per factor each effect has one degree of freedom, so each
//! effect reduces to a per-subject contrast: the effect SS is `n·mean(d)²`
//! and its error stratum (effect × subject) is `Σ(dᵢ − mean(d))²` on `n − 1`
//! degrees of freedom. Sphericity holds trivially with one degree of freedom,
//! so no Greenhouse–Geisser correction is applied.

use serde::{Deserialize, Serialize};

use super::special::f_survival;
use super::StatsError;

/// Relative size below which an error stratum counts as zero variance.
const ZERO_VARIANCE_RTOL: f64 = 1e-12;

/// Per-subject scores, `cells[i][a][b]` for subject `i`, level `a` of factor
/// A and level `b` of factor B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub cells: Vec<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub ss: f64,
    pub df: f64,
    pub ms: f64,
    /// `None` when the error stratum has zero variance.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub ss: f64,
    pub df: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub subjects: usize,
    /// Factor A main effect, tested against A×S.
    pub a: Effect,
    /// Factor B main effect, tested against B×S.
    pub b: Effect,
    pub ab: Effect,
    pub a_s: Stratum,
    pub b_s: Stratum,
    pub ab_s: Stratum,
    pub ss_subjects: f64,
    pub ss_total: f64,
    pub grand_mean: f64,
}

impl AnovaResult {
    /// Sum of every effect and error stratum, which equals `ss_total`.
    pub fn ss_parts(&self) -> f64 {
        self.a.ss + self.b.ss + self.ab.ss + self.a_s.ss + self.b_s.ss + self.ab_s.ss + self.ss_subjects
    }
}

fn contrast(cells: &[[[f64; 2]; 2]], f: impl Fn(&[[f64; 2]; 2]) -> f64, ss_total: f64) -> Result<(Effect, Stratum), StatsError> {
    let n = cells.len() as f64;
    let d: Vec<f64> = cells.iter().map(f).collect();
    let mean = d.iter().sum::<f64>() / n;
    let ss = n * mean * mean;
    let ss_err: f64 = d.iter().map(|x| (x - mean).powi(2)).sum();
    let df_err = n - 1.0;
    let ms_err = ss_err / df_err;
    let err = Stratum { ss: ss_err, df: df_err, ms: ms_err };
    let (f, p) = if ss_err <= ZERO_VARIANCE_RTOL * ss_total.max(f64::MIN_POSITIVE) {
        (None, None)
    } else {
        let f = ss / ms_err;
        (Some(f), Some(f_survival(f, 1.0, df_err)?))
    };
    Ok((Effect { ss, df: 1.0, ms: ss, f, p }, err))
}

pub fn rm_anova2(table: &CellTable) -> Result<AnovaResult, StatsError> {
    let cells = &table.cells;
    let n = cells.len();
    if n < 2 {
        return Err(StatsError::TooFewSubjects(n));
    }
    if cells.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let grand = cells.iter().flatten().flatten().sum::<f64>() / (4 * n) as f64;
    let ss_total: f64 = cells.iter().flatten().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_subjects: f64 = cells
        .iter()
        .map(|c| {
            let m = c.iter().flatten().sum::<f64>() / 4.0;
            4.0 * (m - grand).powi(2)
        })
        .sum();

    let (a, a_s) = contrast(cells, |c| (c[0][0] + c[0][1] - c[1][0] - c[1][1]) / 2.0, ss_total)?;
    let (b, b_s) = contrast(cells, |c| (c[0][0] + c[1][0] - c[0][1] - c[1][1]) / 2.0, ss_total)?;
    let (ab, ab_s) = contrast(cells, |c| (c[0][0] - c[0][1] - c[1][0] + c[1][1]) / 2.0, ss_total)?;
    Ok(AnovaResult { subjects: n, a, b, ab, a_s, b_s, ab_s, ss_subjects, ss_total, grand_mean: grand })
}
