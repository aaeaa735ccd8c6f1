//! Experiment analysis: per-condition accuracy, confusion matrices, selection
//! times and the repeated-measures ANOVA.
//!
//! Standard deviations use the `n − 1` denominator. Trials that ended without
//! a selection count as errors.

mod anova;
mod special;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hand::PointingMode;
use crate::scene::ObjectId;

pub use anova::{rm_anova2, AnovaResult, CellTable, Effect, Stratum};
pub use special::{beta_inc, f_survival, ln_beta, ln_gamma};
pub use table::{read_trials, read_trials_path, write_trials, write_trials_path, CsvError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("unbalanced design: participant {participant} has no trials in condition {condition}")]
    Unbalanced { participant: u32, condition: Condition },
    #[error("no trials")]
    Empty,
    #[error("need at least 2 participants, got {0}")]
    TooFewSubjects(usize),
    #[error("non-finite value in table")]
    NonFinite,
    #[error("invalid degrees of freedom ({df1}, {df2})")]
    DegreesOfFreedom { df1: f64, df2: f64 },
    #[error("invalid F statistic {0}")]
    FStatistic(f64),
}

/// One cell of the 2×2 design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub mode: PointingMode,
    pub feedback: bool,
}

impl Condition {
    /// Reporting order: Finger/On, Wrist/On, Finger/Off, Wrist/Off.
    pub const ALL: [Condition; 4] = [
        Condition { mode: PointingMode::FingerLine, feedback: true },
        Condition { mode: PointingMode::WristLine, feedback: true },
        Condition { mode: PointingMode::FingerLine, feedback: false },
        Condition { mode: PointingMode::WristLine, feedback: false },
    ];

    pub fn new(mode: PointingMode, feedback: bool) -> Self {
        Self { mode, feedback }
    }

    /// Position in the ANOVA cell array: `[mode][feedback]`, finger and on first.
    pub fn cell(&self) -> (usize, usize) {
        (
            match self.mode {
                PointingMode::FingerLine => 0,
                PointingMode::WristLine => 1,
            },
            usize::from(!self.feedback),
        )
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = match self.mode {
            PointingMode::FingerLine => "Finger",
            PointingMode::WristLine => "Wrist",
        };
        write!(f, "{mode}/{}", if self.feedback { "On" } else { "Off" })
    }
}

/// One selection attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: u32,
    pub condition: Condition,
    pub target: ObjectId,
    pub selected: Option<ObjectId>,
    /// Seconds from instruction to selection.
    pub selection_time: f64,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.selected == Some(self.target)
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// `None` with fewer than two values.
    pub sd: Option<f64>,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Self { mean, sd, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    #[serde(flatten)]
    pub stats: MeanSd,
}

fn participants(records: &[TrialRecord]) -> BTreeSet<u32> {
    records.iter().map(|r| r.participant).collect()
}

/// Per-participant mean of `value` in each condition, checking balance.
fn per_participant<F>(records: &[TrialRecord], value: F) -> Result<BTreeMap<(u32, Condition), f64>, StatsError>
where
    F: Fn(&TrialRecord) -> f64,
{
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut acc: BTreeMap<(u32, Condition), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry((r.participant, r.condition)).or_default();
        e.0 += value(r);
        e.1 += 1;
    }
    for p in participants(records) {
        for c in Condition::ALL {
            if !acc.contains_key(&(p, c)) {
                return Err(StatsError::Unbalanced { participant: p, condition: c });
            }
        }
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

fn summarize(per: &BTreeMap<(u32, Condition), f64>) -> Vec<ConditionSummary> {
    Condition::ALL
        .iter()
        .map(|&c| {
            let v: Vec<f64> = per.iter().filter(|((_, k), _)| *k == c).map(|(_, v)| *v).collect();
            ConditionSummary { condition: c, stats: MeanSd::of(&v).expect("balanced") }
        })
        .collect()
}

/// Per-participant accuracy in each condition, keyed by `(participant, condition)`.
pub fn participant_accuracy(records: &[TrialRecord]) -> Result<BTreeMap<(u32, Condition), f64>, StatsError> {
    per_participant(records, |r| if r.correct() { 1.0 } else { 0.0 })
}

/// Mean and sd across participants of per-participant accuracy (fractions).
pub fn accuracy_table(records: &[TrialRecord]) -> Result<Vec<ConditionSummary>, StatsError> {
    Ok(summarize(&participant_accuracy(records)?))
}

/// Mean and sd across participants of per-participant mean selection time.
pub fn selection_time_summary(records: &[TrialRecord]) -> Result<Vec<ConditionSummary>, StatsError> {
    Ok(summarize(&per_participant(records, |r| r.selection_time)?))
}

/// Participants × 2 × 2 accuracy table for [`rm_anova2`]. Factor A is the
/// pointing line, factor B the feedback.
pub fn accuracy_cells(records: &[TrialRecord]) -> Result<CellTable, StatsError> {
    let per = participant_accuracy(records)?;
    let cells = participants(records)
        .into_iter()
        .map(|p| {
            let mut c = [[0.0; 2]; 2];
            for cond in Condition::ALL {
                let (a, b) = cond.cell();
                c[a][b] = per[&(p, cond)];
            }
            c
        })
        .collect();
    Ok(CellTable { cells })
}

/// Target × selected counts. Rows and columns follow `ids`; `none` counts
/// trials without a selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub ids: Vec<ObjectId>,
    pub counts: Vec<Vec<u64>>,
    pub none: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.none.iter().sum::<u64>()
    }

    pub fn correct(&self) -> u64 {
        (0..self.ids.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Trace over total, `None` when empty.
    pub fn accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| self.correct() as f64 / t as f64)
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum::<u64>() + self.none[row]
    }

    /// Most frequent wrong object for target row `row`, with every id tied
    /// for the maximum. Empty when the row has no wrong object selections.
    pub fn modal_confusions(&self, row: usize) -> Vec<ObjectId> {
        let max = (0..self.ids.len()).filter(|&j| j != row).map(|j| self.counts[row][j]).max().unwrap_or(0);
        if max == 0 {
            return Vec::new();
        }
        (0..self.ids.len()).filter(|&j| j != row && self.counts[row][j] == max).map(|j| self.ids[j]).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("target\\selected");
        for id in &self.ids {
            let _ = write!(s, " {:>6}", id.0);
        }
        s.push_str("   none\n");
        for (i, id) in self.ids.iter().enumerate() {
            let _ = write!(s, "{:>15}", id.0);
            for c in &self.counts[i] {
                let _ = write!(s, " {c:>6}");
            }
            let _ = writeln!(s, " {:>6}", self.none[i]);
        }
        s
    }
}

/// Confusion matrix over `records`, optionally restricted to one condition.
/// Ids are the union of targets and selections, ascending.
pub fn confusion(records: &[TrialRecord], filter: Option<Condition>) -> ConfusionMatrix {
    let rs: Vec<&TrialRecord> = records.iter().filter(|r| filter.is_none_or(|c| r.condition == c)).collect();
    let ids: Vec<ObjectId> = rs
        .iter()
        .flat_map(|r| std::iter::once(r.target).chain(r.selected))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |id: ObjectId| ids.binary_search(&id).expect("id collected");
    let mut counts = vec![vec![0u64; ids.len()]; ids.len()];
    let mut none = vec![0u64; ids.len()];
    for r in rs {
        let i = pos(r.target);
        match r.selected {
            Some(s) => counts[i][pos(s)] += 1,
            None => none[i] += 1,
        }
    }
    ConfusionMatrix { ids, counts, none }
}

fn pct(x: f64) -> String {
    format!("{:.1} %", 100.0 * x)
}

fn mode_name(m: PointingMode) -> &'static str {
    match m {
        PointingMode::FingerLine => "Finger line",
        PointingMode::WristLine => "Wrist line",
    }
}

/// Aligned text table of per-condition accuracy in percent.
pub fn format_accuracy_table(rows: &[ConditionSummary]) -> String {
    let mut s = format!("{:<13} {:<9} {:>8}   {:>7}\n", "Pointing line", "Feedback", "Mean", "SD");
    for r in rows {
        let sd = r.stats.sd.map(pct).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<13} {:<9} {:>8} ± {:>7}",
            mode_name(r.condition.mode),
            if r.condition.feedback { "On" } else { "Off" },
            pct(r.stats.mean),
            sd
        );
    }
    s
}

pub fn format_time_table(rows: &[ConditionSummary]) -> String {
    let mut s = format!("{:<13} {:<9} {:>8}   {:>7}\n", "Pointing line", "Feedback", "Mean s", "SD s");
    for r in rows {
        let sd = r.stats.sd.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<13} {:<9} {:>8.2} ± {:>7}",
            mode_name(r.condition.mode),
            if r.condition.feedback { "On" } else { "Off" },
            r.stats.mean,
            sd
        );
    }
    s
}

pub fn format_anova(r: &AnovaResult) -> String {
    let mut s = format!("{:<20} {:>12} {:>4} {:>12} {:>10} {:>10}\n", "Source", "SS", "df", "MS", "F", "p");
    let fmt_opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "n/a".into());
    let rows: [(&str, &Effect, &Stratum); 3] = [
        ("Pointing line", &r.a, &r.a_s),
        ("Feedback", &r.b, &r.b_s),
        ("Line x Feedback", &r.ab, &r.ab_s),
    ];
    for (name, e, err) in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>12.6} {:>4} {:>12.6} {:>10} {:>10}",
            name,
            e.ss,
            e.df,
            e.ms,
            fmt_opt(e.f, 3),
            fmt_opt(e.p, 4)
        );
        let _ = writeln!(s, "{:<20} {:>12.6} {:>4} {:>12.6}", "  Error", err.ss, err.df, err.ms);
    }
    s
}

/// Everything `analyze` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub participants: usize,
    pub trials: usize,
    pub accuracy: Vec<ConditionSummary>,
    pub selection_time: Vec<ConditionSummary>,
    pub overall_accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub anova: AnovaResult,
}

pub fn analyze(records: &[TrialRecord]) -> Result<AnalysisReport, StatsError> {
    let accuracy = accuracy_table(records)?;
    let selection_time = selection_time_summary(records)?;
    let confusion = confusion(records, None);
    let anova = rm_anova2(&accuracy_cells(records)?)?;
    Ok(AnalysisReport {
        participants: participants(records).len(),
        trials: records.len(),
        accuracy,
        selection_time,
        overall_accuracy: confusion.accuracy(),
        confusion,
        anova,
    })
}

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} participants, {} trials\n\nAccuracy\n", self.participants, self.trials);
        s.push_str(&format_accuracy_table(&self.accuracy));
        s.push_str("\nSelection time\n");
        s.push_str(&format_time_table(&self.selection_time));
        s.push_str("\nConfusion matrix (all conditions)\n");
        s.push_str(&self.confusion.to_text());
        if let Some(a) = self.overall_accuracy {
            let _ = writeln!(s, "overall accuracy {}", pct(a));
        }
        s.push_str("\nRepeated-measures ANOVA on accuracy\n");
        s.push_str(&format_anova(&self.anova));
        s
    }
}

/// Bootstrap support for "`better` scores at least as high as `worse`".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingSupport {
    pub better: Condition,
    pub worse: Condition,
    /// Share of resamples in which the ordering held.
    pub frequency: f64,
}

/// The four orderings reported for the study: finger over wrist with and
/// without feedback, feedback over none for each line.
pub const EXPECTED_ORDERINGS: [(Condition, Condition); 4] = [
    (Condition::ALL[0], Condition::ALL[1]),
    (Condition::ALL[2], Condition::ALL[3]),
    (Condition::ALL[0], Condition::ALL[2]),
    (Condition::ALL[1], Condition::ALL[3]),
];

/// Resample participants with replacement `reps` times and count how often
/// each ordering of mean accuracies holds.
pub fn bootstrap_orderings(
    records: &[TrialRecord],
    orderings: &[(Condition, Condition)],
    reps: u32,
    seed: u64,
) -> Result<Vec<OrderingSupport>, StatsError> {
    let per = participant_accuracy(records)?;
    let ids: Vec<u32> = participants(records).into_iter().collect();
    let n = ids.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u32; orderings.len()];
    let mut sample = vec![0u32; n];
    for _ in 0..reps {
        for s in sample.iter_mut() {
            *s = ids[rng.random_range(0..n)];
        }
        let mean = |c: Condition| sample.iter().map(|&p| per[&(p, c)]).sum::<f64>() / n as f64;
        for (h, &(better, worse)) in hits.iter_mut().zip(orderings) {
            if mean(better) >= mean(worse) {
                *h += 1;
            }
        }
    }
    Ok(orderings
        .iter()
        .zip(hits)
        .map(|(&(better, worse), h)| OrderingSupport { better, worse, frequency: f64::from(h) / f64::from(reps.max(1)) })
        .collect())
}
