//! One-vs-rest ROC and precision–recall evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Relation;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("undefined AUC: ground truth has a single class")]
    UndefinedAuc,
    #[error("no positive examples")]
    NoPositives,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("recall floor {0} is unreachable")]
    UnreachableRecall(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn validate(scores: &[f64], positives: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != positives.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: positives.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore);
    }
    Ok(())
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Cumulative (score, true positives, false positives) at each distinct
/// threshold, from the highest score down.
fn threshold_counts(scores: &[f64], positives: &[bool]) -> Vec<(f64, usize, usize)> {
    let order = descending(scores);
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if positives[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

/// ROC AUC as the Mann–Whitney statistic `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`,
/// computed from midranks.
pub fn auc(scores: &[f64], positives: &[bool]) -> Result<f64, MetricsError> {
    validate(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..=end (1-based start+1..=end+1) share their mean.
        let midrank = (start + end) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[start..=end].iter().filter(|&&i| positives[i]).count();
        rank_sum += midrank * pos_in_tie as f64;
        start = end + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending; the first entry is `+inf` for the (0, 0) corner.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Trapezoidal area under the curve.
    pub auc: f64,
}

pub fn roc_curve(scores: &[f64], positives: &[bool]) -> Result<RocCurve, MetricsError> {
    validate(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::UndefinedAuc);
    }
    let mut thresholds = vec![f64::INFINITY];
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    for (t, tp, fp) in threshold_counts(scores, positives) {
        thresholds.push(t);
        fpr.push(fp as f64 / n_neg as f64);
        tpr.push(tp as f64 / n_pos as f64);
    }
    let auc = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) / 2.0)
        .sum();
    Ok(RocCurve {
        thresholds,
        fpr,
        tpr,
        auc,
    })
}

/// Unweighted mean of the per-class AUCs.
pub fn macro_average_auc(per_class: [f64; 3]) -> f64 {
    per_class.iter().sum::<f64>() / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Starts with the `(recall 0, precision 1)` anchor at threshold `+inf`,
    /// then one point per distinct score, highest threshold first.
    pub points: Vec<PrPoint>,
    /// `Σ (rᵢ - rᵢ₋₁) pᵢ` over descending thresholds.
    pub ap: f64,
}

pub fn pr_curve(scores: &[f64], positives: &[bool]) -> Result<PrCurve, MetricsError> {
    validate(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut points = vec![PrPoint {
        threshold: f64::INFINITY,
        recall: 0.0,
        precision: 1.0,
    }];
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (t, tp, fp) in threshold_counts(scores, positives) {
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold: t,
            recall,
            precision,
        });
    }
    Ok(PrCurve { points, ap })
}

/// Precision at the highest threshold whose recall reaches `recall_floor`.
/// No interpolation between thresholds.
pub fn ppv_at_recall(scores: &[f64], positives: &[bool], recall_floor: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&recall_floor) {
        return Err(MetricsError::UnreachableRecall(recall_floor));
    }
    let curve = pr_curve(scores, positives)?;
    curve.points[1..]
        .iter()
        .find(|p| p.recall >= recall_floor)
        .map(|p| p.precision)
        .ok_or(MetricsError::UnreachableRecall(recall_floor))
}

/// One train → test evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub train_set: String,
    pub test_set: String,
    pub relation: Relation,
    pub mcd: f64,
    pub auc_yes: f64,
    pub auc_no: f64,
    pub auc_maybe: f64,
    pub ppv_yes: f64,
    pub ppv_no: f64,
    pub ppv_maybe: f64,
    pub macro_auc: f64,
}

impl PerformanceRecord {
    pub fn aucs(&self) -> [f64; 3] {
        [self.auc_yes, self.auc_no, self.auc_maybe]
    }

    pub fn ppvs(&self) -> [f64; 3] {
        [self.ppv_yes, self.ppv_no, self.ppv_maybe]
    }
}

pub const PERFORMANCE_HEADER: &str =
    "train_set,test_set,relation,mcd,auc_yes,auc_no,auc_maybe,ppv_yes,ppv_no,ppv_maybe,macro_auc";

pub fn write_performance_csv(mut w: impl Write, records: &[PerformanceRecord]) -> Result<(), MetricsError> {
    writeln!(w, "{PERFORMANCE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.train_set,
            r.test_set,
            r.relation,
            r.mcd,
            r.auc_yes,
            r.auc_no,
            r.auc_maybe,
            r.ppv_yes,
            r.ppv_no,
            r.ppv_maybe,
            r.macro_auc
        )?;
    }
    Ok(())
}
