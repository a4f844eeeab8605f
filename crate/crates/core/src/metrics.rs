//! Confusion counts, ROC construction from raw scores, and trapezoidal AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Decision, Label};

/// Contingency table with signal as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn positives(&self) -> u64 {
        self.true_positives + self.false_negatives
    }

    pub fn negatives(&self) -> u64 {
        self.false_positives + self.true_negatives
    }

    /// TP / (TP + FN); 0 when no positives were evaluated.
    pub fn tpr(&self) -> f64 {
        ratio(self.true_positives, self.positives())
    }

    /// FP / (FP + TN); 0 when no negatives were evaluated.
    pub fn fpr(&self) -> f64 {
        ratio(self.false_positives, self.negatives())
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.true_positives + self.true_negatives, self.total())
    }

    pub fn record(&mut self, prediction: Decision, label: Label) -> Result<()> {
        match (prediction, label) {
            (Decision::Signal, Label::Signal) => self.true_positives += 1,
            (Decision::Signal, Label::Noise) => self.false_positives += 1,
            (Decision::Noise, Label::Noise) => self.true_negatives += 1,
            (Decision::Noise, Label::Signal) => self.false_negatives += 1,
            (_, Label::Unlabeled) => {
                return Err(Error::Validation(
                    "cannot score an unlabeled event".into(),
                ))
            }
        }
        Ok(())
    }
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            true_positives: self.true_positives + rhs.true_positives,
            false_positives: self.false_positives + rhs.false_positives,
            true_negatives: self.true_negatives + rhs.true_negatives,
            false_negatives: self.false_negatives + rhs.false_negatives,
        }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: ConfusionCounts) {
        *self = *self + rhs;
    }
}

/// Tally predictions against labels; every label must be signal or noise.
pub fn confusion(predictions: &[Decision], labels: &[Label]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        counts.record(p, l)?;
    }
    Ok(counts)
}

/// One operating point of a ROC curve: everything scoring at or above
/// `threshold` is predicted signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by FPR, from (0,0) at threshold +inf to (1,1) at the lowest score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn from_points(points: Vec<RocPoint>) -> Self {
        let auc = trapezoid_auc(&points);
        Self { points, auc }
    }

    /// CSV export, one operating point per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        out
    }
}

/// Sweep a threshold over the distinct score values, descending. Tied scores
/// cross the threshold together, so a tie group contributes a single point.
pub fn roc_from_scores(scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("scores must not be NaN".into()));
    }
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    for &l in labels {
        match l {
            Label::Signal => n_pos += 1,
            Label::Noise => n_neg += 1,
            Label::Unlabeled => {
                return Err(Error::Validation(
                    "cannot build a ROC over unlabeled events".into(),
                ))
            }
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Validation(format!(
            "need both classes present, got {n_pos} signal / {n_neg} noise"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Signal => tp += 1,
                Label::Noise => fp += 1,
                Label::Unlabeled => unreachable!(),
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(RocCurve::from_points(points))
}

/// Trapezoidal integral of TPR over FPR.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}
