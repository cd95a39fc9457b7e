//! ROC/AUC, privacy loss, privacy gain and mean relative error.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{AggregateSeries, UserId};
use crate::math::{self, Dd};
use crate::{Error, Result};

/// ROC curve as `(fpr, tpr)` points, one per distinct score threshold, from
/// `(0, 0)` to `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

/// ROC curve and AUC of `scores` against `labels` (`true` = in).
///
/// The AUC is the Mann-Whitney statistic with midranks for ties, which is
/// equal to the trapezoidal area under the threshold-sweep curve.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch("scores and labels differ in length".into()));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Midranks, ascending.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let auc = (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);

    // Threshold sweep, descending.
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = order.len();
    while k > 0 {
        let s = scores[order[k - 1]];
        while k > 0 && scores[order[k - 1]] == s {
            if labels[order[k - 1]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k -= 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
    }
    Ok(RocCurve { points, auc })
}

/// Adversary advantage over random guessing: `(auc - 0.5) / 0.5` above 0.5,
/// zero otherwise.
pub fn privacy_loss(auc: f64) -> Result<f64> {
    check_auc(auc)?;
    Ok(if auc > 0.5 { (auc - 0.5) / 0.5 } else { 0.0 })
}

/// Relative AUC reduction caused by a defense:
/// `(raw - noisy) / (raw - 0.5)` when `raw > noisy >= 0.5`, zero otherwise.
pub fn privacy_gain(auc_raw: f64, auc_noisy: f64) -> Result<f64> {
    check_auc(auc_raw)?;
    check_auc(auc_noisy)?;
    Ok(if auc_raw > auc_noisy && auc_noisy >= 0.5 {
        (auc_raw - auc_noisy) / (auc_raw - 0.5)
    } else {
        0.0
    })
}

fn check_auc(auc: f64) -> Result<()> {
    if (0.0..=1.0).contains(&auc) {
        Ok(())
    } else {
        Err(Error::AucOutOfRange(auc))
    }
}

/// Scope of the small-count bound γ in [`mre`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaScope {
    /// γ = 0.1% of each ROI row's sum.
    #[default]
    PerRoi,
    /// γ = 0.1% of the sum of the whole matrix, shared by all rows.
    Global,
}

/// γ used for rows (or matrices) whose sum is zero.
pub const GAMMA_FLOOR: f64 = 0.001;
const GAMMA_FRACTION: f64 = 0.001;

fn gamma_of(sum: f64) -> f64 {
    if sum == 0.0 {
        GAMMA_FLOOR
    } else {
        GAMMA_FRACTION * sum
    }
}

/// Mean relative error of a release against the raw aggregate, averaged
/// over ROI rows: per row `mean_i |y'_i - y_i| / max(γ, y_i)`.
///
/// Quotients and sums are carried in double-double precision and rounded
/// once at the end.
pub fn mre(raw: &AggregateSeries, noisy: &AggregateSeries, scope: GammaScope) -> Result<f64> {
    if raw.roi_count() != noisy.roi_count() || raw.len() != noisy.len() {
        return Err(Error::ShapeMismatch("raw and noisy series differ in shape".into()));
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput("series has no cells".into()));
    }
    let global = gamma_of(raw.values().iter().sum());
    let n = raw.len() as f64;
    let total = (0..raw.roi_count()).fold(Dd::default(), |acc, r| {
        let y = raw.row(r);
        let gamma = match scope {
            GammaScope::PerRoi => gamma_of(y.iter().sum()),
            GammaScope::Global => global,
        };
        let row = y
            .iter()
            .zip(noisy.row(r))
            .fold(Dd::default(), |s, (&yi, &zi)| s.add(Dd::quotient(math::abs(zi - yi), gamma.max(yi))));
        acc.add(row.div(n))
    });
    Ok(total.div(raw.roi_count() as f64).value())
}

/// Game outcome tallies with `b = 0` meaning the target is in the aggregate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Guesses "in" (`b' = 0`) when the score is at least `threshold`.
    pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &inside) in scores.iter().zip(labels) {
            match (inside, s >= threshold) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn) as f64
    }
}

/// Per-target result of playing the game on a test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub target: UserId,
    pub confusion: Confusion,
    pub roc: RocCurve,
    pub auc: f64,
    pub pl: f64,
}

impl GameReport {
    pub fn from_scores(target: UserId, scores: &[f64], labels: &[bool]) -> Result<Self> {
        let roc = roc_auc(scores, labels)?;
        let auc = roc.auc;
        Ok(Self {
            target,
            confusion: Confusion::at_threshold(scores, labels, 0.5),
            roc,
            auc,
            pl: privacy_loss(auc)?,
        })
    }
}
