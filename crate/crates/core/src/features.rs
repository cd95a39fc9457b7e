//! Per-ROI summary statistics, recursive feature elimination and
//! standardization.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifiers::lr::{self, LrParams};
use crate::data::AggregateSeries;
use crate::game::LabeledSample;
use crate::linalg::Matrix;
use crate::math;
use crate::{Error, Result};

/// Statistics computed for every ROI, in column order.
pub const STATS: [&str; 7] = ["var", "min", "max", "median", "mean", "std", "sum"];

/// Which split a feature matrix was built from. Fitting selection or
/// scaling on test rows is refused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Train,
    Test,
    Unspecified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub data: Matrix,
    pub columns: Vec<String>,
    /// `true` for in.
    pub labels: Vec<bool>,
    pub origin: Origin,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, columns: Vec<String>, labels: Vec<bool>, origin: Origin) -> Result<Self> {
        if data.cols() != columns.len() || data.rows() != labels.len() {
            return Err(Error::ShapeMismatch("feature data, names and labels disagree".into()));
        }
        if let Some((row, col)) = data.find_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { data, columns, labels, origin })
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn cols(&self) -> usize {
        self.data.cols()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            data: self.data.select_columns(cols),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            labels: self.labels.clone(),
            origin: self.origin,
        }
    }
}

/// The seven statistics of one series, population convention.
pub fn row_stats(row: &[f64]) -> [f64; 7] {
    let n = row.len() as f64;
    let sum: f64 = row.iter().sum();
    let mean = sum / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 { sorted[k / 2] } else { (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0 };
    [var, sorted[0], sorted[k - 1], median, mean, math::sqrt(var), sum]
}

/// Feature vector of one aggregate, ROI-major.
pub fn series_features(series: &AggregateSeries) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.roi_count() * STATS.len());
    for row in series.rows() {
        out.extend_from_slice(&row_stats(row));
    }
    out
}

pub fn column_names(roi_count: usize) -> Vec<String> {
    (0..roi_count)
        .flat_map(|r| STATS.iter().map(move |s| alloc::format!("{r}:{s}")))
        .collect()
}

/// Extracts the feature matrix of `samples`.
pub fn extract(samples: &[LabeledSample], origin: Origin) -> Result<FeatureMatrix> {
    let Some(first) = samples.first() else {
        return Err(Error::EmptyInput("no samples to extract".into()));
    };
    let (rois, len) = (first.aggregate.roi_count(), first.aggregate.len());
    let mut data = Vec::with_capacity(samples.len() * rois * STATS.len());
    for (i, s) in samples.iter().enumerate() {
        if s.aggregate.roi_count() != rois || s.aggregate.len() != len {
            return Err(Error::RaggedSamples(alloc::format!(
                "sample {i} is {}x{}, expected {rois}x{len}",
                s.aggregate.roi_count(),
                s.aggregate.len()
            )));
        }
        data.extend(series_features(&s.aggregate));
    }
    let matrix = Matrix::from_vec(data, samples.len(), rois * STATS.len())?;
    FeatureMatrix::new(
        matrix,
        column_names(rois),
        samples.iter().map(|s| s.label.is_in()).collect(),
        origin,
    )
}

/// Per-column affine scaling fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &FeatureMatrix) -> Result<Self> {
        if m.origin == Origin::Test {
            return Err(Error::TestRowsInFit);
        }
        Self::fit_matrix(&m.data)
    }

    pub fn fit_matrix(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyInput("cannot standardize zero rows".into()));
        }
        let n = x.rows() as f64;
        let mut means = alloc::vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = alloc::vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = math::sqrt(s / n);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn transform_matrix(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::ColumnMismatch);
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix { data: self.transform_matrix(&m.data)?, ..m.clone() })
    }

    pub fn inverse(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.cols() != self.means.len() {
            return Err(Error::ColumnMismatch);
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((v, mu), s) in out.data.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + mu;
            }
        }
        Ok(out)
    }
}

/// Fits a standardizer on `m` and applies it.
pub fn standardize(m: &FeatureMatrix) -> Result<(FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(m)?;
    Ok((s.transform(m)?, s))
}

/// Columns kept by feature selection, in original order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub kept: Vec<usize>,
    pub kept_columns: Vec<String>,
    pub target_count: usize,
}

impl FeatureSelection {
    pub fn identity(m: &FeatureMatrix) -> Self {
        Self {
            kept: (0..m.cols()).collect(),
            kept_columns: m.columns.clone(),
            target_count: m.cols(),
        }
    }

    /// Restricts `m` to the kept columns, checking the names line up.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let ok = self
            .kept
            .iter()
            .zip(&self.kept_columns)
            .all(|(&j, name)| m.columns.get(j) == Some(name));
        if !ok {
            return Err(Error::ColumnMismatch);
        }
        Ok(m.select_columns(&self.kept))
    }
}

/// Share of the remaining columns dropped per elimination round.
pub const RFE_STEP: f64 = 0.1;

/// Recursive feature elimination down to `target_count` columns, ranking
/// by the magnitude of L2-regularized logistic-regression coefficients
/// on standardized columns.
pub fn rfe(m: &FeatureMatrix, target_count: usize) -> Result<FeatureSelection> {
    if m.origin == Origin::Test {
        return Err(Error::TestRowsInFit);
    }
    if target_count == 0 {
        return Err(Error::InvalidFeatureCount(0));
    }
    if target_count > m.cols() {
        return Err(Error::TooManyFeatures { requested: target_count, available: m.cols() });
    }
    let scaled = Standardizer::fit_matrix(&m.data)?.transform_matrix(&m.data)?;
    let params = LrParams::default();
    let mut kept: Vec<usize> = (0..m.cols()).collect();
    while kept.len() > target_count {
        let x = scaled.select_columns(&kept);
        let model = lr::train(&x, &m.labels, &params)?;
        let drop = ((kept.len() as f64 * RFE_STEP) as usize).max(1).min(kept.len() - target_count);
        let mut order: Vec<usize> = (0..kept.len()).collect();
        // Weakest first; ties drop the later column.
        order.sort_by(|&a, &b| {
            math::abs(model.weights[a])
                .total_cmp(&math::abs(model.weights[b]))
                .then(b.cmp(&a))
        });
        let mut dead = alloc::vec![false; kept.len()];
        for &i in &order[..drop] {
            dead[i] = true;
        }
        kept = kept.iter().zip(&dead).filter(|(_, &d)| !d).map(|(&j, _)| j).collect();
    }
    Ok(FeatureSelection {
        kept_columns: kept.iter().map(|&j| m.columns[j].clone()).collect(),
        kept,
        target_count,
    })
}
