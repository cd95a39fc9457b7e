//! The four distinguishers. All scores lie in `[0, 1]`, higher meaning
//! more likely "in".

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::linalg::Matrix;
use crate::{Error, Result};

mod lbfgs;
pub mod knn;
pub mod lr;
pub mod mlp;
pub mod rf;

pub use knn::KnnModel;
pub use lr::{LrModel, LrParams};
pub use mlp::{MlpModel, MlpParams};
pub use rf::{RfModel, RfParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "MLP")]
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] =
        [ClassifierKind::Lr, ClassifierKind::Knn, ClassifierKind::Rf, ClassifierKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "LR",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Rf => "RF",
            ClassifierKind::Mlp => "MLP",
        }
    }

    /// Whether the classifier expects standardized inputs.
    pub fn needs_standardization(self) -> bool {
        self == ClassifierKind::Mlp
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidHyperparameter(alloc::format!("unknown classifier '{s}'")))
    }
}

/// Hyperparameters for every classifier kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub lr: LrParams,
    pub k: usize,
    pub rf: RfParams,
    pub mlp: MlpParams,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { lr: LrParams::default(), k: 5, rf: RfParams::default(), mlp: MlpParams::default() }
    }
}

impl ClassifierParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rf.seed = seed;
        self.mlp.seed = seed;
        self
    }
}

/// Learned state of one classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state")]
pub enum ModelState {
    #[serde(rename = "LR")]
    Lr(LrModel),
    #[serde(rename = "KNN")]
    Knn(KnnModel),
    #[serde(rename = "RF")]
    Rf(RfModel),
    #[serde(rename = "MLP")]
    Mlp(MlpModel),
}

/// A trained classifier bound to the feature columns it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub state: ModelState,
    pub feature_columns: Vec<String>,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.state {
            ModelState::Lr(_) => ClassifierKind::Lr,
            ModelState::Knn(_) => ClassifierKind::Knn,
            ModelState::Rf(_) => ClassifierKind::Rf,
            ModelState::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    /// Scores raw rows whose columns are already known to match.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        match &self.state {
            ModelState::Lr(m) => m.predict(x),
            ModelState::Knn(m) => m.predict(x),
            ModelState::Rf(m) => m.predict(x),
            ModelState::Mlp(m) => m.predict(x),
        }
    }

    /// One score per row of `x`, whose column names must equal the
    /// training columns.
    pub fn predict_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.columns != self.feature_columns {
            return Err(Error::ColumnMismatch);
        }
        self.predict_matrix(&x.data)
    }
}

pub(crate) fn check_training(x: &Matrix, y: &[bool], min_rows: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch("feature rows and labels differ in length".into()));
    }
    if x.rows() < min_rows {
        return Err(Error::TooFewRows { needed: min_rows, got: x.rows() });
    }
    if let Some((row, col)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let pos = y.iter().filter(|&&l| l).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains `kind` on a feature matrix.
pub fn train(kind: ClassifierKind, x: &FeatureMatrix, params: &ClassifierParams) -> Result<TrainedModel> {
    let (m, y) = (&x.data, &x.labels[..]);
    let state = match kind {
        ClassifierKind::Lr => ModelState::Lr(lr::train(m, y, &params.lr)?),
        ClassifierKind::Knn => ModelState::Knn(knn::train(m, y, params.k)?),
        ClassifierKind::Rf => ModelState::Rf(rf::train(m, y, &params.rf)?),
        ClassifierKind::Mlp => ModelState::Mlp(mlp::train(m, y, &params.mlp)?),
    };
    Ok(TrainedModel { state, feature_columns: x.columns.clone() })
}
