//! The aggregation → features → classification pipeline for one dataset.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierKind, ClassifierParams, TrainedModel};
use crate::features::{self, FeatureMatrix, FeatureSelection, Origin, Standardizer};
use crate::game::{self, Distinguisher, ExperimentDataset, LabeledSample};
use crate::metrics::GameReport;
use crate::Result;

/// A fitted feature pipeline plus classifier, usable as a distinguisher on
/// unseen samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub selection: FeatureSelection,
    pub standardizer: Option<Standardizer>,
    pub model: TrainedModel,
}

impl Pipeline {
    fn features(&self, samples: &[LabeledSample]) -> Result<FeatureMatrix> {
        let fm = self.selection.apply(&features::extract(samples, Origin::Test)?)?;
        match &self.standardizer {
            Some(s) => s.transform(&fm),
            None => Ok(fm),
        }
    }
}

impl Distinguisher for Pipeline {
    fn score(&self, samples: &[LabeledSample]) -> Result<Vec<f64>> {
        self.model.predict_scores(&self.features(samples)?)
    }
}

/// Training features after feature selection, shared by all classifiers
/// trained on one dataset.
#[derive(Clone, Debug)]
pub struct PreparedTrain {
    pub selection: FeatureSelection,
    pub matrix: FeatureMatrix,
}

/// Extracts training features and selects as many columns as there are
/// training samples.
pub fn prepare(train: &[LabeledSample]) -> Result<PreparedTrain> {
    let fm = features::extract(train, Origin::Train)?;
    let selection = if fm.cols() <= fm.rows() {
        FeatureSelection::identity(&fm)
    } else {
        features::rfe(&fm, fm.rows())?
    };
    Ok(PreparedTrain { matrix: selection.apply(&fm)?, selection })
}

/// Fits `kind` on prepared training features.
pub fn fit(prepared: &PreparedTrain, kind: ClassifierKind, params: &ClassifierParams) -> Result<Pipeline> {
    let (x, standardizer) = if kind.needs_standardization() {
        let (x, s) = features::standardize(&prepared.matrix)?;
        (x, Some(s))
    } else {
        (prepared.matrix.clone(), None)
    };
    Ok(Pipeline {
        selection: prepared.selection.clone(),
        standardizer,
        model: classifiers::train(kind, &x, params)?,
    })
}

/// Trains every listed classifier on the training split and plays the game
/// on the test split.
pub fn evaluate(
    dataset: &ExperimentDataset,
    kinds: &[ClassifierKind],
    params: &ClassifierParams,
) -> Result<Vec<(ClassifierKind, GameReport)>> {
    let prepared = prepare(&dataset.train)?;
    kinds
        .iter()
        .map(|&kind| {
            let pipeline = fit(&prepared, kind, params)?;
            Ok((kind, game::play_game(dataset, &pipeline)?))
        })
        .collect()
}
