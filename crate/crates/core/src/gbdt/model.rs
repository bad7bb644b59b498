use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{FeatureInfo, FeatureKind};
use super::loss::sigmoid;
use super::tree::{FeatureValue, Tree};
use super::GbdtConfig;
use crate::data::{Column, Dataset};
use crate::encode::FittedEncoder;
use crate::error::{Error, Result};

/// Training record stored with the model. Loss histories are indexed by
/// iteration, entry 0 being the base-score-only model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub n_train_rows: usize,
    pub n_valid_rows: usize,
    pub train_positive_rate: f64,
    /// Iterations run before truncation.
    pub iterations_run: usize,
    /// Number of trees kept.
    pub best_iteration: usize,
    pub stopped_early: bool,
    pub train_logloss: Vec<f64>,
    pub valid_logloss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: GbdtConfig,
    /// Log-odds of the clipped training positive rate.
    pub base_score: f64,
    pub features: Vec<FeatureInfo>,
    /// Present when categorical columns were encoded before training.
    pub encoder: Option<FittedEncoder>,
    pub trees: Vec<Tree>,
    pub metadata: TrainingMetadata,
}

/// Feature values of a dataset aligned with a model's feature layout.
pub(crate) enum PredictColumn<'a> {
    Numeric(&'a [f64]),
    Category(Vec<Option<u32>>),
}

pub(crate) struct PredictMatrix<'a> {
    columns: Vec<PredictColumn<'a>>,
    n_rows: usize,
}

impl<'a> PredictMatrix<'a> {
    /// Looks up every model feature by name. Categorical codes are
    /// translated into the model dictionary; unknown categories become `None`.
    pub(crate) fn new(ds: &'a Dataset, features: &[FeatureInfo]) -> Result<Self> {
        let mut columns = Vec::with_capacity(features.len());
        for feature in features {
            let column = ds
                .feature(&feature.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{}` missing", feature.name)))?;
            columns.push(match (&feature.kind, column) {
                (FeatureKind::Numeric { .. }, Column::Numerical(c)) => PredictColumn::Numeric(c.values()),
                (FeatureKind::Categorical { dictionary }, Column::Categorical(c)) => {
                    PredictColumn::Category(c.remap_codes(dictionary))
                }
                (FeatureKind::Numeric { .. }, _) => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` must be numerical",
                        feature.name
                    )))
                }
                (FeatureKind::Categorical { .. }, _) => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` must be categorical",
                        feature.name
                    )))
                }
            });
        }
        Ok(PredictMatrix {
            columns,
            n_rows: ds.n_rows(),
        })
    }

    #[inline]
    pub(crate) fn value(&self, row: usize, feature: usize) -> FeatureValue {
        match &self.columns[feature] {
            PredictColumn::Numeric(values) => FeatureValue::Numeric(values[row]),
            PredictColumn::Category(codes) => FeatureValue::Category(codes[row]),
        }
    }

    pub(crate) fn tree_output(&self, tree: &Tree, row: usize) -> f64 {
        tree.predict(|f| self.value(row, f))
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }
}

impl Model {
    /// A model with no trees; predicts `sigmoid(base_score)` everywhere.
    pub fn constant(config: GbdtConfig, base_score: f64, features: Vec<FeatureInfo>) -> Model {
        Model {
            config,
            base_score,
            features,
            encoder: None,
            trees: Vec::new(),
            metadata: TrainingMetadata::default(),
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Raw log-odds scores. Tree outputs are added one at a time as
    /// `raw += η · leaf`, the same order used during training.
    pub fn predict_raw(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let encoded;
        let ds = match &self.encoder {
            Some(encoder) => {
                encoded = encoder.apply(ds)?;
                &encoded
            }
            None => ds,
        };
        let matrix = PredictMatrix::new(ds, &self.features)?;
        let eta = self.config.learning_rate;
        Ok((0..matrix.n_rows())
            .into_par_iter()
            .map(|row| {
                let mut raw = self.base_score;
                for tree in &self.trees {
                    raw += eta * matrix.tree_output(tree, row);
                }
                raw
            })
            .collect())
    }

    /// Click probabilities in (0, 1).
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict_raw(ds)?.into_iter().map(sigmoid).collect())
    }
}
