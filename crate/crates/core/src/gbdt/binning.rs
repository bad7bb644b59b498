//! Quantile binning of numeric features and the binned training matrix.
//!
//! A numeric feature with thresholds `t_0 < t_1 < ... < t_{m-2}` has `m`
//! value bins; value `x` falls in bin `#{j : t_j < x}`, so `bin(x) <= b`
//! exactly when `x <= t_b`. NaN goes to a separate missing slot stored after
//! the value bins.

use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Per-feature layout recorded in the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric { thresholds: Vec<f64> },
    Categorical { dictionary: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureInfo {
    /// Histogram slots: value bins plus the missing slot for numeric
    /// features, one slot per category otherwise.
    pub fn n_slots(&self) -> usize {
        match &self.kind {
            FeatureKind::Numeric { thresholds } => thresholds.len() + 2,
            FeatureKind::Categorical { dictionary } => dictionary.len(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }
}

/// Bin index for a numeric value; NaN maps to the missing slot.
#[inline]
pub fn numeric_bin(thresholds: &[f64], x: f64) -> u32 {
    if x.is_nan() {
        (thresholds.len() + 1) as u32
    } else {
        thresholds.partition_point(|&t| t < x) as u32
    }
}

/// Quantile thresholds for `values` using at most `max_bins` bins, one of
/// which is reserved for NaN when any value is missing.
pub fn build_bins(values: &[f64], max_bins: usize) -> Vec<f64> {
    assert!(max_bins >= 2, "max_bins must be at least 2");
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let has_missing = sorted.len() < values.len();
    let budget = if has_missing { max_bins - 1 } else { max_bins };
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();

    if distinct.len() <= budget {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut thresholds: Vec<f64> = Vec::with_capacity(budget - 1);
    for j in 1..budget {
        let idx = (j * n).div_ceil(budget).saturating_sub(1);
        let value = sorted[idx];
        let next = distinct.partition_point(|&d| d <= value);
        if next >= distinct.len() {
            continue;
        }
        let t = midpoint(value, distinct[next]);
        if thresholds.last().is_none_or(|&last| t > last) {
            thresholds.push(t);
        }
    }
    thresholds
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Guard against rounding up to `b`, which would put `b` in the left bin.
    if m >= b {
        a
    } else {
        m
    }
}

/// Bin layout for every feature column of `train`.
pub fn fit_features(train: &Dataset, max_bins: usize) -> Vec<FeatureInfo> {
    train
        .features()
        .iter()
        .map(|column| FeatureInfo {
            name: column.name().to_string(),
            kind: match column {
                Column::Numerical(c) => FeatureKind::Numeric {
                    thresholds: build_bins(c.values(), max_bins),
                },
                Column::Categorical(c) => FeatureKind::Categorical {
                    dictionary: c.dictionary().to_vec(),
                },
            },
        })
        .collect()
}

/// Column-major binned training data.
#[derive(Clone, Debug)]
pub struct BinnedMatrix {
    pub(crate) bins: Vec<Vec<u32>>,
    pub(crate) n_slots: Vec<usize>,
    n_rows: usize,
}

impl BinnedMatrix {
    /// Bins `ds` against `features`. Categorical columns must share the
    /// feature dictionary (i.e. `ds` is the data the layout was fitted on).
    pub fn new(ds: &Dataset, features: &[FeatureInfo]) -> Result<Self> {
        let mut bins = Vec::with_capacity(features.len());
        for feature in features {
            let column = ds
                .feature(&feature.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{}` missing", feature.name)))?;
            let binned = match (&feature.kind, column) {
                (FeatureKind::Numeric { thresholds }, Column::Numerical(c)) => {
                    c.values().iter().map(|&x| numeric_bin(thresholds, x)).collect()
                }
                (FeatureKind::Categorical { dictionary }, Column::Categorical(c)) => {
                    if **c.dictionary() != **dictionary {
                        return Err(Error::SchemaMismatch(format!(
                            "column `{}` dictionary differs from the fitted one",
                            feature.name
                        )));
                    }
                    c.codes().to_vec()
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` kind differs from the fitted one",
                        feature.name
                    )))
                }
            };
            bins.push(binned);
        }
        Ok(BinnedMatrix {
            bins,
            n_slots: features.iter().map(FeatureInfo::n_slots).collect(),
            n_rows: ds.n_rows(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn column(&self, feature: usize) -> &[u32] {
        &self.bins[feature]
    }
}
