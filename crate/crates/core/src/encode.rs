//! Categorical encoders: label encoding, smoothed target encoding, K-fold
//! target encoding and ordered (permutation-based) target statistics.
//!
//! Every target-statistic mode uses the same smoothed mean
//!
//! ```text
//! value(c) = (sum_y(c) + a * prior) / (count(c) + a)
//! ```
//!
//! and differs only in which rows feed `sum_y` / `count` for a *training*
//! row. At apply time (valid/test/inference) all modes use statistics from
//! the full fitting data.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalColumn, Column, Dataset, NumericColumn};
use crate::error::{Error, Result};

/// Prior used by ordered target statistics when none is configured. It must
/// not depend on the labels, otherwise row i would see its own target.
pub const ORDERED_TS_DEFAULT_PRIOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    Label,
    Target,
    KfoldTarget,
    OrderedTs,
    NativePassthrough,
}

impl EncoderMode {
    pub const ALL: [EncoderMode; 5] = [
        EncoderMode::Label,
        EncoderMode::Target,
        EncoderMode::KfoldTarget,
        EncoderMode::OrderedTs,
        EncoderMode::NativePassthrough,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderMode::Label => "label",
            EncoderMode::Target => "target",
            EncoderMode::KfoldTarget => "kfold_target",
            EncoderMode::OrderedTs => "ordered_ts",
            EncoderMode::NativePassthrough => "native_passthrough",
        }
    }

    pub fn uses_target_statistics(self) -> bool {
        matches!(
            self,
            EncoderMode::Target | EncoderMode::KfoldTarget | EncoderMode::OrderedTs
        )
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "label" | "le" => Ok(EncoderMode::Label),
            "target" | "te" => Ok(EncoderMode::Target),
            "kfold_target" | "kfold" | "kfold_te" => Ok(EncoderMode::KfoldTarget),
            "ordered_ts" | "ordered" | "catboost" => Ok(EncoderMode::OrderedTs),
            "native_passthrough" | "native" | "none" => Ok(EncoderMode::NativePassthrough),
            other => Err(Error::InvalidConfig(format!("unknown encoder mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    pub mode: EncoderMode,
    /// Additive smoothing strength `a`.
    pub smoothing: f64,
    pub k_folds: usize,
    pub n_permutations: usize,
    pub seed: u64,
    /// Fixed prior. `None` means the fitting-data mean for the target and
    /// K-fold modes and [`ORDERED_TS_DEFAULT_PRIOR`] for ordered statistics.
    pub prior: Option<f64>,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            mode: EncoderMode::NativePassthrough,
            smoothing: 1.0,
            k_folds: 5,
            n_permutations: 1,
            seed: 0,
            prior: None,
        }
    }
}

impl EncoderSpec {
    pub fn new(mode: EncoderMode) -> Self {
        EncoderSpec {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smoothing must be a finite non-negative number, got {}",
                self.smoothing
            )));
        }
        if self.k_folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "k_folds must be >= 2, got {}",
                self.k_folds
            )));
        }
        if self.n_permutations < 1 {
            return Err(Error::InvalidConfig("n_permutations must be >= 1".into()));
        }
        if let Some(p) = self.prior {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("prior must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    fn prior_for(&self, data_mean: f64) -> f64 {
        match (self.prior, self.mode) {
            (Some(p), _) => p,
            (None, EncoderMode::OrderedTs) => ORDERED_TS_DEFAULT_PRIOR,
            (None, _) => data_mean,
        }
    }
}

/// `(sum + a·prior) / (count + a)`, or `prior` when the denominator vanishes.
#[inline]
pub fn smoothed_mean(sum: f64, count: f64, smoothing: f64, prior: f64) -> f64 {
    let denom = count + smoothing;
    if denom > 0.0 {
        (sum + smoothing * prior) / denom
    } else {
        prior
    }
}

/// Full-data statistics for one categorical column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub dictionary: Vec<String>,
    /// Indexed by dictionary code.
    pub target_sums: Vec<f64>,
    pub counts: Vec<u64>,
}

impl ColumnStats {
    fn fit(column: &CategoricalColumn, y: &[u8]) -> Self {
        let card = column.cardinality();
        let mut target_sums = vec![0.0; card];
        let mut counts = vec![0u64; card];
        for (&code, &y) in column.codes().iter().zip(y) {
            target_sums[code as usize] += f64::from(y);
            counts[code as usize] += 1;
        }
        ColumnStats {
            name: column.name().to_string(),
            dictionary: column.dictionary().to_vec(),
            target_sums,
            counts,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.dictionary.len()
    }
}

/// Fitted encoder state: per-column statistics, the prior and the spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedEncoder {
    pub spec: EncoderSpec,
    pub prior: f64,
    pub columns: Vec<ColumnStats>,
}

impl FittedEncoder {
    fn fit(ds: &Dataset, spec: &EncoderSpec) -> Result<Self> {
        spec.validate()?;
        if ds.n_rows() == 0 {
            return Err(Error::EmptyInput);
        }
        let columns = if spec.mode == EncoderMode::NativePassthrough {
            Vec::new()
        } else {
            ds.categorical_columns()
                .map(|c| ColumnStats::fit(c, ds.target()))
                .collect()
        };
        Ok(FittedEncoder {
            spec: spec.clone(),
            prior: spec.prior_for(ds.positive_rate()),
            columns,
        })
    }

    /// Apply-time value for `code` in column `column`; `None` is an unseen category.
    pub fn value(&self, column: usize, code: Option<u32>) -> f64 {
        let stats = &self.columns[column];
        match (self.spec.mode, code) {
            (EncoderMode::Label, Some(c)) => f64::from(c),
            (EncoderMode::Label, None) => stats.cardinality() as f64,
            (_, Some(c)) => smoothed_mean(
                stats.target_sums[c as usize],
                stats.counts[c as usize] as f64,
                self.spec.smoothing,
                self.prior,
            ),
            (_, None) => self.prior,
        }
    }

    /// Replaces every fitted categorical column of `ds` by its encoded
    /// numeric column, using full fitted statistics.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if self.spec.mode == EncoderMode::NativePassthrough {
            return Ok(ds.clone());
        }
        let mut features = ds.features().to_vec();
        for (index, stats) in self.columns.iter().enumerate() {
            let position = features
                .iter()
                .position(|c| c.name() == stats.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{}` missing", stats.name)))?;
            let values = match &features[position] {
                Column::Categorical(column) => column
                    .remap_codes(&stats.dictionary)
                    .into_iter()
                    .map(|code| self.value(index, code))
                    .collect(),
                Column::Numerical(_) => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` is numerical, encoder expects categorical",
                        stats.name
                    )))
                }
            };
            features[position] = Column::Numerical(NumericColumn::new(stats.name.clone(), values));
        }
        ds.with_features(features)
    }
}

fn categorical_inputs(ds: &Dataset) -> Vec<&CategoricalColumn> {
    ds.categorical_columns().collect()
}

pub fn fit_label_encoding(ds: &Dataset) -> Result<FittedEncoder> {
    FittedEncoder::fit(ds, &EncoderSpec::new(EncoderMode::Label))
}

pub fn fit_target_encoding(ds: &Dataset, spec: &EncoderSpec) -> Result<FittedEncoder> {
    expect_mode(spec, EncoderMode::Target)?;
    FittedEncoder::fit(ds, spec)
}

fn expect_mode(spec: &EncoderSpec, mode: EncoderMode) -> Result<()> {
    if spec.mode != mode {
        return Err(Error::InvalidConfig(format!(
            "expected encoder mode {mode}, got {}",
            spec.mode
        )));
    }
    Ok(())
}

/// Seeded fold assignment: a shuffled row order dealt round-robin into `k` folds.
pub fn assign_folds(n_rows: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng);
    let mut folds = vec![0; n_rows];
    for (position, &row) in order.iter().enumerate() {
        folds[row] = position % k;
    }
    folds
}

/// Per-row training values (`[column][row]`) plus full-data statistics.
pub type TrainEncoding = (Vec<Vec<f64>>, FittedEncoder);

pub fn fit_apply_kfold_target_encoding(ds: &Dataset, spec: &EncoderSpec) -> Result<TrainEncoding> {
    expect_mode(spec, EncoderMode::KfoldTarget)?;
    spec.validate()?;
    if ds.n_rows() < spec.k_folds {
        return Err(Error::InvalidConfig(format!(
            "{} rows cannot fill {} folds",
            ds.n_rows(),
            spec.k_folds
        )));
    }
    let folds = assign_folds(ds.n_rows(), spec.k_folds, spec.seed);
    kfold_target_encoding_with_folds(ds, spec, &folds)
}

/// K-fold target encoding with an explicit fold id per row (`0..spec.k_folds`).
/// A training row's statistics and prior come from the other folds only.
pub fn kfold_target_encoding_with_folds(ds: &Dataset, spec: &EncoderSpec, folds: &[usize]) -> Result<TrainEncoding> {
    expect_mode(spec, EncoderMode::KfoldTarget)?;
    let encoder = FittedEncoder::fit(ds, spec)?;
    if folds.len() != ds.n_rows() {
        return Err(Error::LengthMismatch(folds.len(), ds.n_rows()));
    }
    let k = spec.k_folds;
    let mut fold_rows = vec![0u64; k];
    let mut fold_pos = vec![0.0f64; k];
    for (&fold, &y) in folds.iter().zip(ds.target()) {
        if fold >= k {
            return Err(Error::InvalidConfig(format!("fold id {fold} >= k_folds {k}")));
        }
        fold_rows[fold] += 1;
        fold_pos[fold] += f64::from(y);
    }
    if let Some(empty) = fold_rows.iter().position(|&n| n == 0) {
        return Err(Error::InvalidConfig(format!("fold {empty} has no rows")));
    }
    let total_rows = ds.n_rows() as u64;
    let total_pos: f64 = fold_pos.iter().sum();
    let fold_prior: Vec<f64> = (0..k)
        .map(|f| match spec.prior {
            Some(p) => p,
            None => (total_pos - fold_pos[f]) / (total_rows - fold_rows[f]) as f64,
        })
        .collect();

    let y = ds.target();
    let values = categorical_inputs(ds)
        .iter()
        .zip(&encoder.columns)
        .map(|(column, full)| {
            let mut in_fold: Vec<HashMap<u32, (f64, u64)>> = vec![HashMap::new(); k];
            for ((&code, &fold), &y) in column.codes().iter().zip(folds).zip(y) {
                let entry = in_fold[fold].entry(code).or_insert((0.0, 0));
                entry.0 += f64::from(y);
                entry.1 += 1;
            }
            column
                .codes()
                .iter()
                .zip(folds)
                .map(|(&code, &fold)| {
                    let (fold_sum, fold_count) = in_fold[fold][&code];
                    // Sums of 0/1 targets are exact integers, so subtraction is exact.
                    let sum = full.target_sums[code as usize] - fold_sum;
                    let count = full.counts[code as usize] - fold_count;
                    smoothed_mean(sum, count as f64, spec.smoothing, fold_prior[fold])
                })
                .collect()
        })
        .collect();
    Ok((values, encoder))
}

/// Draws `spec.n_permutations` seeded permutations of `0..n_rows`.
pub fn draw_permutations(n_rows: usize, spec: &EncoderSpec) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_permutations)
        .map(|_| {
            let mut order: Vec<usize> = (0..n_rows).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

pub fn fit_apply_ordered_ts(ds: &Dataset, spec: &EncoderSpec) -> Result<TrainEncoding> {
    expect_mode(spec, EncoderMode::OrderedTs)?;
    spec.validate()?;
    let permutations = draw_permutations(ds.n_rows(), spec);
    ordered_ts_with_permutations(ds, spec, &permutations)
}

/// Ordered target statistics over explicit permutations (each a visiting
/// order of row indices). Row values are averaged across permutations.
pub fn ordered_ts_with_permutations(
    ds: &Dataset,
    spec: &EncoderSpec,
    permutations: &[Vec<usize>],
) -> Result<TrainEncoding> {
    expect_mode(spec, EncoderMode::OrderedTs)?;
    let encoder = FittedEncoder::fit(ds, spec)?;
    if permutations.is_empty() {
        return Err(Error::InvalidConfig("at least one permutation required".into()));
    }
    let n = ds.n_rows();
    for perm in permutations {
        let mut seen = vec![false; n];
        let valid = perm.len() == n && perm.iter().all(|&r| r < n && !std::mem::replace(&mut seen[r], true));
        if !valid {
            return Err(Error::InvalidConfig("not a permutation of the rows".into()));
        }
    }
    let y = ds.target();
    let prior = encoder.prior;
    let values = categorical_inputs(ds)
        .iter()
        .map(|column| {
            let codes = column.codes();
            let mut acc = vec![0.0; n];
            let mut sums = vec![0.0; column.cardinality()];
            let mut counts = vec![0u64; column.cardinality()];
            for perm in permutations {
                sums.iter_mut().for_each(|s| *s = 0.0);
                counts.iter_mut().for_each(|c| *c = 0);
                for &row in perm {
                    let code = codes[row] as usize;
                    acc[row] += smoothed_mean(sums[code], counts[code] as f64, spec.smoothing, prior);
                    sums[code] += f64::from(y[row]);
                    counts[code] += 1;
                }
            }
            let n_perm = permutations.len() as f64;
            acc.iter_mut().for_each(|v| *v /= n_perm);
            acc
        })
        .collect();
    Ok((values, encoder))
}

/// Encodes a training set: returns the dataset with categorical columns
/// replaced by leakage-safe values for the mode, plus the fitted encoder.
pub fn fit_transform(ds: &Dataset, spec: &EncoderSpec) -> Result<(Dataset, FittedEncoder)> {
    match spec.mode {
        EncoderMode::NativePassthrough => Ok((ds.clone(), FittedEncoder::fit(ds, spec)?)),
        EncoderMode::Label | EncoderMode::Target => {
            let encoder = FittedEncoder::fit(ds, spec)?;
            Ok((encoder.apply(ds)?, encoder))
        }
        EncoderMode::KfoldTarget | EncoderMode::OrderedTs => {
            let (values, encoder) = if spec.mode == EncoderMode::KfoldTarget {
                fit_apply_kfold_target_encoding(ds, spec)?
            } else {
                fit_apply_ordered_ts(ds, spec)?
            };
            Ok((replace_categoricals(ds, values)?, encoder))
        }
    }
}

fn replace_categoricals(ds: &Dataset, values: Vec<Vec<f64>>) -> Result<Dataset> {
    let mut values = values.into_iter();
    let features = ds
        .features()
        .iter()
        .map(|column| match column {
            Column::Categorical(c) => Column::Numerical(NumericColumn::new(
                c.name(),
                values.next().expect("one value vector per categorical column"),
            )),
            other => other.clone(),
        })
        .collect();
    ds.with_features(features)
}
