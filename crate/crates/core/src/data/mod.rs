//! Immutable columnar datasets.
//!
//! A [`Dataset`] holds dictionary-coded categorical columns, `f64` numerical
//! columns and a binary target. Columns keep the order they had in the source
//! file; the target is stored separately but its position is remembered so
//! that [`Dataset::schema`] reproduces the original layout.

mod csv;
mod split;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, parse_target, HintKind, LoadOptions, SchemaHint};
pub use self::split::{holdout, split, subsample, SplitSpec};

/// Dictionary entry used for empty categorical cells. When a column has any
/// missing cell this entry is always code 0.
pub const MISSING_CATEGORY: &str = "__missing__";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numerical,
    Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Number of dictionary entries, categorical columns only.
    pub cardinality: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalColumn {
    name: String,
    codes: Vec<u32>,
    dictionary: Arc<[String]>,
}

impl CategoricalColumn {
    /// Dictionary-codes raw values in first-appearance order. `None` cells
    /// map to [`MISSING_CATEGORY`], which takes code 0 if present at all.
    pub fn from_raw<S: AsRef<str>>(name: impl Into<String>, raw: &[Option<S>]) -> Self {
        let mut dictionary: Vec<String> = Vec::new();
        let mut index: HashMap<&str, u32> = HashMap::new();
        if raw.iter().any(Option::is_none) {
            dictionary.push(MISSING_CATEGORY.to_string());
        }
        let mut codes = Vec::with_capacity(raw.len());
        for cell in raw {
            let code = match cell {
                None => 0,
                Some(value) => {
                    let value = value.as_ref();
                    match index.get(value) {
                        Some(&code) => code,
                        None => {
                            let code = dictionary.len() as u32;
                            dictionary.push(value.to_string());
                            index.insert(value, code);
                            code
                        }
                    }
                }
            };
            codes.push(code);
        }
        CategoricalColumn {
            name: name.into(),
            codes,
            dictionary: dictionary.into(),
        }
    }

    pub fn from_codes(name: impl Into<String>, codes: Vec<u32>, dictionary: impl Into<Arc<[String]>>) -> Result<Self> {
        let name = name.into();
        let dictionary = dictionary.into();
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= dictionary.len()) {
            return Err(Error::InvalidDataset(format!(
                "column `{name}`: code {bad} outside dictionary of size {}",
                dictionary.len()
            )));
        }
        Ok(CategoricalColumn {
            name,
            codes,
            dictionary,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn dictionary(&self) -> &Arc<[String]> {
        &self.dictionary
    }

    pub fn cardinality(&self) -> usize {
        self.dictionary.len()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Raw string for `row`; missing cells decode to [`MISSING_CATEGORY`].
    pub fn decode(&self, row: usize) -> &str {
        &self.dictionary[self.codes[row] as usize]
    }

    /// Translates this column's codes into the code space of `dictionary`.
    /// Values absent from `dictionary` become `None`.
    pub fn remap_codes(&self, dictionary: &[String]) -> Vec<Option<u32>> {
        if *self.dictionary == *dictionary {
            return self.codes.iter().map(|&c| Some(c)).collect();
        }
        let index: HashMap<&str, u32> = dictionary
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let translate: Vec<Option<u32>> = self.dictionary.iter().map(|s| index.get(s.as_str()).copied()).collect();
        self.codes.iter().map(|&c| translate[c as usize]).collect()
    }

    fn take(&self, rows: &[usize]) -> Self {
        CategoricalColumn {
            name: self.name.clone(),
            codes: rows.iter().map(|&r| self.codes[r]).collect(),
            dictionary: Arc::clone(&self.dictionary),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericColumn {
    name: String,
    values: Vec<f64>,
}

impl NumericColumn {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        NumericColumn {
            name: name.into(),
            values,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn take(&self, rows: &[usize]) -> Self {
        NumericColumn {
            name: self.name.clone(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
        }
    }
}

/// A feature column.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Categorical(CategoricalColumn),
    Numerical(NumericColumn),
}

impl Column {
    pub fn name(&self) -> &str {
        match self {
            Column::Categorical(c) => c.name(),
            Column::Numerical(c) => c.name(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(c) => c.len(),
            Column::Numerical(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Categorical(_) => ColumnKind::Categorical,
            Column::Numerical(_) => ColumnKind::Numerical,
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match self {
            Column::Categorical(c) => Some(c),
            Column::Numerical(_) => None,
        }
    }

    pub fn as_numerical(&self) -> Option<&NumericColumn> {
        match self {
            Column::Numerical(c) => Some(c),
            Column::Categorical(_) => None,
        }
    }

    fn take(&self, rows: &[usize]) -> Self {
        match self {
            Column::Categorical(c) => Column::Categorical(c.take(rows)),
            Column::Numerical(c) => Column::Numerical(c.take(rows)),
        }
    }
}

/// Immutable columnar table with a binary target.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<Column>,
    target_name: String,
    /// Position of the target among all columns, for schema reporting.
    target_position: usize,
    target: Vec<u8>,
}

impl Dataset {
    pub fn builder() -> DatasetBuilder {
        DatasetBuilder::default()
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn features(&self) -> &[Column] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&Column> {
        self.features.iter().find(|c| c.name() == name)
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn categorical_columns(&self) -> impl Iterator<Item = &CategoricalColumn> {
        self.features.iter().filter_map(Column::as_categorical)
    }

    pub fn has_categorical(&self) -> bool {
        self.categorical_columns().next().is_some()
    }

    /// Mean of the target, `0.0` for an empty dataset.
    pub fn positive_rate(&self) -> f64 {
        if self.target.is_empty() {
            return 0.0;
        }
        self.target.iter().map(|&y| f64::from(y)).sum::<f64>() / self.target.len() as f64
    }

    pub fn schema(&self) -> Vec<ColumnMeta> {
        let mut schema: Vec<ColumnMeta> = self
            .features
            .iter()
            .map(|c| ColumnMeta {
                name: c.name().to_string(),
                kind: c.kind(),
                cardinality: c.as_categorical().map(CategoricalColumn::cardinality),
            })
            .collect();
        schema.insert(
            self.target_position.min(schema.len()),
            ColumnMeta {
                name: self.target_name.clone(),
                kind: ColumnKind::Target,
                cardinality: None,
            },
        );
        schema
    }

    /// New dataset made of `rows` (in the given order). Dictionaries are shared.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.iter().map(|c| c.take(rows)).collect(),
            target_name: self.target_name.clone(),
            target_position: self.target_position,
            target: rows.iter().map(|&r| self.target[r]).collect(),
        }
    }

    /// Same rows and target with a different set of feature columns.
    pub fn with_features(&self, features: Vec<Column>) -> Result<Dataset> {
        let mut builder = DatasetBuilder {
            columns: features,
            target: None,
        };
        builder.target = Some((self.target_name.clone(), self.target.clone(), self.target_position));
        builder.build()
    }

    /// Row-wise concatenation. Schemas must match; categorical columns whose
    /// dictionaries differ are recoded against a merged dictionary.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.features.len() != other.features.len() || self.target_name != other.target_name {
            return Err(Error::SchemaMismatch("cannot concatenate datasets".into()));
        }
        let mut features = Vec::with_capacity(self.features.len());
        for (a, b) in self.features.iter().zip(&other.features) {
            if a.name() != b.name() || a.kind() != b.kind() {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` does not line up with `{}`",
                    a.name(),
                    b.name()
                )));
            }
            let merged = match (a, b) {
                (Column::Numerical(a), Column::Numerical(b)) => {
                    let mut values = a.values.clone();
                    values.extend_from_slice(&b.values);
                    Column::Numerical(NumericColumn::new(a.name.clone(), values))
                }
                (Column::Categorical(a), Column::Categorical(b)) => {
                    if a.dictionary == b.dictionary {
                        let mut codes = a.codes.clone();
                        codes.extend_from_slice(&b.codes);
                        Column::Categorical(CategoricalColumn {
                            name: a.name.clone(),
                            codes,
                            dictionary: Arc::clone(&a.dictionary),
                        })
                    } else {
                        let mut dictionary: Vec<String> = a.dictionary.to_vec();
                        let mut index: HashMap<String, u32> = dictionary
                            .iter()
                            .enumerate()
                            .map(|(i, s)| (s.clone(), i as u32))
                            .collect();
                        let mut codes = a.codes.clone();
                        for &code in &b.codes {
                            let raw = &b.dictionary[code as usize];
                            let next = dictionary.len() as u32;
                            let mapped = *index.entry(raw.clone()).or_insert_with(|| {
                                dictionary.push(raw.clone());
                                next
                            });
                            codes.push(mapped);
                        }
                        Column::Categorical(CategoricalColumn::from_codes(a.name.clone(), codes, dictionary)?)
                    }
                }
                _ => unreachable!("kinds checked above"),
            };
            features.push(merged);
        }
        let mut target = self.target.clone();
        target.extend_from_slice(&other.target);
        DatasetBuilder {
            columns: features,
            target: Some((self.target_name.clone(), target, self.target_position)),
        }
        .build()
    }
}

/// Incremental constructor for [`Dataset`]; validation happens in [`build`](Self::build).
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    columns: Vec<Column>,
    target: Option<(String, Vec<u8>, usize)>,
}

impl DatasetBuilder {
    pub fn categorical<S: AsRef<str>>(mut self, name: &str, raw: &[Option<S>]) -> Self {
        self.columns
            .push(Column::Categorical(CategoricalColumn::from_raw(name, raw)));
        self
    }

    /// Categorical column from fully-present string values.
    pub fn categorical_values<S: AsRef<str>>(self, name: &str, values: &[S]) -> Self {
        let raw: Vec<Option<&str>> = values.iter().map(|v| Some(v.as_ref())).collect();
        self.categorical(name, &raw)
    }

    pub fn numerical(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push(Column::Numerical(NumericColumn::new(name, values)));
        self
    }

    pub fn column(mut self, column: Column) -> Self {
        self.columns.push(column);
        self
    }

    pub fn target(mut self, name: &str, values: Vec<u8>) -> Self {
        let position = self.columns.len();
        self.target = Some((name.to_string(), values, position));
        self
    }

    pub fn build(self) -> Result<Dataset> {
        let (target_name, target, target_position) = self.target.ok_or(Error::NoTarget)?;
        let n_rows = target.len();
        if let Some((row, value)) = target.iter().enumerate().find(|(_, &y)| y > 1) {
            return Err(Error::InvalidTarget {
                row,
                value: value.to_string(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        seen.insert(target_name.as_str());
        for column in &self.columns {
            if !seen.insert(column.name()) {
                return Err(Error::DuplicateColumn(column.name().to_string()));
            }
            if column.len() != n_rows {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} rows, target has {n_rows}",
                    column.name(),
                    column.len()
                )));
            }
            if let Column::Categorical(c) = column {
                let card = c.cardinality();
                if c.codes.iter().any(|&code| code as usize >= card) {
                    return Err(Error::InvalidDataset(format!(
                        "column `{}` has codes outside [0, {card})",
                        c.name
                    )));
                }
            }
        }
        Ok(Dataset {
            features: self.columns,
            target_name,
            target_position,
            target,
        })
    }
}
