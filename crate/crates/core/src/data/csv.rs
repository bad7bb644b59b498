//! CSV ingestion and the schema hint file.
//!
//! Hint file format, one column per line:
//!
//! ```text
//! # comment
//! user_id = categorical
//! age     = numerical
//! click   = target
//! row_id  = ignore
//! ```
//!
//! Columns that the hint does not mention are typed by inspection: numerical
//! when every non-empty cell parses as `f64`, categorical otherwise.

use std::collections::HashMap;
use std::path::Path;

use log::{info, warn};

use super::{CategoricalColumn, Column, DatasetBuilder, NumericColumn};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HintKind {
    Categorical,
    Numerical,
    Target,
    Ignore,
}

impl std::str::FromStr for HintKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" | "cat" => Ok(HintKind::Categorical),
            "numerical" | "numeric" | "num" => Ok(HintKind::Numerical),
            "target" | "label" => Ok(HintKind::Target),
            "ignore" | "skip" => Ok(HintKind::Ignore),
            other => Err(format!("unknown column kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemaHint {
    kinds: Vec<(String, HintKind)>,
}

impl SchemaHint {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kinds: Vec<(String, HintKind)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, kind) =
                line.split_once('=')
                    .or_else(|| line.split_once(':'))
                    .ok_or_else(|| Error::SchemaHint {
                        line: line_no,
                        message: "expected `name = kind`".into(),
                    })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::SchemaHint {
                    line: line_no,
                    message: "empty column name".into(),
                });
            }
            let kind = kind
                .parse()
                .map_err(|message| Error::SchemaHint { line: line_no, message })?;
            if kinds.iter().any(|(n, _)| n == name) {
                return Err(Error::SchemaHint {
                    line: line_no,
                    message: format!("column `{name}` listed twice"),
                });
            }
            kinds.push((name.to_string(), kind));
        }
        Ok(SchemaHint { kinds })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn with(mut self, name: &str, kind: HintKind) -> Self {
        self.kinds.retain(|(n, _)| n != name);
        self.kinds.push((name.to_string(), kind));
        self
    }

    pub fn kind(&self, name: &str) -> Option<HintKind> {
        self.kinds.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Target column; overrides any `target` entry in the hint.
    pub target: Option<String>,
    pub hint: SchemaHint,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            target: None,
            hint: SchemaHint::default(),
        }
    }
}

/// Parses a target cell: `0`, `1`, `true`, `false` (case-insensitive).
pub fn parse_target(cell: &str) -> Option<u8> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "0" | "false" => Some(0),
        "1" | "true" => Some(1),
        _ => None,
    }
}

fn is_missing(cell: &str) -> bool {
    cell.trim().is_empty()
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, options)
}

pub(crate) fn load_csv_reader<R: std::io::Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::MissingHeader);
    }
    let mut seen = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if name.trim().is_empty() {
            return Err(Error::EmptyHeaderName(i));
        }
        if seen.insert(name.as_str(), i).is_some() {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }

    let target_name = match &options.target {
        Some(t) => t.clone(),
        None => options
            .hint
            .kinds
            .iter()
            .find(|(_, k)| *k == HintKind::Target)
            .map(|(n, _)| n.clone())
            .ok_or(Error::NoTarget)?,
    };
    let target_index = *seen
        .get(target_name.as_str())
        .ok_or_else(|| Error::UnknownColumn(target_name.clone()))?;
    for (name, _) in &options.hint.kinds {
        if !seen.contains_key(name.as_str()) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        for (i, cell) in record.iter().enumerate() {
            cells[i].push(cell.to_string());
        }
    }
    let n_rows = cells[target_index].len();

    let mut target = Vec::with_capacity(n_rows);
    for (row, cell) in cells[target_index].iter().enumerate() {
        target.push(parse_target(cell).ok_or_else(|| Error::InvalidTarget {
            row,
            value: cell.clone(),
        })?);
    }

    let mut builder = DatasetBuilder::default();
    for (i, name) in headers.iter().enumerate() {
        if i == target_index {
            builder = builder.target(name, std::mem::take(&mut target));
            continue;
        }
        let hinted = options.hint.kind(name);
        let kind = match hinted {
            Some(HintKind::Ignore) => continue,
            Some(HintKind::Target) => {
                return Err(Error::InvalidConfig(format!(
                    "column `{name}` is hinted as target but `{target_name}` is the target"
                )))
            }
            Some(kind) => kind,
            None => {
                let numeric = cells[i]
                    .iter()
                    .filter(|c| !is_missing(c))
                    .all(|c| c.trim().parse::<f64>().is_ok());
                if numeric {
                    HintKind::Numerical
                } else {
                    HintKind::Categorical
                }
            }
        };
        let column = match kind {
            HintKind::Numerical => {
                let mut failures = 0usize;
                let values = cells[i]
                    .iter()
                    .map(|c| {
                        if is_missing(c) {
                            f64::NAN
                        } else {
                            c.trim().parse::<f64>().unwrap_or_else(|_| {
                                failures += 1;
                                f64::NAN
                            })
                        }
                    })
                    .collect();
                if failures > 0 {
                    warn!("column `{name}`: {failures} unparsable numeric cells read as missing");
                }
                Column::Numerical(NumericColumn::new(name.clone(), values))
            }
            _ => {
                let raw: Vec<Option<&str>> = cells[i]
                    .iter()
                    .map(|c| if is_missing(c) { None } else { Some(c.as_str()) })
                    .collect();
                Column::Categorical(CategoricalColumn::from_raw(name.clone(), &raw))
            }
        };
        builder = builder.column(column);
    }
    let dataset = builder.build()?;
    info!(
        "loaded {} rows, {} feature columns",
        dataset.n_rows(),
        dataset.features().len()
    );
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, MISSING_CATEGORY};

    fn load(text: &str, options: &LoadOptions) -> Result<Dataset> {
        load_csv_reader(text.as_bytes(), options)
    }

    fn target(name: &str) -> LoadOptions {
        LoadOptions {
            target: Some(name.into()),
            ..Default::default()
        }
    }

    #[test]
    fn three_row_file() {
        let hint = SchemaHint::parse("user = categorical\nage = numerical\nclick = target\n").unwrap();
        let options = LoadOptions {
            hint,
            ..Default::default()
        };
        let ds = load("user,age,click\nu1,20,1\nu2,31,0\nu1,,TRUE\n", &options).unwrap();
        assert_eq!(ds.n_rows(), 3);
        let schema = ds.schema();
        assert_eq!(schema[0].cardinality, Some(2));
        assert_eq!(schema[2].kind, ColumnKind::Target);
        let user = ds.feature("user").unwrap().as_categorical().unwrap();
        assert_eq!(user.codes(), &[0, 1, 0]);
        let age = ds.feature("age").unwrap().as_numerical().unwrap();
        assert!(age.values()[2].is_nan());
        assert_eq!(ds.target(), &[1, 0, 1]);
    }

    #[test]
    fn cardinality_matches_one_pass_count() {
        // 1000 rows over 40 categories with a sprinkling of empty cells.
        let mut text = String::from("c,y\n");
        let mut expected = std::collections::HashSet::new();
        for i in 0..1000u64 {
            let h = i.wrapping_mul(2654435761) % 1009;
            let cell = if h % 97 == 0 {
                String::new()
            } else {
                format!("cat{}", h % 40)
            };
            expected.insert(if cell.is_empty() {
                MISSING_CATEGORY.to_string()
            } else {
                cell.clone()
            });
            text.push_str(&format!("{cell},{}\n", i % 2));
        }
        let ds = load(&text, &target("y")).unwrap();
        assert_eq!(ds.schema()[0].cardinality, Some(expected.len()));
        assert_eq!(expected.len(), 41);
        let c = ds.feature("c").unwrap().as_categorical().unwrap();
        assert_eq!(c.dictionary()[0], MISSING_CATEGORY);
    }

    #[test]
    fn heuristic_and_hint_kinds() {
        let ds = load("a,b,y\n1,x,0\n2.5,3,1\n", &target("y")).unwrap();
        assert_eq!(ds.feature("a").unwrap().kind(), ColumnKind::Numerical);
        assert_eq!(ds.feature("b").unwrap().kind(), ColumnKind::Categorical);

        let hint = SchemaHint::default()
            .with("a", HintKind::Categorical)
            .with("b", HintKind::Ignore);
        let ds = load(
            "a,b,y\n1,x,0\n2.5,3,1\n",
            &LoadOptions {
                hint,
                target: Some("y".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ds.feature("a").unwrap().kind(), ColumnKind::Categorical);
        assert!(ds.feature("b").is_none());
    }

    #[test]
    fn decoding_round_trips_raw_strings() {
        let text = "c,y\nb,0\na,1\n,0\nb,1\n\"x,y\",0\n";
        let ds = load(text, &target("y")).unwrap();
        let c = ds.feature("c").unwrap().as_categorical().unwrap();
        let decoded: Vec<&str> = (0..ds.n_rows()).map(|r| c.decode(r)).collect();
        assert_eq!(decoded, vec!["b", "a", MISSING_CATEGORY, "b", "x,y"]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            load("a,a,y\n1,2,0\n", &target("y")),
            Err(Error::DuplicateColumn(_))
        ));
        assert!(matches!(
            load("a,y\n1,2\n", &target("y")),
            Err(Error::InvalidTarget { row: 0, .. })
        ));
        assert!(matches!(
            load("a,y\n1,yes\n", &target("y")),
            Err(Error::InvalidTarget { .. })
        ));
        assert!(matches!(
            load("a,y\n1,1\n", &LoadOptions::default()),
            Err(Error::NoTarget)
        ));
        assert!(matches!(load("a,y\n1,1\n", &target("z")), Err(Error::UnknownColumn(_))));
        assert!(matches!(
            load_csv("/definitely/not/here.csv", &target("y")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let options = LoadOptions {
            delimiter: b';',
            ..target("y")
        };
        let ds = load("a;y\n1;false\n2;True\n", &options).unwrap();
        assert_eq!(ds.target(), &[0, 1]);
    }

    #[test]
    fn hint_parse_errors() {
        assert!(SchemaHint::parse("a categorical").is_err());
        assert!(SchemaHint::parse("a = blob").is_err());
        assert!(SchemaHint::parse("a = cat\na = num").is_err());
        let hint = SchemaHint::parse("# header\n\na: num  # trailing\n").unwrap();
        assert_eq!(hint.kind("a"), Some(HintKind::Numerical));
    }
}
