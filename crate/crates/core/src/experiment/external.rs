//! Prediction files exchanged with other tools: a CSV with header
//! `row_id,probability`, one line per row of the scored dataset.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::EvalResult;

pub const HEADER: [&str; 2] = ["row_id", "probability"];

/// Writes `probs` with row ids `0..probs.len()`.
pub fn write_predictions(path: &Path, probs: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions_to(file, probs)
}

pub fn write_predictions_to(out: impl Write, probs: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (row, p) in probs.iter().enumerate() {
        w.write_record([row.to_string(), p.to_string()])?;
    }
    w.flush()
        .map_err(|e| Error::Malformed(format!("writing predictions: {e}")))?;
    Ok(())
}

/// Reads a prediction file and returns probabilities ordered by row id.
/// Row ids must cover `0..n` exactly once; lines may come in any order.
pub fn read_predictions(path: &Path) -> Result<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions_from(file)
}

pub fn read_predictions_from(input: impl std::io::Read) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || headers[0] != *HEADER[0] || headers[1] != *HEADER[1] {
        return Err(Error::Malformed(format!(
            "prediction header must be `row_id,probability`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut pairs = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::Malformed(format!("prediction line {}: {what}", line + 2));
        if record.len() != 2 {
            return Err(bad("expected 2 fields"));
        }
        let row: usize = record[0]
            .parse()
            .map_err(|_| bad("row_id is not a non-negative integer"))?;
        let p: f64 = record[1].parse().map_err(|_| bad("probability is not a number"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad("probability outside [0, 1]"));
        }
        pairs.push((row, p));
    }
    let n = pairs.len();
    let mut probs = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (row, p) in pairs {
        if row >= n {
            return Err(Error::Malformed(format!(
                "row_id {row} out of range for {n} predictions"
            )));
        }
        if std::mem::replace(&mut seen[row], true) {
            return Err(Error::Malformed(format!("duplicate row_id {row}")));
        }
        probs[row] = p;
    }
    Ok(probs)
}

/// Scores external predictions against the dataset's labels.
pub fn score_predictions(ds: &Dataset, probs: &[f64]) -> Result<EvalResult> {
    if probs.len() != ds.n_rows() {
        return Err(Error::LengthMismatch(ds.n_rows(), probs.len()));
    }
    EvalResult::compute(ds.target(), probs)
}
