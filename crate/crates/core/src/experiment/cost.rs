use serde::{Deserialize, Serialize};

use super::{load_data, ExperimentSpec, Provenance};
use crate::data::{split, SplitSpec};
use crate::encode::EncoderSpec;
use crate::error::{Error, Result};
use crate::gbdt::{fit_pipeline, sigmoid, GbdtConfig};
use crate::metrics::auroc;

pub const DEFAULT_CHECKPOINT_EVERY: usize = 10;

/// Illustrative hourly compute rate in USD, not a quoted price.
pub const ILLUSTRATIVE_RATE_USD_PER_HOUR: f64 = 0.616;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCurvePoint {
    pub iteration: usize,
    pub wall_seconds: f64,
    pub cost_usd: f64,
    /// `None` when the validation labels are single-class.
    pub valid_auroc: Option<f64>,
    /// Marks the point taken on the returned (possibly truncated) model.
    pub is_final: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCurveReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub rate_usd_per_hour: f64,
    pub points: Vec<CostCurvePoint>,
}

fn cost(seconds: f64, rate: f64) -> f64 {
    seconds / 3600.0 * rate
}

fn checked_auroc(y: &[u8], scores: &[f64]) -> Result<Option<f64>> {
    match auroc(y, scores) {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains repeat 0 of `spec` and records wall time, cost and validation
/// AUROC at iteration 0, every `checkpoint_every` iterations, and once more
/// on the returned model. Wall time excludes the checkpoint evaluation.
pub fn track_cost_curve(
    spec: &ExperimentSpec,
    checkpoint_every: usize,
    rate_usd_per_hour: f64,
) -> Result<CostCurveReport> {
    if checkpoint_every < 1 {
        return Err(Error::InvalidConfig("checkpoint_every must be >= 1".into()));
    }
    if !(rate_usd_per_hour >= 0.0 && rate_usd_per_hour.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "hourly rate must be finite and >= 0, got {rate_usd_per_hour}"
        )));
    }
    spec.validate()?;
    let ds = load_data(spec)?;
    let seed = spec.repeat_seed(0);
    let (train, valid, _test) = split(&ds, &SplitSpec { seed, ..spec.split })?;
    let encoder = EncoderSpec {
        seed,
        ..spec.encoder.clone()
    };
    let config = GbdtConfig {
        seed,
        ..spec.gbdt.clone()
    };

    let y = valid.target();
    let mut points = Vec::new();
    let mut last_seconds = 0.0;
    let mut failure = None;
    let model = fit_pipeline(&train, Some(&valid), &config, &encoder, |p| {
        last_seconds = p.train_seconds;
        if p.iteration % checkpoint_every != 0 || failure.is_some() {
            return;
        }
        let raw = p.valid_raw.expect("validation scores are tracked");
        let probs: Vec<f64> = raw.iter().map(|&r| sigmoid(r)).collect();
        match checked_auroc(y, &probs) {
            Ok(valid_auroc) => points.push(CostCurvePoint {
                iteration: p.iteration,
                wall_seconds: p.train_seconds,
                cost_usd: cost(p.train_seconds, rate_usd_per_hour),
                valid_auroc,
                is_final: false,
            }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    points.push(CostCurvePoint {
        iteration: model.n_trees(),
        wall_seconds: last_seconds,
        cost_usd: cost(last_seconds, rate_usd_per_hour),
        valid_auroc: checked_auroc(y, &model.predict(&valid)?)?,
        is_final: true,
    });
    Ok(CostCurveReport {
        schema_version: super::REPORT_SCHEMA_VERSION,
        spec: spec.clone(),
        provenance: Provenance::current(),
        seed,
        checkpoint_every,
        rate_usd_per_hour,
        points,
    })
}
