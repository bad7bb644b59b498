use serde::{Deserialize, Serialize};

use super::{load_data, run_repeat, EvalReport, ExperimentSpec, MetricSummary, Provenance, RunRecord};
use crate::encode::EncoderMode;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: EncoderMode,
    pub logloss: MetricSummary,
    pub auroc: Option<MetricSummary>,
    /// Lowest mean test logloss among the rows.
    pub best_logloss: bool,
    /// Highest mean test AUROC among the rows.
    pub best_auroc: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub ci_method: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    /// Full per-mode reports, in `rows` order.
    pub experiments: Vec<EvalReport>,
}

impl AblationReport {
    pub fn row(&self, mode: EncoderMode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// Per-repeat test AUROC for `mode`, in repeat order.
    pub fn test_auroc(&self, mode: EncoderMode) -> Option<Vec<Option<f64>>> {
        let i = self.rows.iter().position(|r| r.mode == mode)?;
        Some(self.experiments[i].runs.iter().map(|r| r.test.auroc).collect())
    }
}

/// One experiment per encoder mode. Repeat `i` of every mode uses the same
/// seed, hence the same split and learner seed; only the encoder differs.
pub fn run_ablation(spec: &ExperimentSpec, modes: &[EncoderMode]) -> Result<AblationReport> {
    if modes.len() < 2 {
        return Err(Error::InvalidConfig(
            "an ablation needs at least two encoder modes".into(),
        ));
    }
    spec.validate()?;
    let ds = load_data(spec)?;
    let mut experiments = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut mode_spec = spec.clone();
        mode_spec.encoder.mode = mode;
        let runs: Vec<RunRecord> = (0..spec.n_repeats)
            .map(|repeat| {
                run_repeat(&mode_spec, &ds, repeat)
                    .map(|out| out.record)
                    .map_err(|e| Error::Repeat {
                        repeat,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        experiments.push(super::build_report(&mode_spec, runs)?);
    }

    let best_logloss = experiments
        .iter()
        .map(|e| e.test_logloss.mean)
        .fold(f64::INFINITY, f64::min);
    let best_auroc = experiments
        .iter()
        .filter_map(|e| e.test_auroc.as_ref().map(|a| a.mean))
        .fold(f64::NEG_INFINITY, f64::max);
    let rows = modes
        .iter()
        .zip(&experiments)
        .map(|(&mode, e)| AblationRow {
            mode,
            logloss: e.test_logloss.clone(),
            auroc: e.test_auroc.clone(),
            best_logloss: e.test_logloss.mean == best_logloss,
            best_auroc: e.test_auroc.as_ref().is_some_and(|a| a.mean == best_auroc),
        })
        .collect();
    Ok(AblationReport {
        schema_version: super::REPORT_SCHEMA_VERSION,
        spec: spec.clone(),
        provenance: Provenance::current(),
        ci_method: crate::metrics::CI_METHOD.to_string(),
        seeds: (0..spec.n_repeats).map(|i| spec.repeat_seed(i)).collect(),
        rows,
        experiments,
    })
}
