//! Repeated train/evaluate experiments, encoder ablations, cost curves and
//! staleness simulation, plus their reports.

mod ablation;
mod cost;
pub mod external;
mod report;
mod staleness;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split, subsample, Dataset, LoadOptions, SchemaHint, SplitSpec};
use crate::encode::EncoderSpec;
use crate::error::{Error, Result};
use crate::gbdt::{fit_pipeline, GbdtConfig, Model};
use crate::metrics::{aggregate_runs, EvalResult, CI_METHOD};
use crate::synth::SynthSpec;

pub use ablation::{run_ablation, AblationReport, AblationRow};
pub use cost::{
    track_cost_curve, CostCurvePoint, CostCurveReport, DEFAULT_CHECKPOINT_EVERY, ILLUSTRATIVE_RATE_USD_PER_HOUR,
};
pub use report::{emit_report, read_report, Format, Report, REPORT_SCHEMA_VERSION};
pub use staleness::{
    simulate_staleness, PolicySeries, RetrainPolicy, StalenessReport, StalenessSpec, WindowInfo, WindowPoint,
};

/// Current experiment spec file version.
pub const SPEC_VERSION: u32 = 1;

fn default_repeats() -> usize {
    10
}

fn default_confidence() -> f64 {
    0.95
}

fn default_delimiter() -> char {
    ','
}

/// CSV file source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Schema hint file.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Target column; may also come from the schema hint.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SynthSpec),
}

impl DataSource {
    pub fn csv(path: impl Into<PathBuf>) -> DataSource {
        DataSource::Csv(CsvSource {
            path: path.into(),
            schema: None,
            target: None,
            delimiter: ',',
        })
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic(spec) => Ok(spec.generate()),
            DataSource::Csv(src) => {
                if !src.delimiter.is_ascii() {
                    return Err(Error::InvalidConfig(format!(
                        "delimiter must be a single ASCII character, got `{}`",
                        src.delimiter
                    )));
                }
                let hint = match &src.schema {
                    Some(p) => SchemaHint::from_path(p)?,
                    None => SchemaHint::default(),
                };
                let options = LoadOptions {
                    delimiter: src.delimiter as u8,
                    target: src.target.clone(),
                    hint,
                };
                load_csv(&src.path, &options)
            }
        }
    }
}

/// A complete, versioned description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSource,
    /// Fraction of rows sampled once (with `seed`) before any repeat.
    #[serde(default)]
    pub subsample: Option<f64>,
    /// Fractions only; the shuffle seed comes from the repeat seed.
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub gbdt: GbdtConfig,
    #[serde(default = "default_repeats")]
    pub n_repeats: usize,
    /// Repeat `i` uses seed `seed + i` for the split, encoder and learner.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl ExperimentSpec {
    pub fn new(data: DataSource) -> Self {
        ExperimentSpec {
            version: SPEC_VERSION,
            name: None,
            data,
            subsample: None,
            split: SplitSpec::default(),
            encoder: EncoderSpec::default(),
            gbdt: GbdtConfig::default(),
            n_repeats: default_repeats(),
            seed: 0,
            confidence: default_confidence(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a TOML spec file; relative data paths in it resolve against
    /// the file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            spec.resolve_paths(dir);
        }
        Ok(spec)
    }

    /// Makes relative CSV and schema paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        if let DataSource::Csv(src) = &mut self.data {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut src.path);
            if let Some(schema) = &mut src.schema {
                fix(schema);
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Report(format!("cannot serialize spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SPEC_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported experiment spec version {} (expected {SPEC_VERSION})",
                self.version
            )));
        }
        if self.n_repeats < 1 {
            return Err(Error::InvalidConfig("n_repeats must be >= 1".into()));
        }
        if let Some(f) = self.subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("subsample must be in (0, 1], got {f}")));
            }
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        self.split.validate()?;
        self.encoder.validate()?;
        self.gbdt.validate()
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }
}

/// Build and run metadata embedded in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub commit: Option<String>,
    pub created_unix_seconds: u64,
    pub threads: usize,
}

impl Provenance {
    pub fn current() -> Self {
        Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            commit: option_env!("CTRBOOST_COMMIT").map(str::to_string),
            created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            threads: rayon::current_num_threads(),
        }
    }
}

/// Mean and, with at least two runs, the confidence half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub half_width: Option<f64>,
    pub n_runs: usize,
}

impl MetricSummary {
    pub fn from_values(metric: &str, values: Vec<f64>, confidence: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.len() == 1 {
            return Ok(MetricSummary {
                metric: metric.to_string(),
                mean: values[0],
                half_width: None,
                n_runs: 1,
                values,
            });
        }
        let agg = aggregate_runs(metric, &values, confidence)?;
        Ok(MetricSummary {
            metric: agg.metric,
            mean: agg.mean,
            half_width: Some(agg.half_width),
            n_runs: agg.n_runs,
            values: agg.values,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub n_trees: usize,
    pub valid: EvalResult,
    pub test: EvalResult,
    pub train_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub ci_method: String,
    pub confidence: f64,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub test_logloss: MetricSummary,
    /// Absent when every run's test labels were single-class.
    pub test_auroc: Option<MetricSummary>,
    pub valid_logloss: MetricSummary,
    pub valid_auroc: Option<MetricSummary>,
}

/// Data and trained model of one repeat.
pub struct RepeatOutput {
    pub record: RunRecord,
    pub model: Model,
    pub valid: Dataset,
    pub test: Dataset,
}

/// Loads and optionally subsamples the spec's data.
pub fn load_data(spec: &ExperimentSpec) -> Result<Dataset> {
    let ds = spec.data.load()?;
    match spec.subsample {
        Some(f) if f < 1.0 => subsample(&ds, f, spec.seed),
        _ => Ok(ds),
    }
}

/// Split, encode, train with early stopping on valid, evaluate on test.
pub fn run_repeat(spec: &ExperimentSpec, ds: &Dataset, repeat: usize) -> Result<RepeatOutput> {
    let seed = spec.repeat_seed(repeat);
    let (train, valid, test) = split(ds, &SplitSpec { seed, ..spec.split })?;
    let encoder = EncoderSpec {
        seed,
        ..spec.encoder.clone()
    };
    let config = GbdtConfig {
        seed,
        ..spec.gbdt.clone()
    };
    let mut train_seconds = 0.0;
    let model = fit_pipeline(&train, Some(&valid), &config, &encoder, |p| {
        train_seconds = p.train_seconds
    })?;
    let valid_eval = EvalResult::compute(valid.target(), &model.predict(&valid)?)?;
    let test_eval = EvalResult::compute(test.target(), &model.predict(&test)?)?;
    Ok(RepeatOutput {
        record: RunRecord {
            repeat,
            seed,
            n_train: train.n_rows(),
            n_valid: valid.n_rows(),
            n_test: test.n_rows(),
            n_trees: model.n_trees(),
            valid: valid_eval,
            test: test_eval,
            train_seconds,
        },
        model,
        valid,
        test,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalReport> {
    spec.validate()?;
    let ds = load_data(spec)?;
    let mut runs = Vec::with_capacity(spec.n_repeats);
    for repeat in 0..spec.n_repeats {
        let out = run_repeat(spec, &ds, repeat).map_err(|e| Error::Repeat {
            repeat,
            source: Box::new(e),
        })?;
        info!(
            "repeat {repeat}: test logloss {:.6}, auroc {:?}, {} trees",
            out.record.test.logloss, out.record.test.auroc, out.record.n_trees
        );
        runs.push(out.record);
    }
    build_report(spec, runs)
}

fn summarize(
    runs: &[RunRecord],
    confidence: f64,
    name: &str,
    pick: impl Fn(&RunRecord) -> Option<f64>,
) -> Result<Option<MetricSummary>> {
    let values: Vec<f64> = runs.iter().filter_map(pick).collect();
    if values.is_empty() {
        return Ok(None);
    }
    MetricSummary::from_values(name, values, confidence).map(Some)
}

fn build_report(spec: &ExperimentSpec, runs: Vec<RunRecord>) -> Result<EvalReport> {
    let c = spec.confidence;
    let required = |s: Option<MetricSummary>| s.ok_or(Error::EmptyInput);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        spec: spec.clone(),
        provenance: Provenance::current(),
        ci_method: CI_METHOD.to_string(),
        confidence: c,
        seeds: runs.iter().map(|r| r.seed).collect(),
        test_logloss: required(summarize(&runs, c, "test_logloss", |r| Some(r.test.logloss))?)?,
        test_auroc: summarize(&runs, c, "test_auroc", |r| r.test.auroc)?,
        valid_logloss: required(summarize(&runs, c, "valid_logloss", |r| Some(r.valid.logloss))?)?,
        valid_auroc: summarize(&runs, c, "valid_auroc", |r| r.valid.auroc)?,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::EncoderMode;

    pub(crate) fn small_spec(n_repeats: usize) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(DataSource::Synthetic(SynthSpec::CtrClone {
            n_rows: 2000,
            n_categorical: 4,
            seed: 1,
        }));
        spec.n_repeats = n_repeats;
        spec.gbdt.n_trees = 30;
        spec.gbdt.max_depth = 3;
        spec.gbdt.early_stopping_rounds = 5;
        spec
    }

    fn strip_timing(mut report: EvalReport) -> EvalReport {
        report.provenance.created_unix_seconds = 0;
        for run in &mut report.runs {
            run.train_seconds = 0.0;
        }
        report
    }

    #[test]
    fn single_repeat_has_no_half_width() {
        let report = run_experiment(&small_spec(1)).unwrap();
        assert_eq!(report.runs.len(), 1);
        assert!(report.test_logloss.half_width.is_none());
        assert_eq!(report.test_logloss.values.len(), 1);
        assert_eq!(report.seeds, vec![0]);
    }

    #[test]
    fn same_seed_same_report() {
        let spec = small_spec(2);
        let a = strip_timing(run_experiment(&spec).unwrap());
        let b = strip_timing(run_experiment(&spec).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.test_logloss.half_width.is_some());
        assert_eq!(a.seeds, vec![0, 1]);
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = r#"
            version = 1
            name = "demo"
            n_repeats = 3
            seed = 7

            [data]
            source = "synthetic"
            generator = "leakage_hazard"
            n_rows = 500

            [split]
            train = 0.8
            valid = 0.1
            test = 0.1

            [encoder]
            mode = "kfold_target"
            k_folds = 4

            [gbdt]
            n_trees = 10
            max_depth = 2
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.encoder.mode, EncoderMode::KfoldTarget);
        assert_eq!(spec.gbdt.max_depth, 2);
        assert_eq!(spec.repeat_seed(2), 9);
        assert_eq!(
            spec.data,
            DataSource::Synthetic(SynthSpec::LeakageHazard { n_rows: 500, seed: 0 })
        );
        let again = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn spec_validation() {
        let base = small_spec(1);
        let bad = [
            ExperimentSpec {
                version: 2,
                ..base.clone()
            },
            ExperimentSpec {
                n_repeats: 0,
                ..base.clone()
            },
            ExperimentSpec {
                subsample: Some(0.0),
                ..base.clone()
            },
            ExperimentSpec {
                confidence: 1.0,
                ..base.clone()
            },
        ];
        for spec in bad {
            assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
        }
        assert!(ExperimentSpec::from_toml("version = 1\n[data]\nsource = \"csv\"\npath = \"x\"\nbogus = 1").is_err());
    }

    #[test]
    fn failed_repeat_carries_context() {
        let mut spec = small_spec(1);
        spec.data = DataSource::Synthetic(SynthSpec::CtrClone {
            n_rows: 12,
            n_categorical: 2,
            seed: 0,
        });
        // More folds than training rows.
        spec.encoder = EncoderSpec {
            k_folds: 50,
            ..EncoderSpec::new(EncoderMode::KfoldTarget)
        };
        match run_experiment(&spec) {
            Err(Error::Repeat { repeat: 0, .. }) => {}
            other => panic!("expected a repeat error, got {other:?}"),
        }
    }
}
