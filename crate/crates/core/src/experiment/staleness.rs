use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::{load_data, ExperimentSpec, Provenance};
use crate::data::{holdout, Dataset};
use crate::encode::EncoderSpec;
use crate::error::{Error, Result};
use crate::gbdt::{fit_pipeline, GbdtConfig, Model};
use crate::metrics::EvalResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainPolicy {
    /// Train once on the warmup windows.
    Never,
    /// Retrain on everything seen so far before each window.
    EveryWindow,
}

impl RetrainPolicy {
    pub const ALL: [RetrainPolicy; 2] = [RetrainPolicy::Never, RetrainPolicy::EveryWindow];
}

impl fmt::Display for RetrainPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrainPolicy::Never => "never",
            RetrainPolicy::EveryWindow => "every_window",
        })
    }
}

impl FromStr for RetrainPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "never" => Ok(RetrainPolicy::Never),
            "every_window" | "daily" => Ok(RetrainPolicy::EveryWindow),
            other => Err(Error::InvalidConfig(format!("unknown retrain policy `{other}`"))),
        }
    }
}

fn default_time_column() -> String {
    crate::synth::TIME_COLUMN.to_string()
}

fn default_windows() -> usize {
    10
}

fn default_warmup() -> usize {
    3
}

fn default_valid_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StalenessSpec {
    /// Numeric column that orders the stream.
    #[serde(default = "default_time_column")]
    pub time_column: String,
    /// Number of equal-count windows.
    #[serde(default = "default_windows")]
    pub n_windows: usize,
    /// Time span per window; overrides `n_windows` when set.
    #[serde(default)]
    pub window_time: Option<f64>,
    #[serde(default = "default_warmup")]
    pub warmup_windows: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<RetrainPolicy>,
    /// Share of each training set held out for early stopping.
    #[serde(default = "default_valid_fraction")]
    pub valid_fraction: f64,
}

fn default_policies() -> Vec<RetrainPolicy> {
    RetrainPolicy::ALL.to_vec()
}

impl Default for StalenessSpec {
    fn default() -> Self {
        StalenessSpec {
            time_column: default_time_column(),
            n_windows: default_windows(),
            window_time: None,
            warmup_windows: default_warmup(),
            policies: default_policies(),
            valid_fraction: default_valid_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub index: usize,
    /// Offset into the time-sorted stream.
    pub start_row: usize,
    pub n_rows: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub warmup: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub window: usize,
    pub n_train_rows: usize,
    pub logloss: f64,
    /// `None` when the window's labels are single-class.
    pub auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySeries {
    pub policy: RetrainPolicy,
    pub points: Vec<WindowPoint>,
}

impl PolicySeries {
    /// Mean AUROC over the defined points whose window satisfies `keep`.
    pub fn mean_auroc(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let values: Vec<f64> = self
            .points
            .iter()
            .filter(|p| keep(p.window))
            .filter_map(|p| p.auroc)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub schema_version: u32,
    pub staleness: StalenessSpec,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub windows: Vec<WindowInfo>,
    pub series: Vec<PolicySeries>,
}

impl StalenessReport {
    pub fn series(&self, policy: RetrainPolicy) -> Option<&PolicySeries> {
        self.series.iter().find(|s| s.policy == policy)
    }
}

/// Row ranges of each window over the time-sorted stream.
fn cut_windows(times: &[f64], spec: &StalenessSpec) -> Result<Vec<(usize, usize)>> {
    let n = times.len();
    let ranges: Vec<(usize, usize)> = match spec.window_time {
        Some(len) => {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidConfig(format!("window_time must be positive, got {len}")));
            }
            let t0 = times[0];
            let mut ranges = Vec::new();
            let mut start = 0;
            while start < n {
                let bucket = ((times[start] - t0) / len).floor();
                let end = start + times[start..].partition_point(|&t| ((t - t0) / len).floor() <= bucket);
                ranges.push((start, end));
                start = end;
            }
            ranges
        }
        None => {
            let m = spec.n_windows;
            if m == 0 || m > n {
                return Err(Error::InvalidConfig(format!("cannot cut {n} rows into {m} windows")));
            }
            (0..m).map(|k| (k * n / m, (k + 1) * n / m)).collect()
        }
    };
    if ranges.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "staleness simulation needs at least 3 windows, got {}",
            ranges.len()
        )));
    }
    if spec.warmup_windows < 1 || spec.warmup_windows >= ranges.len() {
        return Err(Error::InvalidConfig(format!(
            "warmup_windows must be in [1, {}), got {}",
            ranges.len(),
            spec.warmup_windows
        )));
    }
    Ok(ranges)
}

fn fit(ds: &Dataset, exp: &ExperimentSpec, valid_fraction: f64) -> Result<Model> {
    let seed = exp.seed;
    let encoder = EncoderSpec {
        seed,
        ..exp.encoder.clone()
    };
    let config = GbdtConfig {
        seed,
        ..exp.gbdt.clone()
    };
    if config.early_stopping_rounds == 0 {
        return fit_pipeline(ds, None, &config, &encoder, |_| {});
    }
    let (train, valid) = holdout(ds, valid_fraction, seed)?;
    fit_pipeline(&train, Some(&valid), &config, &encoder, |_| {})
}

/// Cuts the time-ordered stream into windows and evaluates each policy on
/// every post-warmup window.
pub fn simulate_staleness(spec: &StalenessSpec, exp: &ExperimentSpec) -> Result<StalenessReport> {
    exp.validate()?;
    if spec.policies.is_empty() {
        return Err(Error::InvalidConfig("no retrain policy selected".into()));
    }
    let ds = load_data(exp)?;
    let times = ds
        .feature(&spec.time_column)
        .ok_or_else(|| Error::UnknownColumn(spec.time_column.clone()))?
        .as_numerical()
        .ok_or_else(|| Error::InvalidConfig(format!("time column `{}` must be numerical", spec.time_column)))?
        .values();
    if times.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidDataset(format!(
            "time column `{}` has missing values",
            spec.time_column
        )));
    }
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted_times: Vec<f64> = order.iter().map(|&r| times[r]).collect();
    let ranges = cut_windows(&sorted_times, spec)?;
    let warmup = spec.warmup_windows;

    let windows: Vec<WindowInfo> = ranges
        .iter()
        .enumerate()
        .map(|(index, &(a, b))| WindowInfo {
            index,
            start_row: a,
            n_rows: b - a,
            t_start: sorted_times[a],
            t_end: sorted_times[b - 1],
            warmup: index < warmup,
        })
        .collect();
    let rows = |a: usize, b: usize| ds.take_rows(&order[a..b]);
    let evaluate = |model: &Model, window: usize, n_train_rows: usize| -> Result<WindowPoint> {
        let (a, b) = ranges[window];
        let test = rows(a, b);
        let eval = EvalResult::compute(test.target(), &model.predict(&test)?)?;
        Ok(WindowPoint {
            window,
            n_train_rows,
            logloss: eval.logloss,
            auroc: eval.auroc,
        })
    };

    let mut series = Vec::with_capacity(spec.policies.len());
    for &policy in &spec.policies {
        let mut points = Vec::new();
        match policy {
            RetrainPolicy::Never => {
                let end = ranges[warmup - 1].1;
                let model = fit(&rows(0, end), exp, spec.valid_fraction)?;
                for window in warmup..ranges.len() {
                    points.push(evaluate(&model, window, end)?);
                }
            }
            RetrainPolicy::EveryWindow => {
                for (window, &(end, _)) in ranges.iter().enumerate().skip(warmup) {
                    let model = fit(&rows(0, end), exp, spec.valid_fraction)?;
                    points.push(evaluate(&model, window, end)?);
                }
            }
        }
        info!("staleness policy {policy}: {} evaluation windows", points.len());
        series.push(PolicySeries { policy, points });
    }
    Ok(StalenessReport {
        schema_version: super::REPORT_SCHEMA_VERSION,
        staleness: spec.clone(),
        spec: exp.clone(),
        provenance: Provenance::current(),
        windows,
        series,
    })
}
