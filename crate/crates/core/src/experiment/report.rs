use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AblationReport, CostCurveReport, EvalReport, StalenessReport};
use crate::error::{Error, Result};

/// Version of the JSON report layout. Bumped on incompatible changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Experiment(EvalReport),
    Ablation(AblationReport),
    CostCurve(CostCurveReport),
    Staleness(StalenessReport),
}

impl Report {
    pub fn kind(&self) -> &'static str {
        match self {
            Report::Experiment(_) => "experiment",
            Report::Ablation(_) => "ablation",
            Report::CostCurve(_) => "cost_curve",
            Report::Staleness(_) => "staleness",
        }
    }

    pub fn schema_version(&self) -> u32 {
        match self {
            Report::Experiment(r) => r.schema_version,
            Report::Ablation(r) => r.schema_version,
            Report::CostCurve(r) => r.schema_version,
            Report::Staleness(r) => r.schema_version,
        }
    }

    /// Serializes in the given format. JSON is lossless; CSV holds the
    /// per-row table only.
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => serde_json::to_string_pretty(self)
                .map(|mut s| {
                    s.push('\n');
                    s
                })
                .map_err(|e| Error::Report(e.to_string())),
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        match self {
            Report::Experiment(r) => {
                w.write_record([
                    "repeat",
                    "seed",
                    "n_train",
                    "n_valid",
                    "n_test",
                    "n_trees",
                    "valid_logloss",
                    "valid_auroc",
                    "test_logloss",
                    "test_auroc",
                    "train_seconds",
                ])?;
                for run in &r.runs {
                    w.write_record([
                        run.repeat.to_string(),
                        run.seed.to_string(),
                        run.n_train.to_string(),
                        run.n_valid.to_string(),
                        run.n_test.to_string(),
                        run.n_trees.to_string(),
                        run.valid.logloss.to_string(),
                        opt(run.valid.auroc),
                        run.test.logloss.to_string(),
                        opt(run.test.auroc),
                        run.train_seconds.to_string(),
                    ])?;
                }
            }
            Report::Ablation(r) => {
                w.write_record(["mode", "logloss_mean", "logloss_hw", "auroc_mean", "auroc_hw"])?;
                for row in &r.rows {
                    w.write_record([
                        row.mode.to_string(),
                        row.logloss.mean.to_string(),
                        opt(row.logloss.half_width),
                        opt(row.auroc.as_ref().map(|a| a.mean)),
                        opt(row.auroc.as_ref().and_then(|a| a.half_width)),
                    ])?;
                }
            }
            Report::CostCurve(r) => {
                w.write_record(["iteration", "wall_seconds", "cost_usd", "valid_auroc", "is_final"])?;
                for p in &r.points {
                    w.write_record([
                        p.iteration.to_string(),
                        p.wall_seconds.to_string(),
                        p.cost_usd.to_string(),
                        opt(p.valid_auroc),
                        p.is_final.to_string(),
                    ])?;
                }
            }
            Report::Staleness(r) => {
                w.write_record([
                    "policy",
                    "window",
                    "t_start",
                    "t_end",
                    "n_train_rows",
                    "logloss",
                    "auroc",
                ])?;
                for series in &r.series {
                    for p in &series.points {
                        let info = &r.windows[p.window];
                        w.write_record([
                            series.policy.to_string(),
                            p.window.to_string(),
                            info.t_start.to_string(),
                            info.t_end.to_string(),
                            p.n_train_rows.to_string(),
                            p.logloss.to_string(),
                            opt(p.auroc),
                        ])?;
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
    }
}

impl From<EvalReport> for Report {
    fn from(r: EvalReport) -> Self {
        Report::Experiment(r)
    }
}

impl From<AblationReport> for Report {
    fn from(r: AblationReport) -> Self {
        Report::Ablation(r)
    }
}

impl From<CostCurveReport> for Report {
    fn from(r: CostCurveReport) -> Self {
        Report::CostCurve(r)
    }
}

impl From<StalenessReport> for Report {
    fn from(r: StalenessReport) -> Self {
        Report::Staleness(r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

/// Writes `report` to `path`, creating parent directories as needed.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let text = report.render(format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a JSON report written by [`emit_report`].
pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: Report = serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    if report.schema_version() != REPORT_SCHEMA_VERSION {
        return Err(Error::Report(format!(
            "{}: report schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
            path.display(),
            report.schema_version()
        )));
    }
    Ok(report)
}
