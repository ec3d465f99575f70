use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{write_text, Aggregates};
use super::{run_trials, Algorithm, InstanceSource, SeqSpec, TrialConfig};
use crate::error::{Error, Result};
use crate::model::Family;

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub param: f64,
    pub aggregates: Aggregates,
    /// Mean pulls divided by the previous point's mean pulls.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub name: String,
    pub rows: Vec<CurveRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CurveTable {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "param",
            "trials",
            "correct_rate",
            "mean_pulls",
            "median_pulls",
            "p95_pulls",
            "ratio",
            "hardness",
            "gap_entropy",
            "benchmark_f",
        ])?;
        for r in &self.rows {
            let a = &r.aggregates;
            w.write_record([
                r.param.to_string(),
                a.trials.to_string(),
                a.correct_rate.to_string(),
                a.mean_pulls.to_string(),
                a.median_pulls.to_string(),
                a.p95_pulls.to_string(),
                opt(r.ratio),
                opt(a.references.hardness),
                opt(a.references.gap_entropy),
                opt(a.references.benchmark_f),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes JSON for a `.json` path and CSV otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => self.to_json()?,
            _ => self.to_csv()?,
        };
        write_text(path, &text)
    }
}

/// Runs one trial batch per grid value and reports adjacent mean-pull ratios.
pub fn scaling_sweep<F>(name: &str, grid: &[f64], make: F) -> Result<CurveTable>
where
    F: Fn(f64) -> Result<TrialConfig>,
{
    if grid.is_empty() {
        return Err(Error::Config("scaling sweep needs a non-empty grid".into()));
    }
    let mut rows: Vec<CurveRow> = Vec::with_capacity(grid.len());
    for &param in grid {
        let report = run_trials(&make(param)?)?;
        let ratio = rows.last().map(|prev| report.aggregates.mean_pulls / prev.aggregates.mean_pulls);
        rows.push(CurveRow {
            param,
            aggregates: report.aggregates,
            ratio,
        });
    }
    Ok(CurveTable {
        name: name.to_string(),
        rows,
    })
}

/// Built-in sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Sign test at gaps `2^-2 .. 2^-6`, `delta = 0.05`, `xi = 0`.
    SignScaling,
    /// Distribution-based elimination on clustered instances with
    /// `n in {10, 20, 40}`, gap 0.2, `delta = 0.1`.
    ClusteredScaling,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign-scaling" => Ok(Suite::SignScaling),
            "clustered-scaling" => Ok(Suite::ClusteredScaling),
            _ => Err(Error::Config(format!("unknown suite '{s}'"))),
        }
    }
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::SignScaling => "sign-scaling",
            Suite::ClusteredScaling => "clustered-scaling",
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        match self {
            Suite::SignScaling => (2..=6).map(|k| 2f64.powi(-k)).collect(),
            Suite::ClusteredScaling => vec![10.0, 20.0, 40.0],
        }
    }

    pub fn config(&self, param: f64, trials: u32, seed: u64) -> TrialConfig {
        match self {
            Suite::SignScaling => TrialConfig::sign(0.0, param, 0.05, SeqSpec::Geometric(std::f64::consts::E), trials, seed),
            Suite::ClusteredScaling => TrialConfig::new(
                Algorithm::DistrBasedElim,
                InstanceSource::Clustered {
                    n: param as usize,
                    gap: 0.2,
                    best_mean: 0.7,
                    family: Family::Gaussian,
                },
                0.1,
                trials,
                seed,
            ),
        }
    }
}

pub fn suite_sweep(suite: Suite, trials: u32, seed: u64) -> Result<CurveTable> {
    scaling_sweep(suite.name(), &suite.grid(), |p| Ok(suite.config(p, trials, seed)))
}
