use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::stats::{benchmark_f, gap_profile};

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "seed",
    "answer",
    "correct",
    "total_pulls",
    "rounds",
    "eliminations",
    "wall_time_ns",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u32,
    pub seed: u64,
    /// `above`/`below`, an arm id, or `error`.
    pub answer: String,
    pub correct: bool,
    pub total_pulls: u64,
    pub per_arm_pulls: Vec<u64>,
    pub rounds: u32,
    pub eliminations: u32,
    pub wall_time_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Theoretical reference quantities of the instance, where defined.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub hardness: Option<f64>,
    pub gap_entropy: Option<f64>,
    pub benchmark_f: Option<f64>,
}

impl References {
    pub fn for_instance(inst: &Instance) -> Self {
        match gap_profile(inst) {
            Ok(p) if inst.len() > 1 => References {
                hardness: Some(p.hardness),
                gap_entropy: Some(p.entropy),
                benchmark_f: None,
            },
            _ => References::default(),
        }
    }

    pub fn for_sign_gap(gap: f64) -> Self {
        References {
            hardness: Some(gap.powi(-2)),
            gap_entropy: None,
            benchmark_f: benchmark_f(gap).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: u32,
    pub correct: u32,
    pub correct_rate: f64,
    pub mean_pulls: f64,
    pub median_pulls: f64,
    /// Nearest-rank 95th percentile.
    pub p95_pulls: u64,
    pub references: References,
}

impl Aggregates {
    pub fn from_rows(rows: &[TrialRow], references: References) -> Self {
        let trials = rows.len() as u32;
        let correct = rows.iter().filter(|r| r.correct).count() as u32;
        let mut pulls: Vec<u64> = rows.iter().map(|r| r.total_pulls).collect();
        pulls.sort_unstable();
        let n = pulls.len();
        let (mean, median, p95) = if n == 0 {
            (0.0, 0.0, 0)
        } else {
            let mean = pulls.iter().map(|&p| p as f64).sum::<f64>() / n as f64;
            let median = if n % 2 == 1 {
                pulls[n / 2] as f64
            } else {
                (pulls[n / 2 - 1] as f64 + pulls[n / 2] as f64) / 2.0
            };
            let rank = (0.95 * n as f64).ceil() as usize;
            (mean, median, pulls[rank.clamp(1, n) - 1])
        };
        Aggregates {
            trials,
            correct,
            correct_rate: if trials == 0 { 0.0 } else { correct as f64 / trials as f64 },
            mean_pulls: mean,
            median_pulls: median,
            p95_pulls: p95,
            references,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub label: String,
    pub rows: Vec<TrialRow>,
    pub aggregates: Aggregates,
}

impl TrialReport {
    pub fn new(label: String, rows: Vec<TrialRow>, references: References) -> Self {
        let aggregates = Aggregates::from_rows(&rows, references);
        TrialReport {
            label,
            rows,
            aggregates,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.answer.clone(),
                r.correct.to_string(),
                r.total_pulls.to_string(),
                r.rounds.to_string(),
                r.eliminations.to_string(),
                r.wall_time_ns.to_string(),
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

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format '{s}'"))),
        }
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_report(report: &TrialReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json()?,
    };
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: u32, pulls: u64, correct: bool) -> TrialRow {
        TrialRow {
            trial,
            seed: 1000 + trial as u64,
            answer: if correct { "above".into() } else { "below".into() },
            correct,
            total_pulls: pulls,
            per_arm_pulls: vec![pulls],
            rounds: 2,
            eliminations: 0,
            wall_time_ns: 0,
            error: None,
        }
    }

    #[test]
    fn aggregates() {
        let rows: Vec<_> = (0..20).map(|i| row(i, (i as u64 + 1) * 10, i % 4 != 0)).collect();
        let a = Aggregates::from_rows(&rows, References::default());
        assert_eq!(a.correct, 15);
        assert_eq!(a.correct_rate, 0.75);
        assert_eq!(a.mean_pulls, 105.0);
        assert_eq!(a.median_pulls, 105.0);
        assert_eq!(a.p95_pulls, 190);
        let odd = Aggregates::from_rows(&rows[..3], References::default());
        assert_eq!(odd.median_pulls, 20.0);
        assert_eq!(odd.p95_pulls, 30);
    }

    #[test]
    fn csv_layout() {
        let rep = TrialReport::new("x".into(), vec![row(0, 5, true), row(1, 7, false)], References::default());
        let csv = rep.to_csv().unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "trial,seed,answer,correct,total_pulls,rounds,eliminations,wall_time_ns");
        assert_eq!(lines[1], "0,1000,above,true,5,2,0,0");
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn json_round_trip() {
        let mut rows = vec![row(0, 5, true), row(1, 7, false)];
        rows[1].error = Some("round limit".into());
        let rep = TrialReport::new("x".into(), rows, References::for_sign_gap(0.1));
        let back = TrialReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let rep = TrialReport::new("x".into(), vec![row(0, 1, true)], References::default());
        let err = write_report(&rep, ReportFormat::Csv, Path::new("/nonexistent-dir/r.csv")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn formats() {
        assert_eq!(ReportFormat::from_path(Path::new("a.json")), ReportFormat::Json);
        assert_eq!(ReportFormat::from_path(Path::new("a.csv")), ReportFormat::Csv);
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    }
}
