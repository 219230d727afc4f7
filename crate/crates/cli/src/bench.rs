//! Benchmark rows shaped like the results table: potentials time, cumulative time,
//! primal, dual, open and closed nodes per setting.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::format::TimelineRow;

/// `base`, or `nK` for the strengthened encoding with `K` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    Base,
    Strengthened(usize),
}

impl FromStr for Setting {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "base" {
            return Ok(Setting::Base);
        }
        match s.strip_prefix('n').and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k >= 1 => Ok(Setting::Strengthened(k)),
            _ => Err(CliError::Usage(format!("unknown setting {s:?}; use base or n1, n2, ..."))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Base => write!(f, "base"),
            Setting::Strengthened(k) => write!(f, "n{k}"),
        }
    }
}

pub fn parse_settings(s: &str) -> Result<Vec<Setting>, CliError> {
    let v: Vec<Setting> = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(CliError::Usage("no settings given".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub setting: String,
    /// Seconds spent computing potentials (0 for the base encoding).
    pub potentials_time: f64,
    /// Potentials plus compile plus solve, in seconds.
    pub cumulative_time: f64,
    pub primal: Option<f64>,
    pub dual: Option<f64>,
    pub nodes_open: u64,
    pub nodes_closed: u64,
    /// Solver status, or `error` when the setting failed before solving.
    pub status: String,
    pub root_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchRow {
    pub fn failed(setting: &Setting, potentials_time: f64, cumulative_time: f64, err: &CliError) -> Self {
        BenchRow {
            setting: setting.to_string(),
            potentials_time,
            cumulative_time,
            primal: None,
            dual: None,
            nodes_open: 0,
            nodes_closed: 0,
            status: "error".into(),
            root_bound: None,
            error: Some(err.to_string()),
        }
    }

    fn solved(&self) -> bool {
        self.status == "optimal" || self.status == "infeasible"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimeline {
    pub setting: String,
    pub points: Vec<TimelineRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub instance: String,
    /// `maximize` or `minimize`; decides which primal and dual values are better.
    pub sense: String,
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    pub rows: Vec<BenchRow>,
    /// Index into `rows`.
    pub best: Option<usize>,
    pub timelines: Vec<RunTimeline>,
}

pub const CSV_HEADER: [&str; 10] =
    ["setting", "alg1_time", "cumul_time", "primal", "dual", "open", "closed", "status", "root_bound", "best"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Compares two rows, `Less` meaning `a` is better.
///
/// A run that finished beats one stopped by a limit, and finished runs compare by
/// cumulative time. Ties go to the better incumbent, then to the tighter dual bound.
/// Failed settings rank last.
pub fn compare_rows(a: &BenchRow, b: &BenchRow, maximize: bool) -> Ordering {
    let failed = |r: &BenchRow| r.status == "error";
    let time = |r: &BenchRow| if r.solved() { r.cumulative_time } else { f64::INFINITY };
    // Better value first: larger primal and smaller dual when maximizing.
    let by = |x: Option<f64>, y: Option<f64>, larger_better: bool| -> Ordering {
        match (x, y) {
            (Some(x), Some(y)) => {
                let o = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
                if larger_better {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    };
    failed(a)
        .cmp(&failed(b))
        .then_with(|| time(a).partial_cmp(&time(b)).unwrap_or(Ordering::Equal))
        .then_with(|| by(a.primal, b.primal, maximize))
        .then_with(|| by(a.dual, b.dual, !maximize))
}

pub fn best_row(rows: &[BenchRow], maximize: bool) -> Option<usize> {
    (0..rows.len()).filter(|&i| rows[i].status != "error").min_by(|&i, &j| compare_rows(&rows[i], &rows[j], maximize))
}

impl BenchReport {
    pub fn mark_best(&mut self) {
        self.best = best_row(&self.rows, self.sense == "maximize");
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                r.setting.clone(),
                r.potentials_time.to_string(),
                r.cumulative_time.to_string(),
                opt(r.primal),
                opt(r.dual),
                r.nodes_open.to_string(),
                r.nodes_closed.to_string(),
                r.status.clone(),
                opt(r.root_bound),
                if self.best == Some(i) { "*".into() } else { String::new() },
            ])?;
        }
        csv_string(w)
    }

    pub fn timelines_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["setting", "t", "dual", "primal", "open", "closed"])?;
        for run in &self.timelines {
            for p in &run.points {
                w.write_record([
                    run.setting.clone(),
                    p.t.to_string(),
                    opt(p.dual),
                    opt(p.primal),
                    p.open.to_string(),
                    p.closed.to_string(),
                ])?;
            }
        }
        csv_string(w)
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Format(e.to_string()))
}
