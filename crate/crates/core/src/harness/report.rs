use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;

pub const CSV_HEADER: &str = "experiment_id,n,trial,metric,value,flag";

/// Why a row is excluded from statistics. `Ok` rows count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Ok,
    Tie,
    Diverged,
    Inconclusive,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Ok => "ok",
            Flag::Tie => "tie",
            Flag::Diverged => "diverged",
            Flag::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment_id: String,
    pub n: usize,
    pub trial: usize,
    pub metric: String,
    pub value: f64,
    pub flag: Flag,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMetadata {
    pub experiment_id: String,
    pub code_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub rows: usize,
    pub flagged_rows: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

/// Median comparison between the smallest and largest `n` of a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Decay {
    pub metric: String,
    /// `(n, median)` per schedule entry with at least one unflagged value.
    pub medians: Vec<(usize, f64)>,
    pub nonincreasing_pairs: usize,
}

impl Decay {
    pub fn first(&self) -> f64 {
        self.medians[0].1
    }

    pub fn last(&self) -> f64 {
        self.medians[self.medians.len() - 1].1
    }

    /// `median(n_max) / median(n_min)`.
    pub fn ratio(&self) -> f64 {
        self.last() / self.first()
    }

    /// Last median below the first, with at least `min(3, pairs)` consecutive nonincreasing pairs.
    pub fn decays(&self) -> bool {
        let pairs = self.medians.len().saturating_sub(1);
        pairs > 0 && self.last() < self.first() && self.nonincreasing_pairs >= pairs.min(3)
    }
}

impl ConvergenceReport {
    pub fn new(experiment_id: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            rows: Vec::new(),
            metadata: ReportMetadata {
                experiment_id: experiment_id.to_string(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                seed: cfg.seed,
                config: cfg.clone(),
                rows: 0,
                flagged_rows: 0,
                notes: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, n: usize, trial: usize, metric: &str, value: f64, flag: Flag) {
        let flag = if flag == Flag::Ok && !value.is_finite() { Flag::Diverged } else { flag };
        self.rows.push(ReportRow {
            experiment_id: self.metadata.experiment_id.clone(),
            n,
            trial,
            metric: metric.to_string(),
            value,
            flag,
        });
        self.metadata.rows = self.rows.len();
        self.metadata.flagged_rows += usize::from(flag != Flag::Ok);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.metadata.notes.push(text.into());
    }

    /// Metric names in order of first appearance.
    pub fn metrics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric.clone());
            }
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    /// Unflagged values of `metric` at `n`.
    pub fn values(&self, metric: &str, n: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.n == n && r.flag == Flag::Ok)
            .map(|r| r.value)
            .collect()
    }

    pub fn median(&self, metric: &str, n: usize) -> Option<f64> {
        median(&self.values(metric, n))
    }

    pub fn flag_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.metadata.flagged_rows as f64 / self.rows.len() as f64
        }
    }

    pub fn decay(&self, metric: &str) -> Option<Decay> {
        let medians: Vec<(usize, f64)> =
            self.sizes().into_iter().filter_map(|n| self.median(metric, n).map(|m| (n, m))).collect();
        if medians.len() < 2 {
            return None;
        }
        let nonincreasing_pairs = medians.windows(2).filter(|w| w[1].1 <= w[0].1).count();
        Some(Decay { metric: metric.to_string(), medians, nonincreasing_pairs })
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{:e},{}", r.experiment_id, r.n, r.trial, r.metric, r.value, r.flag)?;
        }
        Ok(())
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Path of the JSON sidecar written next to `csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Writes the CSV at `path` and the metadata sidecar next to it.
pub fn emit_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    std::fs::write(path, csv)?;
    let mut meta = serde_json::to_string_pretty(&report.metadata)
        .map_err(|e| crate::error::Error::Config(e.to_string()))?;
    meta.push('\n');
    std::fs::write(sidecar_path(path), meta)?;
    Ok(())
}
