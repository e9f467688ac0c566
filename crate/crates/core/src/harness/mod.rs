//! Experiment orchestration: configs, sweeps, the regression experiment,
//! exact fixtures and CSV reports.

pub mod config;
pub mod exact;
pub mod fig1;
pub mod report;
pub mod sweeps;

use std::fmt;

pub use config::{AlphaRule, ExperimentConfig, GnnSpec, Optimizer, PeSpec, Probe, Target, TrainSpec};
pub use exact::run_fixture_suite;
pub use fig1::{run_fig1_experiment, Fig1Outcome};
pub use report::{emit_report, ConvergenceReport, Decay, Flag, ReportRow};
pub use sweeps::{
    run_assumption_sweep, run_davis_kahan_sweep, run_distance_sweep, run_filter_sweep, run_mpnn_sweep,
    run_signnet_sweep, run_smoothing_sweep,
};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn medians_text(d: &Decay) -> String {
    let parts: Vec<String> = d.medians.iter().map(|(n, m)| format!("n={n}:{m:.4e}")).collect();
    parts.join(" ")
}

/// Median at the largest `n` below the smallest, nonincreasing across consecutive sizes.
pub fn decay_assertion(report: &ConvergenceReport, metric: &str) -> Assertion {
    match report.decay(metric) {
        Some(d) => Assertion::new(&format!("{metric}_decays"), d.decays(), medians_text(&d)),
        None => Assertion::new(&format!("{metric}_decays"), false, "fewer than two sizes with data".into()),
    }
}

/// `median(n_max) < factor · median(n_min)`.
pub fn ratio_assertion(report: &ConvergenceReport, metric: &str, factor: f64) -> Assertion {
    let name = format!("{metric}_ratio_below_{factor}");
    match report.decay(metric) {
        Some(d) => {
            let r = d.ratio();
            Assertion::new(&name, r < factor, format!("ratio {r:.4} ({})", medians_text(&d)))
        }
        None => Assertion::new(&name, false, "fewer than two sizes with data".into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Assumption,
    Signnet,
    Distpe,
    Filter,
    Smoothing,
    Mpnn,
    Fig1,
    Fixtures,
}

pub struct SuiteOutcome {
    pub report: ConvergenceReport,
    pub assertions: Vec<Assertion>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn with_decays(report: ConvergenceReport, prefixes: &[&str]) -> SuiteOutcome {
    let assertions = report
        .metrics()
        .iter()
        .filter(|m| prefixes.iter().any(|p| m.starts_with(p)))
        .map(|m| decay_assertion(&report, m))
        .collect();
    SuiteOutcome { report, assertions }
}

/// Runs one suite with its built-in assertions.
pub fn run_suite(suite: Suite, cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    Ok(match suite {
        Suite::Assumption => with_decays(run_assumption_sweep(cfg)?, &["shift_gap"]),
        Suite::Signnet => with_decays(run_signnet_sweep(cfg)?, &["alignment_"]),
        Suite::Distpe => with_decays(run_distance_sweep(cfg)?, &["distance_pe_error"]),
        Suite::Smoothing => with_decays(run_smoothing_sweep(cfg)?, &["smoothing_error"]),
        Suite::Mpnn => with_decays(run_mpnn_sweep(cfg)?, &["mpnn_error_"]),
        Suite::Filter => {
            let report = run_filter_sweep(cfg)?;
            let mut assertions = vec![ratio_assertion(&report, "ideal_frobenius", 0.5)];
            let raw = report.decay("raw_frobenius").map(|d| d.ratio());
            assertions.push(Assertion::new(
                "raw_frobenius_stable",
                raw.is_some_and(|r| (0.5..=2.0).contains(&r)),
                format!("ratio {raw:?}"),
            ));
            SuiteOutcome { report, assertions }
        }
        Suite::Fig1 => {
            let out = run_fig1_experiment(cfg)?;
            let norm_test = out.median_mse("test", true);
            let raw_test = out.median_mse("test", false);
            let norm_train = out.median_mse("train", true);
            let assertions = vec![
                Assertion::new(
                    "normalized_beats_raw_on_test",
                    matches!((norm_test, raw_test), (Some(a), Some(b)) if a < b),
                    format!("normalized {norm_test:?}, raw {raw_test:?}"),
                ),
                Assertion::new(
                    "normalized_generalizes",
                    matches!((norm_test, norm_train), (Some(a), Some(b)) if a <= 2.0 * b),
                    format!("test {norm_test:?}, train {norm_train:?}"),
                ),
            ];
            SuiteOutcome { report: out.report, assertions }
        }
        Suite::Fixtures => {
            let (report, assertions) = run_fixture_suite()?;
            SuiteOutcome { report, assertions }
        }
    })
}
