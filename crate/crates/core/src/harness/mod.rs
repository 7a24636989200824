//! Experiment orchestration, audits, and reporting.

mod audits;
mod config;
mod report;
mod run;
mod tools;

use serde::{Deserialize, Serialize};

pub use audits::{audit_suite, fitted_rate_params, influence_constants};
pub use config::{
    Context, ExperimentConfig, Format, LabelKind, MeasureChoice, ProcessKind, AUDIT_NAMES, CONFIG_VERSION,
};
pub use report::{
    emit_experiment, parse_reports_csv, parse_reports_json, read_trace_csv, read_traces_dir, trace_file_name,
    write_checkpoints_csv, write_curve_csv, write_reports, write_trace_csv,
};
pub use run::{
    checkpoints, rate_curve, run_experiment, run_trial, Checkpoint, CurvePoint, Experiment, TraceRow, TrialTrace,
};
pub use tools::{run_covertree, run_geometry, GeometryReport, RatePoint};

/// Outcome of one audit. A skipped audit passes and carries its reason as
/// the single witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audit: String,
    pub pass: bool,
    pub observed: Option<f64>,
    pub bound: Option<f64>,
    pub slack: Option<f64>,
    pub witnesses: Vec<String>,
}

impl AuditReport {
    /// Passes iff `observed <= bound + slack` and no witness was raised.
    pub fn checked(audit: &str, observed: f64, bound: f64, slack: f64, witnesses: Vec<String>) -> Self {
        let pass = observed <= bound + slack && witnesses.is_empty();
        let mut witnesses = witnesses;
        if !pass && witnesses.is_empty() {
            witnesses.push(format!("observed {observed} exceeds bound {bound} + slack {slack}"));
        }
        AuditReport {
            audit: audit.to_string(),
            pass,
            observed: finite(observed),
            bound: finite(bound),
            slack: finite(slack),
            witnesses,
        }
    }

    pub fn skipped(audit: &str, reason: &str) -> Self {
        AuditReport {
            audit: audit.to_string(),
            pass: true,
            observed: None,
            bound: None,
            slack: None,
            witnesses: vec![format!("skipped: {reason}")],
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.observed.is_none() && self.witnesses.first().is_some_and(|w| w.starts_with("skipped: "))
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
