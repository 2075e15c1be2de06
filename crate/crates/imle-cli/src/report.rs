//! CSV report emission: training traces, verification suites, and the
//! Parzen evaluation summary. Comma separators, '.' decimals, '\n' line
//! ends; floats print in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use imle_core::{ParzenEstimate, TrainTrace};

use crate::CliError;

pub const TRACE_HEADER: &str = "outer_iter,mean_sqdist_pre,mean_sqdist_post,wall_ms,param_norm";

pub fn trace_csv(trace: &TrainTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.outer_iter, r.mean_sqdist_pre, r.mean_sqdist_post, r.wall_ms, r.param_norm
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &TrainTrace) -> Result<(), CliError> {
    fs::write(path, trace_csv(trace))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Outcome of one verification row. `Info` rows are reported without a hard
/// tolerance and never fail a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    Pass,
    Fail,
    Info,
}

impl RowOutcome {
    fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "true",
            Self::Fail => "false",
            Self::Info => "info",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub check_id: String,
    pub statistic: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub outcome: RowOutcome,
}

impl VerifyRow {
    /// Two-sided check: pass iff |statistic - expected| <= tolerance.
    pub fn two_sided(check_id: impl Into<String>, statistic: f64, expected: f64, tolerance: f64) -> Self {
        let outcome = if (statistic - expected).abs() <= tolerance {
            RowOutcome::Pass
        } else {
            RowOutcome::Fail
        };
        Self {
            check_id: check_id.into(),
            statistic,
            expected,
            tolerance,
            outcome,
        }
    }

    /// One-sided check: pass iff statistic <= bound (expected column carries
    /// the bound, tolerance 0).
    pub fn at_most(check_id: impl Into<String>, statistic: f64, bound: f64) -> Self {
        let outcome = if statistic <= bound {
            RowOutcome::Pass
        } else {
            RowOutcome::Fail
        };
        Self {
            check_id: check_id.into(),
            statistic,
            expected: bound,
            tolerance: 0.0,
            outcome,
        }
    }

    pub fn info(check_id: impl Into<String>, statistic: f64) -> Self {
        Self {
            check_id: check_id.into(),
            statistic,
            expected: f64::NAN,
            tolerance: f64::INFINITY,
            outcome: RowOutcome::Info,
        }
    }
}

pub const VERIFY_HEADER: &str = "check_id,statistic,expected,tolerance,pass";

pub fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut out = String::from(VERIFY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.check_id,
            r.statistic,
            r.expected,
            r.tolerance,
            r.outcome.as_str()
        );
    }
    out
}

pub fn write_verify_csv(path: &Path, rows: &[VerifyRow]) -> Result<(), CliError> {
    fs::write(path, verify_csv(rows))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub const EVAL_HEADER: &str = "sigma,mean_loglik,stderr,n_test,n_validation,centers";

pub fn eval_csv(est: &ParzenEstimate, n_validation: usize, centers: usize) -> String {
    format!(
        "{EVAL_HEADER}\n{},{},{},{},{},{}\n",
        est.sigma,
        est.mean,
        est.stderr,
        est.per_point.len(),
        n_validation,
        centers
    )
}

/// One sample per row, coordinates comma-separated, no header.
pub fn samples_csv(samples: &[imle_core::Vec64]) -> String {
    let mut out = String::new();
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
