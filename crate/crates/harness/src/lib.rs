//! Command-line harness around `chemobound-core`: admissibility checks,
//! bound reports, simulations, inequality audits and `m1` sweeps.
//!
//! Exit codes: 0 success, 1 inadmissible configuration or failed check,
//! 2 configuration error, 3 runtime failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("inadmissible: {0}")]
    Inadmissible(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Inadmissible(_) => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 3,
        }
    }
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)` so tiny bounds do not print hundreds of zeros. Used for
/// CSV data, which must not lose precision.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// `x` rounded to 12 significant digits, for report text. This drops
/// last-ulp noise (2559.9999999999923 prints as 2560) at the same
/// resolution as the 1e-12 audit tolerances.
pub fn audit(x: f64) -> String {
    if !x.is_finite() {
        return num(x);
    }
    num(format!("{x:.11e}").parse().unwrap_or(x))
}

/// Optional number; empty when absent (CSV convention).
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn opt_audit(x: Option<f64>) -> String {
    x.map(audit).unwrap_or_default()
}
