//! Exit codes and the JSON error summary printed on failure.

use std::process::ExitCode;

use normgraph::Error;

pub const GENERIC: u8 = 1;
pub const CONFIG: u8 = 3;
pub const VERSION_MISMATCH: u8 = 4;
pub const STALE_INDEX: u8 = 5;
pub const MISSING_INDEX: u8 = 6;
pub const INGEST_FAILED: u8 = 7;
pub const PARTIAL_FAILURE: u8 = 8;

/// Failure raised by a subcommand after it already wrote its outputs.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} evaluation cells failed")]
pub struct PartialFailure {
    pub failed: usize,
    pub total: usize,
}

fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    if e.downcast_ref::<PartialFailure>().is_some() {
        return (PARTIAL_FAILURE, "partial_failure");
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidSectionCode(_)) => (CONFIG, "config"),
        Some(Error::Manifest(_)) => (CONFIG, "manifest"),
        Some(Error::VersionMismatch { .. }) => (VERSION_MISMATCH, "version_mismatch"),
        Some(Error::StaleIndex { .. }) => (STALE_INDEX, "stale_index"),
        Some(Error::MissingIndex { .. }) => (MISSING_INDEX, "missing_index"),
        Some(Error::DocumentsFailed { .. } | Error::NothingIngested(_)) => {
            (INGEST_FAILED, "ingest_failed")
        }
        Some(_) => (GENERIC, "error"),
        None => (GENERIC, "error"),
    }
}

/// The error chain joined with ": ", skipping causes whose text the outer
/// messages already include.
fn message(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

pub fn report(e: &anyhow::Error) -> ExitCode {
    let (code, kind) = classify(e);
    let message = message(e);
    eprintln!("error: {message}");
    let summary = serde_json::json!({
        "status": "error",
        "code": code,
        "kind": kind,
        "message": message,
    });
    println!("{summary}");
    ExitCode::from(code)
}
