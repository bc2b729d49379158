//! Claim records and their renderings.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// One checked statement. Every report row has this shape.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub paper_ref: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub runtime_ms: u64,
    #[serde(default)]
    pub details: Value,
}

impl ClaimRecord {
    pub fn new(claim_id: impl Into<String>, paper_ref: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        ClaimRecord {
            claim_id: claim_id.into(),
            paper_ref: paper_ref.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            runtime_ms: 0,
            details: Value::Null,
        }
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    /// Record for a check that could not run.
    pub fn failed(claim_id: impl Into<String>, paper_ref: impl Into<String>, err: &crate::Error) -> Self {
        ClaimRecord {
            claim_id: claim_id.into(),
            paper_ref: paper_ref.into(),
            residual: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
            runtime_ms: 0,
            details: serde_json::json!({ "error": err.to_string() }),
        }
    }
}

/// Run `f` and stamp the elapsed time onto every record it returns.
pub fn timed(f: impl FnOnce() -> Vec<ClaimRecord>) -> Vec<ClaimRecord> {
    let start = Instant::now();
    let mut out = f();
    let ms = start.elapsed().as_millis() as u64;
    for c in &mut out {
        if c.runtime_ms == 0 {
            c.runtime_ms = ms;
        }
    }
    out
}

/// Convert an error into a failing record instead of aborting the suite.
pub fn claim_or_failure(
    claim_id: &str,
    paper_ref: &str,
    f: impl FnOnce() -> Result<ClaimRecord>,
) -> ClaimRecord {
    let start = Instant::now();
    let mut c = f().unwrap_or_else(|e| ClaimRecord::failed(claim_id, paper_ref, &e));
    c.runtime_ms = start.elapsed().as_millis() as u64;
    c
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub config: Value,
    pub claims: Vec<ClaimRecord>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("claim_id,paper_ref,residual,tolerance,pass,runtime_ms\n");
        for c in &self.claims {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{},{}",
                csv_field(&c.claim_id),
                csv_field(&c.paper_ref),
                c.residual,
                c.tolerance,
                c.pass,
                c.runtime_ms
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| claim | reference | residual | tolerance | pass | ms |\n|---|---|---|---|---|---|\n");
        for c in &self.claims {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3e} | {:.3e} | {} | {} |",
                c.claim_id,
                c.paper_ref.replace('|', "\\|"),
                c.residual,
                c.tolerance,
                if c.pass { "yes" } else { "no" },
                c.runtime_ms
            );
        }
        let passed = self.claims.iter().filter(|c| c.pass).count();
        let _ = writeln!(s, "\n{passed}/{} claims pass.", self.claims.len());
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
