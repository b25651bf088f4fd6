//! Report types emitted by the command-line front end.
//!
//! The process exit status is a pure function of the report, so a consumer
//! of `--json` output can recompute it.

use serde::{Deserialize, Serialize};

use crate::history::Anomaly;
use crate::verdict::{Answer, Certificate, VerdictStats};

/// Per-register result of a `check` or `min-k` run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportEntry {
    pub key: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Answer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_checked: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<Anomaly>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_reads: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_k_lower_bound: Option<u32>,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<VerdictStats>,
}

impl ReportEntry {
    pub fn new(key: impl Into<String>) -> Self {
        ReportEntry {
            key: key.into(),
            verdict: None,
            k_checked: None,
            algorithm: None,
            anomalies: Vec::new(),
            dropped_reads: Vec::new(),
            witness_path: None,
            certificate: None,
            min_k: None,
            min_k_lower_bound: None,
            elapsed_ms: 0.0,
            stats: None,
        }
    }
}

/// A whole run: one entry per register key, sorted by key.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    /// Whether anomalies were fatal (strict) or dropped (lenient).
    pub strict: bool,
    pub entries: Vec<ReportEntry>,
}

/// Exit status. Parse or I/O failures exit 2 before a report exists;
/// otherwise: anomalies under strict mode give 3, any NO verdict gives 1,
/// all YES gives 0.
pub fn exit_code(report: &Report) -> i32 {
    if report.strict && report.entries.iter().any(|e| !e.anomalies.is_empty()) {
        return 3;
    }
    if report
        .entries
        .iter()
        .any(|e| e.verdict == Some(Answer::No) || (!e.anomalies.is_empty() && e.verdict.is_none()))
    {
        return 1;
    }
    0
}
