use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use lclt_lab::verifier::VerificationReport;

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "metadata.json";

/// Wall-clock facts of a run, kept apart from the reports so reruns leave
/// the report files byte-identical.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_s: u64,
    pub elapsed_ms: u64,
    /// Longest runtime per check name.
    pub runtime_ms: BTreeMap<String, u64>,
    pub reports: usize,
    pub enforced_failures: usize,
}

/// Replace the tolerance of every report named in `overrides`.
pub fn apply_overrides(reports: &mut [VerificationReport], overrides: &BTreeMap<String, f64>) {
    for r in reports {
        if let Some(&tol) = overrides.get(&r.check_name) {
            r.parameters.insert("tolerance".into(), tol.into());
            r.pass = r.margin >= -tol;
        }
    }
}

fn params_key(r: &VerificationReport) -> String {
    serde_json::to_string(&r.parameters).expect("parameters serialize")
}

/// Order by check name, then by serialized parameters.
pub fn sort_reports(reports: &mut [VerificationReport]) {
    reports.sort_by_cached_key(|r| (r.check_name.clone(), params_key(r)));
}

pub fn write_reports(dir: &Path, reports: &[VerificationReport], metadata: &Metadata) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut jsonl = io::BufWriter::new(fs::File::create(dir.join(REPORTS_FILE))?);
    for r in reports {
        serde_json::to_writer(&mut jsonl, r)?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;
    let mut csv = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    csv.write_record(["check", "params", "lhs", "rhs", "margin", "pass"])?;
    for r in reports {
        csv.write_record([
            r.check_name.clone(),
            params_key(r),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.margin.to_string(),
            r.pass.to_string(),
        ])?;
    }
    csv.flush()?;
    let mut meta = serde_json::to_string_pretty(metadata)?;
    meta.push('\n');
    fs::write(dir.join(METADATA_FILE), meta)
}
