//! Deterministic serialization of warnings: plain text, JSON and SARIF,
//! plus per-rule corpus statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analyses::{RuleId, Warning};

pub const SCHEMA: &str = "qlint-report/1";
pub const TOOL_NAME: &str = "qlint";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Text,
    Json,
    Sarif,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub file: String,
    pub warnings: Vec<Warning>,
}

/// A file that could not be parsed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub file: String,
    pub line: u32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool: Tool,
    pub files_analyzed: usize,
    pub files_skipped: Vec<SkippedFile>,
    /// Warning count per rule id, every rule listed.
    pub summary: BTreeMap<String, usize>,
    pub files: Vec<FileReport>,
}

impl Report {
    /// Builds a report; files and warnings are put in canonical order so
    /// the result does not depend on the order analysis finished in.
    pub fn new(mut files: Vec<FileReport>, mut skipped: Vec<SkippedFile>) -> Self {
        for f in &mut files {
            f.warnings.sort_by(Warning::canonical_cmp);
        }
        files.sort_by(|a, b| {
            a.file.cmp(&b.file).then_with(|| {
                let mut ws = a.warnings.iter().zip(&b.warnings).map(|(x, y)| x.canonical_cmp(y));
                ws.find(|o| o.is_ne())
                    .unwrap_or_else(|| a.warnings.len().cmp(&b.warnings.len()))
            })
        });
        skipped.sort_by(|a, b| (&a.file, a.line, &a.message).cmp(&(&b.file, b.line, &b.message)));
        let mut summary: BTreeMap<String, usize> =
            RuleId::ALL.iter().map(|r| (r.as_str().to_string(), 0)).collect();
        for w in files.iter().flat_map(|f| &f.warnings) {
            *summary.entry(w.rule.as_str().to_string()).or_default() += 1;
        }
        Report {
            schema: SCHEMA.to_string(),
            tool: Tool {
                name: TOOL_NAME.to_string(),
                version: TOOL_VERSION.to_string(),
            },
            files_analyzed: files.len(),
            files_skipped: skipped,
            summary,
            files,
        }
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Warning> {
        self.files.iter().flat_map(|f| &f.warnings)
    }

    pub fn warning_count(&self) -> usize {
        self.files.iter().map(|f| f.warnings.len()).sum()
    }

    pub fn from_json(text: &str) -> serde_json::Result<Report> {
        serde_json::from_str(text)
    }
}

pub fn format(report: &Report, style: Style) -> String {
    match style {
        Style::Text => text(report),
        Style::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Style::Sarif => {
            let mut s = serde_json::to_string_pretty(&sarif(report)).expect("sarif serializes");
            s.push('\n');
            s
        }
    }
}

fn text(report: &Report) -> String {
    let mut out = String::new();
    for w in report.warnings() {
        let _ = writeln!(
            out,
            "{}:{}:{} {} {}",
            w.span.file, w.span.line, w.span.column, w.rule, w.message
        );
    }
    out
}

fn sarif(report: &Report) -> serde_json::Value {
    let rules: Vec<_> = RuleId::ALL
        .iter()
        .map(|r| {
            json!({
                "id": r.as_str(),
                "shortDescription": { "text": r.description() },
                "defaultConfiguration": { "level": "warning", "enabled": r.is_default() },
            })
        })
        .collect();
    let results: Vec<_> = report
        .warnings()
        .map(|w| {
            let index = RuleId::ALL.iter().position(|r| *r == w.rule).unwrap_or(0);
            json!({
                "ruleId": w.rule.as_str(),
                "ruleIndex": index,
                "level": "warning",
                "message": { "text": w.message },
                "locations": [{
                    "physicalLocation": {
                        "artifactLocation": { "uri": w.span.file.as_ref() },
                        "region": {
                            "startLine": w.span.line,
                            "startColumn": w.span.column,
                            "endLine": w.span.end_line,
                            "endColumn": w.span.end_column,
                        }
                    }
                }],
            })
        })
        .collect();
    let notifications: Vec<_> = report
        .files_skipped
        .iter()
        .map(|s| {
            json!({
                "level": "error",
                "message": { "text": s.message },
                "locations": [{
                    "physicalLocation": {
                        "artifactLocation": { "uri": s.file },
                        "region": { "startLine": s.line },
                    }
                }],
            })
        })
        .collect();
    json!({
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [{
            "tool": {
                "driver": {
                    "name": report.tool.name,
                    "version": report.tool.version,
                    "rules": rules,
                }
            },
            "invocations": [{
                "executionSuccessful": true,
                "toolExecutionNotifications": notifications,
            }],
            "results": results,
        }]
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsRow {
    pub rule: RuleId,
    pub total_warnings: usize,
    /// Share of analyzed files with at least one warning of the rule.
    pub percent_files: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("corpus statistics need at least one analyzed file")]
    Empty,
}

/// Per-rule totals over all reports; skipped files are not counted.
pub fn corpus_stats(reports: &[Report]) -> Result<Vec<StatsRow>, StatsError> {
    let analyzed: usize = reports.iter().map(|r| r.files_analyzed).sum();
    if analyzed == 0 {
        return Err(StatsError::Empty);
    }
    Ok(RuleId::ALL
        .iter()
        .map(|&rule| {
            let files = reports.iter().flat_map(|r| &r.files);
            let mut total = 0;
            let mut with = 0;
            for f in files {
                let n = f.warnings.iter().filter(|w| w.rule == rule).count();
                total += n;
                with += usize::from(n > 0);
            }
            StatsRow {
                rule,
                total_warnings: total,
                percent_files: 100.0 * with as f64 / analyzed as f64,
            }
        })
        .collect())
}

/// Statistics as CSV with header `rule,total_warnings,percent_files`.
pub fn stats_csv(rows: &[StatsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rule", "total_warnings", "percent_files"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.rule.as_str().to_string(),
            r.total_warnings.to_string(),
            format!("{:.1}", r.percent_files),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
