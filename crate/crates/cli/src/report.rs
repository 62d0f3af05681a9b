//! Monitoring reports and their JSON and text renderings.

use std::fmt::Write as _;

use postmon_core::charts::Alarm;
use postmon_core::{ChartKind, ChartParams, SubgroupFinding};
use serde::{Deserialize, Serialize};

use crate::config::Stage;
use crate::error::{CliError, Result};
use crate::suite::TestRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoDrift,
    DriftDetected,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::NoDrift => 0,
            Verdict::DriftDetected => 3,
            Verdict::Error => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::NoDrift => "no_drift",
            Verdict::DriftDetected => "drift_detected",
            Verdict::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub seed: u64,
    pub config_digest: String,
    pub baseline: String,
    pub current: String,
    pub n0: usize,
    pub n1: usize,
    pub alpha: f64,
    pub bonferroni: bool,
    pub tests_run: usize,
    /// Sum of the per-test levels actually used: a union bound on the
    /// run's false-alarm probability.
    pub alpha_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
    NotReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    pub note: Option<String>,
    pub results: Vec<TestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartLog {
    pub feature: String,
    pub kind: ChartKind,
    pub params: ChartParams,
    pub observations: usize,
    pub first_alarm: Option<u64>,
    pub alarms: Vec<Alarm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub objective: String,
    pub note: Option<String>,
    pub findings: Vec<SubgroupFinding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub metadata: RunMetadata,
    pub stages: Vec<StageReport>,
    pub charts: Vec<ChartLog>,
    /// Exploratory: found by search over many candidate subgroups, so
    /// objectives are not calibrated tests.
    pub subgroups: Vec<ScanReport>,
    pub errors: Vec<String>,
    pub verdict: Verdict,
}

impl MonitorReport {
    pub fn rejections(&self) -> usize {
        self.records().filter(|(_, r)| r.result.reject_h0).count()
    }

    pub fn records(&self) -> impl Iterator<Item = (Stage, &TestRecord)> {
        self.stages.iter().flat_map(|s| s.results.iter().map(move |r| (s.stage, r)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            _ => Err(format!("unknown format `{s}`, expected json or text")),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

pub fn parse_report(bytes: &[u8]) -> Result<MonitorReport> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Usage(format!("not a monitoring report: {e}")))
}

pub fn emit_report(report: &MonitorReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Text => render_text(report),
    }
}

fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() && v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) => format!("{v:.3e}"),
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    }
}

/// Table of one line per test, rejecting tests first.
pub fn records_table(records: &[(Option<Stage>, &TestRecord)]) -> String {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| !records[i].1.result.reject_h0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:<26} {:<16} {:>11} {:>11} {:>11} {:>7}  decision",
        "stage", "method", "features", "statistic", "p", "critical", "alpha"
    );
    for i in order {
        let (stage, rec) = records[i];
        let r = &rec.result;
        let feats = if rec.features.is_empty() {
            "-".to_string()
        } else if rec.features.len() > 2 {
            format!("{} cols", rec.features.len())
        } else {
            rec.features.join(",")
        };
        let _ = writeln!(
            out,
            "{:<18} {:<26} {:<16} {:>11} {:>11} {:>11} {:>7.4}  {}",
            stage.map_or("-", Stage::name),
            r.method,
            feats,
            num(Some(r.statistic)),
            num(r.p_value),
            num(r.critical_value),
            r.alpha,
            if r.reject_h0 { "REJECT" } else { "retain" }
        );
    }
    out
}

fn render_text(r: &MonitorReport) -> String {
    let m = &r.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {}", r.verdict.name());
    let _ = writeln!(
        out,
        "baseline: {} (n={})  current: {} (n={})",
        m.baseline, m.n0, m.current, m.n1
    );
    let _ = writeln!(
        out,
        "seed: {}  config sha256: {}  tests: {}  rejections: {}",
        m.seed,
        m.config_digest,
        m.tests_run,
        r.rejections()
    );
    let _ = writeln!(
        out,
        "alpha: {}{}  summed alpha: {:.4}",
        m.alpha,
        if m.bonferroni { " (Bonferroni)" } else { " per test" },
        m.alpha_sum
    );
    if let (Some(a), Some(b)) = (&m.started_at, &m.finished_at) {
        let _ = writeln!(out, "run: {a} .. {b}");
    }
    for s in &r.stages {
        if s.status != StageStatus::Ran {
            let _ = writeln!(
                out,
                "stage {}: {:?}{}",
                s.stage.name(),
                s.status,
                s.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
    }
    let recs: Vec<(Option<Stage>, &TestRecord)> = r.records().map(|(s, rec)| (Some(s), rec)).collect();
    if !recs.is_empty() {
        out.push('\n');
        out.push_str(&records_table(&recs));
    }
    if !r.charts.is_empty() {
        out.push('\n');
        for c in &r.charts {
            let _ = writeln!(
                out,
                "chart {} on {}: {} observations, {} alarms, first at {}",
                c.kind.name(),
                c.feature,
                c.observations,
                c.alarms.len(),
                c.first_alarm.map_or("-".into(), |t| t.to_string())
            );
        }
    }
    for s in &r.subgroups {
        let _ = writeln!(out, "\nsubgroups by {} (exploratory):", s.objective);
        if let Some(n) = &s.note {
            let _ = writeln!(out, "  {n}");
        }
        for f in &s.findings {
            let _ = writeln!(
                out,
                "  {:.4}  n0={} n1={}  {}",
                f.objective,
                f.support0,
                f.support1,
                f.describe()
            );
        }
    }
    for e in &r.errors {
        let _ = writeln!(out, "error: {e}");
    }
    out
}
