//! One monitoring cycle: staged tests, charts and subgroup scans.

use postmon_core::encode::Append;
use postmon_core::subgroup::{scan_degradation, scan_discrepancy, Discrepancy};
use postmon_core::{run_chart, ChartParams, Dataset, Error, Hypothesis, Role, Schema, Window, WindowTag};

use crate::config::{LoadedConfig, MonitorConfig, Stage};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, ingest_projected, read_header};
use crate::report::{ChartLog, MonitorReport, RunMetadata, ScanReport, StageReport, StageStatus, Verdict};
use crate::suite::{derive_seed, expand, run_one};

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn features_only(schema: &Schema) -> Schema {
    let cols = schema
        .columns()
        .iter()
        .filter(|c| c.role.is_feature())
        .cloned()
        .collect();
    Schema::new(cols).expect("a subset of a valid schema is valid")
}

/// Loads both windows. When either file lacks the label or prediction
/// column, both are read without outcome columns and the returned note
/// says so.
pub fn load_windows(cfg: &MonitorConfig, schema: &Schema) -> Result<(Dataset, Dataset, Option<String>)> {
    let outcome: Vec<&str> = schema
        .columns()
        .iter()
        .filter(|c| matches!(c.role, Role::Label | Role::Prediction))
        .map(|c| c.name.as_str())
        .collect();
    let mut missing = Vec::new();
    for (path, which) in [(&cfg.baseline, "baseline"), (&cfg.current, "current")] {
        let header = read_header(path)?;
        if outcome.iter().any(|c| !header.iter().any(|h| h == c)) {
            missing.push(which);
        }
    }
    let t0 = WindowTag::new(Window::T0, cfg.baseline.display().to_string());
    let t1 = WindowTag::new(Window::T1, cfg.current.display().to_string());
    if outcome.is_empty() || missing.is_empty() {
        return Ok((ingest_csv(&cfg.baseline, schema, t0)?, ingest_csv(&cfg.current, schema, t1)?, None));
    }
    let reduced = features_only(schema);
    let note = format!("labels unavailable in {} window", missing.join(" and "));
    Ok((
        ingest_projected(&cfg.baseline, &reduced, t0)?,
        ingest_projected(&cfg.current, &reduced, t1)?,
        Some(note),
    ))
}

struct Planned<'a> {
    entry: &'a crate::config::TestEntry,
    features: Vec<String>,
    hyp: Hypothesis,
}

/// Runs the configured cycle. Ingestion failures are returned as errors;
/// failures after ingestion end the cycle early with a partial report
/// whose verdict is `error`.
pub fn run_monitor(loaded: &LoadedConfig) -> Result<MonitorReport> {
    let cfg = &loaded.config;
    let started_at = cfg.timestamps.then(now);
    let (d0, d1, label_note) = load_windows(cfg, &loaded.schema)?;
    let labeled = d0.is_labeled() && d1.is_labeled();
    let label_note = label_note.unwrap_or_else(|| "labels unavailable".into());

    let mut plans: Vec<(Stage, Vec<Planned>)> = Vec::new();
    for stage in Stage::ALL {
        let mut runs = Vec::new();
        if !stage.needs_labels() || labeled {
            for entry in cfg.tests.iter().filter(|t| t.stage() == stage) {
                let base = match entry.hypothesis {
                    Some(h) => h,
                    None => Hypothesis::two_sided(cfg.alpha).map_err(|e| CliError::Config(e.to_string()))?,
                };
                for features in expand(entry, &d0) {
                    runs.push(Planned {
                        entry,
                        features,
                        hyp: base,
                    });
                }
            }
        }
        plans.push((stage, runs));
    }
    let total: usize = plans.iter().map(|(_, r)| r.len()).sum();
    if cfg.bonferroni && total > 0 {
        for (_, runs) in &mut plans {
            for p in runs.iter_mut() {
                p.hyp.alpha /= total as f64;
            }
        }
    }
    let alpha_sum: f64 = plans.iter().flat_map(|(_, r)| r.iter().map(|p| p.hyp.alpha)).sum();

    let mut stages = Vec::new();
    let mut errors = Vec::new();
    let mut k = 0u64;
    for (stage, runs) in &plans {
        let mut report = StageReport {
            stage: *stage,
            status: StageStatus::Ran,
            note: None,
            results: Vec::new(),
        };
        if !errors.is_empty() {
            report.status = StageStatus::NotReached;
        } else if stage.needs_labels() && !labeled {
            report.status = StageStatus::Skipped;
            report.note = Some(label_note.clone());
        } else {
            if runs.is_empty() {
                report.note = Some("no tests configured".into());
            }
            for p in runs {
                let seed = derive_seed(cfg.seed, k);
                k += 1;
                match run_one(p.entry, *stage, &p.features, &d0, &d1, &p.hyp, seed, cfg.permutations) {
                    Ok(rec) => report.results.push(rec),
                    Err(e) => {
                        errors.push(format!(
                            "stage {}: {} on [{}]: {e}",
                            stage.name(),
                            p.entry.test.name(),
                            p.features.join(", ")
                        ));
                        break;
                    }
                }
            }
        }
        stages.push(report);
    }

    let mut charts = Vec::new();
    if errors.is_empty() {
        for c in &cfg.charts {
            let logged = chart_log(c, &d0, &d1);
            match logged {
                Ok(log) => charts.push(log),
                Err(e) => {
                    errors.push(format!("chart {} on {}: {e}", c.kind.name(), c.feature));
                    break;
                }
            }
        }
    }

    let rejections = stages.iter().flat_map(|s| &s.results).filter(|r| r.result.reject_h0).count();
    let mut subgroups = Vec::new();
    if errors.is_empty() && rejections > 0 && cfg.scan.enabled {
        if let Err(e) = scans(cfg, &d0, &d1, labeled, &mut subgroups) {
            errors.push(format!("subgroup scan: {e}"));
        }
    }

    let verdict = if !errors.is_empty() {
        Verdict::Error
    } else if rejections > 0 {
        Verdict::DriftDetected
    } else {
        Verdict::NoDrift
    };
    Ok(MonitorReport {
        metadata: RunMetadata {
            tool: format!("postmon {}", env!("CARGO_PKG_VERSION")),
            started_at,
            finished_at: cfg.timestamps.then(now),
            seed: cfg.seed,
            config_digest: loaded.digest.clone(),
            baseline: cfg.baseline.display().to_string(),
            current: cfg.current.display().to_string(),
            n0: d0.len(),
            n1: d1.len(),
            alpha: cfg.alpha,
            bonferroni: cfg.bonferroni,
            tests_run: stages.iter().map(|s| s.results.len()).sum(),
            alpha_sum,
        },
        stages,
        charts,
        subgroups,
        errors,
        verdict,
    })
}

fn chart_log(c: &crate::config::ChartEntry, d0: &Dataset, d1: &Dataset) -> postmon_core::Result<ChartLog> {
    let column = |d: &Dataset| {
        d.numeric(&c.feature)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::InvalidParameter(format!("`{}` is not numeric", c.feature)))
    };
    let params = match c.params {
        Some(p) => p,
        None => ChartParams::from_baseline(&column(d0)?)?,
    };
    let xs = column(d1)?;
    let (_, alarms) = run_chart(c.kind, &params, &xs)?;
    Ok(ChartLog {
        feature: c.feature.clone(),
        kind: c.kind,
        params,
        observations: xs.len(),
        first_alarm: alarms.first().map(|a| a.t),
        alarms,
    })
}

fn scans(cfg: &MonitorConfig, d0: &Dataset, d1: &Dataset, labeled: bool, out: &mut Vec<ScanReport>) -> postmon_core::Result<()> {
    let s = &cfg.scan;
    let disc_name = match s.discrepancy {
        Discrepancy::Energy => "energy",
        Discrepancy::Mmd => "mmd",
    };
    let mut push = |objective: String, found: postmon_core::Result<Vec<_>>| -> postmon_core::Result<()> {
        match found {
            Ok(findings) => out.push(ScanReport {
                objective,
                note: None,
                findings,
            }),
            Err(e @ Error::NoFeasibleSubgroup { .. }) => out.push(ScanReport {
                objective,
                note: Some(e.to_string()),
                findings: Vec::new(),
            }),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    if labeled {
        push(
            format!("degradation_{}", s.metric.name()),
            scan_degradation(d0, d1, s.metric, &s.params, s.search),
        )?;
        push(
            format!("{disc_name}_with_correctness"),
            scan_discrepancy(d0, d1, s.discrepancy, Append::Correctness(1.0), &s.params, s.search),
        )?;
    } else {
        push(
            disc_name.to_string(),
            scan_discrepancy(d0, d1, s.discrepancy, Append::Nothing, &s.params, s.search),
        )?;
    }
    Ok(())
}
