use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use postmon_cli::config::{MonitorConfig, SchemaRef, TestParams};
use postmon_cli::ingest::{infer_schema, ingest_csv, read_header, write_csv};
use postmon_cli::report::{records_table, to_json, ChartLog};
use postmon_cli::simulate::default_config;
use postmon_cli::suite::{derive_seed, expand, run_one, TestRecord};
use postmon_cli::{
    emit_report, load_config, parse_report, run_monitor, simulate, CliError, Format, Result, ScenarioKind,
    ShiftScenario, Stage, TestEntry, TestName,
};
use postmon_core::encode::Append;
use postmon_core::subgroup::{scan_degradation, scan_discrepancy, Discrepancy, Search};
use postmon_core::{run_chart, ChartKind, ChartParams, Hypothesis, MetricKind, ScanParams, Schema, Sidedness, Window, WindowTag};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "postmon", version, about = "Two-sample drift and performance monitoring for binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one named test on two CSV windows.
    Test(TestArgs),
    /// Run a full monitoring cycle from a JSON config.
    Monitor(MonitorArgs),
    /// Stream one CSV column through a control chart.
    Chart(ChartArgs),
    /// Search for subgroups where the windows differ most.
    Scan(ScanArgs),
    /// Write a simulated baseline/current CSV pair and a monitor config.
    Simulate(SimulateArgs),
    /// Re-render a JSON monitoring report.
    Report(ReportArgs),
}

#[derive(Args)]
struct Windows {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    current: PathBuf,
    /// JSON schema file; inferred from the baseline file when absent.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Label column for an inferred schema.
    #[arg(long)]
    label: Option<String>,
    /// Prediction column for an inferred schema.
    #[arg(long)]
    prediction: Option<String>,
}

#[derive(Args)]
struct TestArgs {
    /// Test name, e.g. ks, t_welch, mmd, deviation.
    #[arg(long)]
    test: String,
    #[command(flatten)]
    windows: Windows,
    /// Feature columns; repeat the flag or separate with commas.
    #[arg(long = "column", value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long)]
    stage: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "two_sided")]
    sidedness: String,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    /// Test parameters as a JSON object, e.g. '{"metric": "recall"}'.
    #[arg(long)]
    params: Option<String>,
    /// Divide alpha by the number of columns tested.
    #[arg(long)]
    bonferroni: bool,
    #[arg(long, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    current: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bonferroni: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_timestamps: bool,
    #[arg(long, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ChartArgs {
    #[arg(long)]
    current: PathBuf,
    #[arg(long)]
    column: String,
    #[arg(long, default_value = "cusum")]
    kind: String,
    /// Estimate the in-control mean and SD from this file.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Shewhart limit multiplier.
    #[arg(long = "limit")]
    l: Option<f64>,
    /// EWMA limit multiplier.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    windows: Windows,
    /// degradation, energy or mmd.
    #[arg(long, default_value = "degradation")]
    objective: String,
    #[arg(long, default_value = "accuracy")]
    metric: String,
    /// Append the correctness indicator to energy/mmd rows.
    #[arg(long)]
    correctness: bool,
    #[arg(long, default_value_t = 30)]
    min_support: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 20)]
    beam: usize,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "none")]
    scenario: String,
    #[arg(long, default_value_t = 0.0)]
    magnitude: f64,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 500)]
    n0: usize,
    #[arg(long, default_value_t = 500)]
    n1: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Monitor(a) => cmd_monitor(a),
        Command::Chart(a) => cmd_chart(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|_| out.flush());
}

/// Parses a snake_case enum name through its serde representation.
fn named<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Usage(format!("unknown {what} `{s}`")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_schema(w: &Windows) -> Result<Schema> {
    if let Some(p) = &w.schema {
        let bytes = std::fs::read(p).map_err(|e| CliError::Io {
            path: p.clone(),
            source: e,
        })?;
        return serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("schema {}: {e}", p.display())));
    }
    let header = read_header(&w.baseline)?;
    let pick = |flag: &Option<String>, default: &str| {
        flag.clone().or_else(|| header.iter().any(|h| h == default).then(|| default.to_string()))
    };
    infer_schema(&w.baseline, pick(&w.label, "y").as_deref(), pick(&w.prediction, "yhat").as_deref())
}

fn load_pair(w: &Windows) -> Result<(Schema, postmon_core::Dataset, postmon_core::Dataset)> {
    let schema = load_schema(w)?;
    let d0 = ingest_csv(&w.baseline, &schema, WindowTag::new(Window::T0, w.baseline.display().to_string()))?;
    let d1 = ingest_csv(&w.current, &schema, WindowTag::new(Window::T1, w.current.display().to_string()))?;
    Ok((schema, d0, d1))
}

fn cmd_test(a: TestArgs) -> Result<i32> {
    let test = TestName::parse(&a.test).ok_or_else(|| CliError::Usage(format!("unknown test `{}`", a.test)))?;
    let sidedness: Sidedness = named("sidedness", &a.sidedness)?;
    let mut hyp = Hypothesis::new(a.alpha, sidedness).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(t) = a.tau {
        hyp = hyp.with_tau(t).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let params: TestParams = match &a.params {
        Some(p) => serde_json::from_str(p).map_err(|e| CliError::Usage(format!("--params: {e}")))?,
        None => TestParams::default(),
    };
    let stage = a.stage.as_deref().map(|s| named::<Stage>("stage", s)).transpose()?;
    let entry = TestEntry {
        test,
        features: a.columns,
        stage,
        params,
        hypothesis: Some(hyp),
    };
    let (schema, d0, d1) = load_pair(&a.windows)?;
    let cfg = MonitorConfig {
        tests: vec![entry.clone()],
        permutations: a.permutations,
        ..default_config("", "", a.seed)
    };
    cfg.validate(&schema).map_err(|e| match e {
        CliError::Config(m) => CliError::Usage(m),
        e => e,
    })?;
    let stage = entry.stage();
    if stage.needs_labels() && !(d0.is_labeled() && d1.is_labeled()) {
        return Err(CliError::Usage(format!(
            "{} needs label and prediction columns (see --label/--prediction)",
            test.name()
        )));
    }
    let runs = expand(&entry, &d0);
    if a.bonferroni && !runs.is_empty() {
        hyp.alpha /= runs.len() as f64;
    }
    let mut records: Vec<TestRecord> = Vec::new();
    for (k, features) in runs.iter().enumerate() {
        let rec = run_one(&entry, stage, features, &d0, &d1, &hyp, derive_seed(a.seed, k as u64), a.permutations)
            .map_err(|e| CliError::data(format!("{} on [{}]", test.name(), features.join(", ")), e))?;
        records.push(rec);
    }
    match a.format {
        Format::Json => emit(&to_json(&records)),
        Format::Text => {
            let rows: Vec<_> = records.iter().map(|r| (Some(stage), r)).collect();
            emit(&records_table(&rows));
        }
    }
    Ok(if records.iter().any(|r| r.result.reject_h0) { 3 } else { 0 })
}

fn cmd_monitor(a: MonitorArgs) -> Result<i32> {
    let mut loaded = load_config(&a.config)?;
    let c = &mut loaded.config;
    if let Some(p) = a.baseline {
        c.baseline = p;
    }
    if let Some(p) = a.current {
        c.current = p;
    }
    if let Some(x) = a.alpha {
        c.alpha = x;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    c.bonferroni |= a.bonferroni;
    c.timestamps &= !a.no_timestamps;
    if a.output.is_some() {
        c.output = a.output;
    }
    c.validate(&loaded.schema).map_err(|e| match e {
        CliError::Config(m) => CliError::Usage(m),
        e => e,
    })?;
    let report = run_monitor(&loaded)?;
    if let Some(out) = &loaded.config.output {
        write_file(out, &emit_report(&report, Format::Json))?;
    }
    emit(&emit_report(&report, a.format));
    Ok(report.verdict.exit_code())
}

fn cmd_chart(a: ChartArgs) -> Result<i32> {
    let kind: ChartKind = named("chart kind", &a.kind)?;
    let column = |path: &Path| -> Result<Vec<f64>> {
        let schema = infer_schema(path, None, None)?;
        let d = ingest_csv(path, &schema, WindowTag::new(Window::T1, ""))?;
        d.numeric(&a.column)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| CliError::Usage(format!("`{}` is not a numeric column of {}", a.column, path.display())))
    };
    let base = match (&a.baseline, a.mu0, a.sigma0) {
        (_, Some(m), Some(s)) => ChartParams::new(m, s),
        (Some(p), _, _) => ChartParams::from_baseline(&column(p)?),
        _ => return Err(CliError::Usage("give --baseline or both --mu0 and --sigma0".into())),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let params = ChartParams {
        l: a.l.unwrap_or(base.l),
        k: a.k.unwrap_or(base.k),
        h: a.h.unwrap_or(base.h),
        lambda: a.lambda.unwrap_or(base.lambda),
        rho: a.rho.unwrap_or(base.rho),
        ..base
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let xs = column(&a.current)?;
    let (_, alarms) = run_chart(kind, &params, &xs).map_err(|e| CliError::data("chart", e))?;
    let log = ChartLog {
        feature: a.column,
        kind,
        params,
        observations: xs.len(),
        first_alarm: alarms.first().map(|x| x.t),
        alarms,
    };
    match a.format {
        Format::Json => emit(&to_json(&log)),
        Format::Text => {
            let mut s = format!(
                "{} on {}: {} observations, {} alarms\n",
                kind.name(),
                log.feature,
                log.observations,
                log.alarms.len()
            );
            for al in &log.alarms {
                s += &format!("  t={:<6} x={:<12.6} stat={:<12.6} {:?}\n", al.t, al.value, al.statistic, al.signal);
            }
            emit(&s);
        }
    }
    Ok(if log.alarms.is_empty() { 0 } else { 3 })
}

fn cmd_scan(a: ScanArgs) -> Result<i32> {
    let (_, d0, d1) = load_pair(&a.windows)?;
    let params = ScanParams {
        min_support: a.min_support,
        depth: a.depth,
        beam: a.beam,
        top_k: a.top_k,
        bins: a.bins,
    };
    let search = if a.exhaustive { Search::Exhaustive } else { Search::Beam };
    let findings = match a.objective.as_str() {
        "degradation" => {
            let metric: MetricKind = named("metric", &a.metric)?;
            scan_degradation(&d0, &d1, metric, &params, search)
        }
        other => {
            let kind: Discrepancy = named("objective", other)?;
            let append = if a.correctness { Append::Correctness(1.0) } else { Append::Nothing };
            scan_discrepancy(&d0, &d1, kind, append, &params, search)
        }
    }
    .map_err(|e| CliError::data("subgroup scan", e))?;
    match a.format {
        Format::Json => emit(&to_json(&findings)),
        Format::Text => emit(
            &findings
                .iter()
                .map(|f| format!("{:.4}  n0={} n1={}  {}\n", f.objective, f.support0, f.support1, f.describe()))
                .collect::<String>(),
        ),
    }
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let kind: ScenarioKind = named("scenario", &a.scenario)?;
    if a.n0 == 0 || a.n1 == 0 {
        return Err(CliError::Usage("window sizes must be >= 1".into()));
    }
    let scenario = ShiftScenario::new(kind, a.magnitude, a.fraction, a.seed);
    let (d0, d1) = simulate(&scenario, a.n0, a.n1);
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    write_csv(&a.out_dir.join("baseline.csv"), &d0)?;
    write_csv(&a.out_dir.join("current.csv"), &d1)?;
    let mut cfg = default_config("baseline.csv", "current.csv", a.seed);
    cfg.schema = SchemaRef::Inline(d0.schema().clone());
    write_file(&a.out_dir.join("monitor.json"), &to_json(&cfg))?;
    emit(&format!("{}\n", a.out_dir.join("monitor.json").display()));
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<i32> {
    let bytes = std::fs::read(&a.input).map_err(|e| CliError::Io {
        path: a.input.clone(),
        source: e,
    })?;
    let report = parse_report(&bytes)?;
    emit(&emit_report(&report, a.format));
    Ok(report.verdict.exit_code())
}
