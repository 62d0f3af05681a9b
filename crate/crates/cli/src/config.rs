//! JSON run configuration.

use std::path::{Path, PathBuf};

use postmon_core::charts::ChartParams;
use postmon_core::nonparametric::{Center, MmdDecision};
use postmon_core::performance::JointMethod;
use postmon_core::subgroup::{Discrepancy, Search};
use postmon_core::{ChartKind, Hypothesis, Kind, MetricKind, Role, ScanParams, Schema};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Monitoring stage a test belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CovariateShift,
    ConceptDrift,
    Performance,
    CorrectnessShift,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::CovariateShift,
        Stage::ConceptDrift,
        Stage::Performance,
        Stage::CorrectnessShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::CovariateShift => "covariate_shift",
            Stage::ConceptDrift => "concept_drift",
            Stage::Performance => "performance",
            Stage::CorrectnessShift => "correctness_shift",
        }
    }

    pub fn needs_labels(self) -> bool {
        self != Stage::CovariateShift
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    ZTest,
    TPooled,
    TWelch,
    FTest,
    Bartlett,
    MannWhitney,
    Levene,
    Ks,
    AndersonDarling,
    Energy,
    Wasserstein1,
    Wasserstein2,
    Kl,
    Js,
    FriedmanRafsky,
    Mmd,
    EnergyJoint,
    Deviation,
    SpecThreshold,
    CorrectnessShift,
}

/// How a test consumes the windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// One run per numeric feature.
    Univariate,
    /// One run on the encoded feature rows.
    Joint,
    /// One run on labels and predictions.
    Outcome,
}

impl TestName {
    pub const ALL: [TestName; 20] = [
        TestName::ZTest,
        TestName::TPooled,
        TestName::TWelch,
        TestName::FTest,
        TestName::Bartlett,
        TestName::MannWhitney,
        TestName::Levene,
        TestName::Ks,
        TestName::AndersonDarling,
        TestName::Energy,
        TestName::Wasserstein1,
        TestName::Wasserstein2,
        TestName::Kl,
        TestName::Js,
        TestName::FriedmanRafsky,
        TestName::Mmd,
        TestName::EnergyJoint,
        TestName::Deviation,
        TestName::SpecThreshold,
        TestName::CorrectnessShift,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    pub fn shape(self) -> Shape {
        match self {
            TestName::FriedmanRafsky | TestName::Mmd | TestName::EnergyJoint => Shape::Joint,
            TestName::Deviation | TestName::SpecThreshold | TestName::CorrectnessShift => Shape::Outcome,
            _ => Shape::Univariate,
        }
    }

    pub fn default_stage(self) -> Stage {
        match self {
            TestName::Deviation | TestName::SpecThreshold => Stage::Performance,
            TestName::CorrectnessShift => Stage::CorrectnessShift,
            _ => Stage::CovariateShift,
        }
    }

    fn allows(self, stage: Stage) -> bool {
        match self.shape() {
            Shape::Univariate => stage == Stage::CovariateShift,
            Shape::Joint => matches!(stage, Stage::CovariateShift | Stage::ConceptDrift),
            Shape::Outcome => stage == self.default_stage(),
        }
    }
}

/// Optional knobs; each test reads the ones it understands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Center>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<JointMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmd_decision: Option<MmdDecision>,
    /// Fixed Gaussian bandwidth; the median heuristic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestEntry {
    pub test: TestName,
    /// Columns to test; all applicable features when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default)]
    pub params: TestParams,
    /// Defaults to two-sided at the run's alpha.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
}

impl TestEntry {
    pub fn new(test: TestName) -> Self {
        Self {
            test,
            features: Vec::new(),
            stage: None,
            params: TestParams::default(),
            hypothesis: None,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage.unwrap_or_else(|| self.test.default_stage())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartEntry {
    pub feature: String,
    pub kind: ChartKind,
    /// Estimated from the baseline window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ChartParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "accuracy")]
    pub metric: MetricKind,
    #[serde(default)]
    pub discrepancy: Discrepancy,
    #[serde(default)]
    pub search: Search,
    #[serde(default)]
    pub params: ScanParams,
}

fn yes() -> bool {
    true
}

fn accuracy() -> MetricKind {
    MetricKind::Accuracy
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            metric: MetricKind::Accuracy,
            discrepancy: Discrepancy::default(),
            search: Search::default(),
            params: ScanParams::default(),
        }
    }
}

/// Inline schema or a path to a JSON schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    Inline(Schema),
    Path(PathBuf),
}

fn default_alpha() -> f64 {
    0.05
}

fn default_permutations() -> usize {
    postmon_core::permutation::DEFAULT_ITERATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub schema: SchemaRef,
    pub baseline: PathBuf,
    pub current: PathBuf,
    #[serde(default)]
    pub tests: Vec<TestEntry>,
    #[serde(default)]
    pub charts: Vec<ChartEntry>,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub bonferroni: bool,
    /// Record wall-clock start and end times in the report.
    #[serde(default = "yes")]
    pub timestamps: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A parsed config with its schema resolved, relative paths anchored at
/// the config file's directory, and the SHA-256 of the config bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: MonitorConfig,
    pub schema: Schema,
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn anchor(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut config: MonitorConfig =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let schema = match &config.schema {
        SchemaRef::Inline(s) => s.clone(),
        SchemaRef::Path(p) => {
            let p = anchor(base, p);
            serde_json::from_slice(&read(&p)?)
                .map_err(|e| CliError::Config(format!("schema {}: {e}", p.display())))?
        }
    };
    config.baseline = anchor(base, &config.baseline);
    config.current = anchor(base, &config.current);
    config.output = config.output.as_deref().map(|p| anchor(base, p));
    config.validate(&schema)?;
    Ok(LoadedConfig {
        config,
        schema,
        digest: digest(&bytes),
    })
}

fn is_numeric_feature(schema: &Schema, name: &str) -> bool {
    schema
        .get(name)
        .is_some_and(|c| c.role.is_feature() && c.kind == Kind::Numeric)
}

impl MonitorConfig {
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if self.permutations == 0 {
            return bad("permutations must be >= 1".into());
        }
        for (i, t) in self.tests.iter().enumerate() {
            let name = t.test.name();
            let stage = t.stage();
            if !t.test.allows(stage) {
                return bad(format!("test {i} ({name}) cannot run in stage {}", stage.name()));
            }
            for f in &t.features {
                let Some(spec) = schema.get(f) else {
                    return bad(format!("test {i} ({name}) names unknown feature `{f}`"));
                };
                if !spec.role.is_feature() {
                    return bad(format!("test {i} ({name}): `{f}` is not a feature column"));
                }
                if t.test.shape() == Shape::Univariate && spec.kind != Kind::Numeric {
                    return bad(format!("test {i} ({name}): `{f}` is not numeric"));
                }
            }
            if t.test.shape() == Shape::Outcome && !t.features.is_empty() {
                return bad(format!("test {i} ({name}) takes no feature list"));
            }
            if let Some(h) = &t.hypothesis {
                h.validate().map_err(|e| CliError::Config(format!("test {i} ({name}): {e}")))?;
            }
            if t.test == TestName::ZTest && (t.params.sigma0.is_none() || t.params.sigma1.is_none()) {
                return bad(format!("test {i} (z_test) needs params sigma0 and sigma1"));
            }
            if t.test == TestName::SpecThreshold {
                match t.hypothesis.and_then(|h| h.tau) {
                    Some(tau) if tau > 0.0 && tau < 1.0 => {}
                    _ => return bad(format!("test {i} (spec_threshold) needs hypothesis.tau in (0,1)")),
                }
            }
        }
        for (i, c) in self.charts.iter().enumerate() {
            if !is_numeric_feature(schema, &c.feature) {
                return bad(format!("chart {i} names `{}`, not a numeric feature", c.feature));
            }
            if let Some(p) = &c.params {
                p.validate().map_err(|e| CliError::Config(format!("chart {i}: {e}")))?;
            }
        }
        let needs_labels = self.tests.iter().any(|t| t.stage().needs_labels());
        if needs_labels
            && (schema.columns().iter().all(|c| c.role != Role::Label)
                || schema.columns().iter().all(|c| c.role != Role::Prediction))
        {
            return bad("labeled-data tests configured but the schema has no label or prediction column".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tests: &str) -> String {
        format!(
            r#"{{"schema": {{"columns": [
                {{"name": "age", "role": "clinical_feature", "kind": "numeric"}},
                {{"name": "site", "role": "clinical_feature", "kind": "categorical"}},
                {{"name": "y", "role": "label", "kind": "numeric"}},
                {{"name": "yhat", "role": "prediction", "kind": "numeric"}}]}},
              "baseline": "a.csv", "current": "b.csv", "tests": {tests}}}"#
        )
    }

    fn load(text: &str) -> Result<LoadedConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, text).unwrap();
        load_config(&p)
    }

    #[test]
    fn defaults_and_anchoring() {
        let c = load(&cfg(r#"[{"test": "ks"}, {"test": "mmd", "stage": "concept_drift"}]"#)).unwrap();
        assert_eq!(c.config.alpha, 0.05);
        assert_eq!(c.config.permutations, 1000);
        assert!(c.config.baseline.is_absolute());
        assert_eq!(c.config.tests[1].stage(), Stage::ConceptDrift);
        assert_eq!(c.digest.len(), 64);
        assert_eq!(c.digest, load(&cfg(r#"[{"test": "ks"}, {"test": "mmd", "stage": "concept_drift"}]"#)).unwrap().digest);
    }

    #[test]
    fn rejects_unresolvable_references() {
        for tests in [
            r#"[{"test": "no_such_test"}]"#,
            r#"[{"test": "ks", "features": ["height"]}]"#,
            r#"[{"test": "ks", "features": ["site"]}]"#,
            r#"[{"test": "ks", "stage": "performance"}]"#,
            r#"[{"test": "z_test"}]"#,
            r#"[{"test": "spec_threshold"}]"#,
        ] {
            let err = load(&cfg(tests)).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{tests}: {err}");
        }
    }

    #[test]
    fn test_names_round_trip() {
        for t in TestName::ALL {
            assert_eq!(TestName::parse(&t.name()), Some(t));
        }
    }
}
