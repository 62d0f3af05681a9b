//! Binary-classification metrics and tests for performance degradation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{correctness, Append, Encoder};
use crate::error::{Error, Result};
use crate::nonparametric::{friedman_rafsky_test, mmd_test, KernelSpec, MmdDecision};
use crate::permutation::{stream_rng, PermutationPlan};
use crate::special::{normal_cdf, normal_quantile, normal_sf};
use crate::types::{ColumnData, Dataset, Hypothesis, RejectionRegion, Sidedness, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add(&mut self, y: u8, yhat: u8) {
        match (y, yhat) {
            (1, 1) => self.tp += 1,
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            _ => self.fn_ += 1,
        }
    }
}

fn labels_and_predictions(d: &Dataset) -> Result<(&[u8], &[u8])> {
    let y = d.labels().ok_or_else(|| Error::MissingColumn("label".into()))?;
    let yhat = d.predictions().ok_or_else(|| Error::MissingColumn("prediction".into()))?;
    Ok((y, yhat))
}

pub fn confusion(d: &Dataset) -> Result<ConfusionCounts> {
    let (y, yhat) = labels_and_predictions(d)?;
    Ok(confusion_of(y, yhat))
}

pub fn confusion_of(y: &[u8], yhat: &[u8]) -> ConfusionCounts {
    let mut cm = ConfusionCounts::default();
    for (&a, &b) in y.iter().zip(yhat) {
        cm.add(a, b);
    }
    cm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    F1,
    Specificity,
    Npv,
    BalancedAccuracy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        Self::Accuracy,
        Self::Precision,
        Self::Recall,
        Self::F1,
        Self::Specificity,
        Self::Npv,
        Self::BalancedAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Accuracy => "accuracy",
            Self::Precision => "precision",
            Self::Recall => "recall",
            Self::F1 => "f1",
            Self::Specificity => "specificity",
            Self::Npv => "npv",
            Self::BalancedAccuracy => "balanced_accuracy",
        }
    }

    /// Metrics that are a single proportion and so binomial in their own
    /// denominator.
    pub fn is_binomial(self) -> bool {
        !matches!(self, Self::F1 | Self::BalancedAccuracy)
    }

    /// `(successes, trials)` for binomial metrics.
    pub fn proportion(self, cm: &ConfusionCounts) -> Option<(u64, u64)> {
        let c = cm;
        match self {
            Self::Accuracy => Some((c.tp + c.tn, c.total())),
            Self::Precision => Some((c.tp, c.tp + c.fp)),
            Self::Recall => Some((c.tp, c.tp + c.fn_)),
            Self::Specificity => Some((c.tn, c.tn + c.fp)),
            Self::Npv => Some((c.tn, c.tn + c.fn_)),
            Self::F1 | Self::BalancedAccuracy => None,
        }
    }
}

fn undefined(kind: MetricKind) -> Error {
    Error::UndefinedMetric {
        metric: kind.name().into(),
    }
}

fn ratio(num: u64, den: u64, kind: MetricKind) -> Result<f64> {
    if den == 0 {
        return Err(undefined(kind));
    }
    Ok(num as f64 / den as f64)
}

pub fn metric(cm: &ConfusionCounts, kind: MetricKind) -> Result<f64> {
    if let Some((num, den)) = kind.proportion(cm) {
        return ratio(num, den, kind);
    }
    match kind {
        MetricKind::F1 => ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_, kind),
        MetricKind::BalancedAccuracy => {
            let recall = ratio(cm.tp, cm.tp + cm.fn_, kind)?;
            let spec = ratio(cm.tn, cm.tn + cm.fp, kind)?;
            Ok((recall + spec) / 2.0)
        }
        _ => unreachable!("binomial metrics handled above"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self {
            resamples: 2000,
            seed: 0,
        }
    }
}

/// Bootstrap replicates of a metric, resampling rows with replacement.
/// Replicates where the metric is undefined are dropped.
fn bootstrap_metric(y: &[u8], yhat: &[u8], kind: MetricKind, plan: &BootstrapPlan, stream: u64) -> Vec<Option<f64>> {
    let n = y.len();
    (0..plan.resamples)
        .into_par_iter()
        .map(|b| {
            // streams are split between windows by the high bit
            let mut rng = stream_rng(plan.seed, (stream << 63) | b as u64);
            let mut cm = ConfusionCounts::default();
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                cm.add(y[i], yhat[i]);
            }
            metric(&cm, kind).ok()
        })
        .collect()
}

/// Whether `np >= 5` and `n(1-p) >= 5` hold.
fn normal_ok(p: f64, m: u64) -> bool {
    let m = m as f64;
    m * p >= 5.0 && m * (1.0 - p) >= 5.0
}

/// One-sided test of `H0: M_t0 - M_t1 <= tau` against `H1: > tau`.
pub fn deviation_test(
    d0: &Dataset,
    d1: &Dataset,
    kind: MetricKind,
    hyp: &Hypothesis,
    boot: &BootstrapPlan,
) -> Result<TestResult> {
    hyp.validate()?;
    let tau = hyp.tau.unwrap_or(0.0);
    let upper = hyp.with_sidedness(Sidedness::Greater);
    let (y0, p0) = labels_and_predictions(d0)?;
    let (y1, p1) = labels_and_predictions(d1)?;
    let (c0, c1) = (confusion_of(y0, p0), confusion_of(y1, p1));
    let (m0, m1) = (metric(&c0, kind)?, metric(&c1, kind)?);
    let method = format!("deviation_{}", kind.name());
    let mut notes = vec![format!("M0={m0:.6}, M1={m1:.6}, tau_deg={tau}")];

    if let (Some((_, n0)), Some((_, n1))) = (kind.proportion(&c0), kind.proportion(&c1)) {
        if normal_ok(m0, n0) && normal_ok(m1, n1) {
            let se = (m0 * (1.0 - m0) / n0 as f64 + m1 * (1.0 - m1) / n1 as f64).sqrt();
            let z = (m0 - m1 - tau) / se;
            let mut r = TestResult::from_p_value(method, z, normal_sf(z), &upper)
                .with_critical(normal_quantile(1.0 - hyp.alpha), RejectionRegion::Upper)
                .with_sizes(d0.len(), d1.len());
            notes.push(format!("two-proportion z, unpooled, effective denominators m0={n0}, m1={n1}"));
            r.notes = notes;
            return Ok(r);
        }
        notes.push(
            "binomial normal-approximation condition (np >= 5, n(1-p) >= 5) fails; bootstrap used".into(),
        );
    } else {
        notes.push(format!("{} has no binomial model; bootstrap used", kind.name()));
    }

    let b0 = bootstrap_metric(y0, p0, kind, boot, 0);
    let b1 = bootstrap_metric(y1, p1, kind, boot, 1);
    let diffs: Vec<f64> = b0
        .iter()
        .zip(&b1)
        .filter_map(|(a, b)| Some((*a)? - (*b)?))
        .collect();
    if diffs.is_empty() {
        return Err(undefined(kind));
    }
    let dropped = boot.resamples - diffs.len();
    let at_or_below = diffs.iter().filter(|&&d| d <= tau).count();
    let p = at_or_below as f64 / diffs.len() as f64;
    let mut sorted = diffs;
    sorted.sort_by(f64::total_cmp);
    let lower = crate::stats::quantile_sorted(&sorted, hyp.alpha);
    let mut r = TestResult::from_p_value(method, m0 - m1 - tau, p, &upper).with_sizes(d0.len(), d1.len());
    notes.push(format!(
        "bootstrap percentile (B={}, {dropped} undefined resamples dropped): lower {:.0}% bound on M0-M1 = {lower:.6}",
        boot.resamples,
        100.0 * (1.0 - hyp.alpha)
    ));
    r.notes = notes;
    Ok(r)
}

/// One-sided test of `H0: M_t1 >= tau_spec` against `H1: < tau_spec`.
pub fn spec_threshold_test(d1: &Dataset, kind: MetricKind, hyp: &Hypothesis, boot: &BootstrapPlan) -> Result<TestResult> {
    hyp.validate()?;
    let tau = hyp
        .tau
        .ok_or_else(|| Error::InvalidParameter("specification threshold needs tau".into()))?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau_spec must lie in (0,1), got {tau}")));
    }
    let lower_h = hyp.with_sidedness(Sidedness::Less);
    let (y, yhat) = labels_and_predictions(d1)?;
    let cm = confusion_of(y, yhat);
    let m = metric(&cm, kind)?;
    let method = format!("spec_threshold_{}", kind.name());
    let mut notes = vec![format!("M1={m:.6}, tau_spec={tau}")];
    if let Some((_, n)) = kind.proportion(&cm) {
        if normal_ok(tau, n) {
            let z = (m - tau) / (tau * (1.0 - tau) / n as f64).sqrt();
            let mut r = TestResult::from_p_value(method, z, normal_cdf(z), &lower_h)
                .with_critical(normal_quantile(hyp.alpha), RejectionRegion::Lower)
                .with_sizes(0, d1.len());
            notes.push(format!("one-sample proportion z, effective denominator m1={n}"));
            r.notes = notes;
            return Ok(r);
        }
        notes.push("binomial normal-approximation condition fails at tau_spec; bootstrap used".into());
    } else {
        notes.push(format!("{} has no binomial model; bootstrap used", kind.name()));
    }
    let reps: Vec<f64> = bootstrap_metric(y, yhat, kind, boot, 1).into_iter().flatten().collect();
    if reps.is_empty() {
        return Err(undefined(kind));
    }
    let at_or_above = reps.iter().filter(|&&v| v >= tau).count();
    let p = at_or_above as f64 / reps.len() as f64;
    let mut r = TestResult::from_p_value(method, m - tau, p, &lower_h).with_sizes(0, d1.len());
    notes.push(format!("bootstrap percentile (B={})", boot.resamples));
    r.notes = notes;
    Ok(r)
}

/// A feature cell carried into a correctness row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Number(f64),
    Level(String),
}

/// Features of one prediction with its correctness indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessRow {
    pub features: Vec<FeatureValue>,
    pub z: u8,
}

pub fn correctness_dataset(d: &Dataset) -> Result<Vec<CorrectnessRow>> {
    let z = correctness(d)?;
    let cols: Vec<&ColumnData> = d
        .schema()
        .feature_indices()
        .into_iter()
        .map(|i| &d.columns()[i])
        .collect();
    Ok((0..d.len())
        .map(|r| CorrectnessRow {
            features: cols
                .iter()
                .map(|c| match c {
                    ColumnData::Numeric(v) => FeatureValue::Number(v[r]),
                    ColumnData::Binary(v) => FeatureValue::Number(v[r] as f64),
                    ColumnData::Categorical { .. } => {
                        FeatureValue::Level(c.level_at(r).unwrap_or_default().to_string())
                    }
                })
                .collect(),
            z: z[r],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointMethod {
    FriedmanRafsky,
    Mmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessOptions {
    /// Scale of the `z` coordinate relative to standardized features; `0`
    /// withholds it.
    pub z_scale: f64,
    pub kernel: KernelSpec,
    pub mmd_decision: MmdDecision,
    pub plan: PermutationPlan,
}

impl Default for CorrectnessOptions {
    fn default() -> Self {
        Self {
            z_scale: 1.0,
            kernel: KernelSpec::default(),
            mmd_decision: MmdDecision::Permutation,
            plan: PermutationPlan::default(),
        }
    }
}

/// Joint two-sample test over `(s, c, z)` rows.
pub fn correctness_shift_test(
    d0: &Dataset,
    d1: &Dataset,
    method: JointMethod,
    opts: &CorrectnessOptions,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    let append = if opts.z_scale > 0.0 {
        Append::Correctness(opts.z_scale)
    } else {
        correctness(d0)?;
        correctness(d1)?;
        Append::Nothing
    };
    let enc = Encoder::features(d0, d1, append)?;
    let (a, b) = enc.encode_pair(d0, d1)?;
    let r = match method {
        JointMethod::FriedmanRafsky => friedman_rafsky_test(&a, &b, &opts.plan, hyp)?,
        JointMethod::Mmd => mmd_test(&a, &b, &opts.kernel, opts.mmd_decision, &opts.plan, hyp)?,
    };
    let name = format!("correctness_shift_{}", r.method);
    Ok(r
        .with_method(name)
        .with_note(format!("encoded dimension {}, z scale {}", enc.dim(), opts.z_scale)))
}
