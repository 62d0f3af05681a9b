//! Dispatch of configured tests onto a pair of windows.

use postmon_core::divergence::{divergence_test, energy_test, DEFAULT_EPSILON};
use postmon_core::encode::{Append, Encoder};
use postmon_core::nonparametric::{
    anderson_darling_test, friedman_rafsky_test, ks_test, levene_test, mann_whitney_u, mmd_test, KernelSpec,
};
use postmon_core::parametric::{mean_shift_test, variance_shift_test, MeanTestSpec, VarianceTestSpec};
use postmon_core::performance::{
    correctness_shift_test, deviation_test, spec_threshold_test, BootstrapPlan, CorrectnessOptions, JointMethod,
};
use postmon_core::{Dataset, DivergenceKind, Error, Hypothesis, Kind, MetricKind, PermutationPlan, Result, TestResult};
use serde::{Deserialize, Serialize};

use crate::config::{Shape, Stage, TestEntry, TestName, TestParams};

/// One executed test as it appears in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    pub result: TestResult,
}

/// Seed of the `k`-th test run of a monitoring cycle (splitmix64 mix).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The feature lists a test entry expands to: one per numeric feature for
/// univariate tests, a single list for joint tests, none for outcome tests.
pub fn expand(entry: &TestEntry, d: &Dataset) -> Vec<Vec<String>> {
    let schema = d.schema();
    let features = |numeric_only: bool| -> Vec<String> {
        if !entry.features.is_empty() {
            return entry.features.clone();
        }
        schema
            .columns()
            .iter()
            .filter(|c| c.role.is_feature() && (!numeric_only || c.kind == Kind::Numeric))
            .map(|c| c.name.clone())
            .collect()
    };
    match entry.test.shape() {
        Shape::Univariate => features(true).into_iter().map(|f| vec![f]).collect(),
        Shape::Joint => vec![features(false)],
        Shape::Outcome => vec![Vec::new()],
    }
}

fn kernel(p: &TestParams) -> Result<KernelSpec> {
    match p.bandwidth {
        Some(s) => KernelSpec::fixed(s),
        None => Ok(KernelSpec::default()),
    }
}

fn column<'a>(d: &'a Dataset, name: &str) -> Result<&'a [f64]> {
    d.numeric(name)
        .ok_or_else(|| Error::InvalidParameter(format!("`{name}` is not a numeric column")))
}

/// Runs one expansion of `entry` in `stage`. `features` comes from
/// [`expand`]; `hyp` already carries any multiplicity adjustment.
#[allow(clippy::too_many_arguments)]
pub fn run_one(
    entry: &TestEntry,
    stage: Stage,
    features: &[String],
    d0: &Dataset,
    d1: &Dataset,
    hyp: &Hypothesis,
    seed: u64,
    permutations: usize,
) -> Result<TestRecord> {
    let p = &entry.params;
    let plan = PermutationPlan::new(p.permutations.unwrap_or(permutations), seed)?;
    let result = match entry.test.shape() {
        Shape::Univariate => {
            let name = features
                .first()
                .ok_or_else(|| Error::InvalidParameter("univariate test without a feature".into()))?;
            univariate(entry.test, p, column(d0, name)?, column(d1, name)?, &plan, hyp)?
        }
        Shape::Joint => {
            let cols: Vec<usize> = features
                .iter()
                .map(|f| {
                    d0.schema()
                        .index_of(f)
                        .ok_or_else(|| Error::InvalidParameter(format!("unknown feature `{f}`")))
                })
                .collect::<Result<_>>()?;
            let append = if stage == Stage::ConceptDrift {
                Append::Label(1.0)
            } else {
                Append::Nothing
            };
            let (e0, e1) = Encoder::fit(d0, d1, &cols, append)?.encode_pair(d0, d1)?;
            match entry.test {
                TestName::FriedmanRafsky => friedman_rafsky_test(&e0, &e1, &plan, hyp)?,
                TestName::Mmd => mmd_test(&e0, &e1, &kernel(p)?, p.mmd_decision.unwrap_or_default(), &plan, hyp)?,
                _ => energy_test(&e0, &e1, &plan, hyp)?,
            }
        }
        Shape::Outcome => {
            let metric = p.metric.unwrap_or(MetricKind::Accuracy);
            let boot = BootstrapPlan {
                resamples: p.resamples.unwrap_or(BootstrapPlan::default().resamples),
                seed,
            };
            match entry.test {
                TestName::Deviation => deviation_test(d0, d1, metric, hyp, &boot)?,
                TestName::SpecThreshold => spec_threshold_test(d1, metric, hyp, &boot)?,
                _ => {
                    let defaults = CorrectnessOptions::default();
                    let opts = CorrectnessOptions {
                        z_scale: p.z_scale.unwrap_or(defaults.z_scale),
                        kernel: kernel(p)?,
                        mmd_decision: p.mmd_decision.unwrap_or(defaults.mmd_decision),
                        plan,
                    };
                    correctness_shift_test(d0, d1, p.method.unwrap_or(JointMethod::Mmd), &opts, hyp)?
                }
            }
        }
    };
    Ok(TestRecord {
        test: entry.test.name(),
        features: features.to_vec(),
        result,
    })
}

/// A univariate test on two numeric samples.
pub fn univariate(
    test: TestName,
    p: &TestParams,
    x0: &[f64],
    x1: &[f64],
    plan: &PermutationPlan,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    let div = |kind| divergence_test(x0, x1, kind, p.epsilon.unwrap_or(DEFAULT_EPSILON), plan, hyp);
    match test {
        TestName::ZTest => {
            let (s0, s1) = p
                .sigma0
                .zip(p.sigma1)
                .ok_or_else(|| Error::InvalidParameter("z_test needs sigma0 and sigma1".into()))?;
            mean_shift_test(x0, x1, MeanTestSpec::z(s0, s1)?, hyp)
        }
        TestName::TPooled => mean_shift_test(x0, x1, MeanTestSpec::TPooled, hyp),
        TestName::TWelch => mean_shift_test(x0, x1, MeanTestSpec::TWelch, hyp),
        TestName::FTest => variance_shift_test(x0, x1, VarianceTestSpec::F, hyp),
        TestName::Bartlett => variance_shift_test(x0, x1, VarianceTestSpec::Bartlett, hyp),
        TestName::MannWhitney => mann_whitney_u(x0, x1, hyp),
        TestName::Levene => levene_test(x0, x1, p.center.unwrap_or_default(), hyp),
        TestName::Ks => ks_test(x0, x1, hyp),
        TestName::AndersonDarling => anderson_darling_test(x0, x1, plan, hyp),
        TestName::Energy => div(DivergenceKind::Energy),
        TestName::Wasserstein1 => div(DivergenceKind::Wasserstein1),
        TestName::Wasserstein2 => div(DivergenceKind::Wasserstein2),
        TestName::Kl => div(DivergenceKind::Kl),
        TestName::Js => div(DivergenceKind::Js),
        other => Err(Error::InvalidParameter(format!("{} is not a univariate test", other.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_index() {
        let s: Vec<u64> = (0..100).map(|k| derive_seed(7, k)).collect();
        let mut u = s.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), s.len());
        assert_eq!(derive_seed(7, 3), s[3]);
    }
}
