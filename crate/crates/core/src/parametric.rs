//! Mean-shift and variance-shift tests under normality assumptions.
//!
//! Sign convention: statistics are oriented as window 0 minus (or over)
//! window 1, so `Sidedness::Greater` is the alternative that the baseline
//! mean (or variance) exceeds the current one.

use crate::error::{Error, Result};
use crate::stats::{mean, variance};
use crate::types::{decide, Hypothesis, NullModel, Sidedness, TestResult};

/// Which mean-shift statistic to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanTestSpec {
    /// Known per-window standard deviations.
    Z { sigma0: f64, sigma1: f64 },
    /// Equal-variance t-test with pooled standard deviation.
    TPooled,
    /// Welch's unequal-variance t-test.
    TWelch,
}

impl MeanTestSpec {
    pub fn z(sigma0: f64, sigma1: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma1 > 0.0) || !sigma0.is_finite() || !sigma1.is_finite() {
            return Err(Error::InvalidParameter(
                "z-test needs known standard deviations > 0".into(),
            ));
        }
        Ok(MeanTestSpec::Z { sigma0, sigma1 })
    }

    fn validate(&self) -> Result<()> {
        if let MeanTestSpec::Z { sigma0, sigma1 } = *self {
            Self::z(sigma0, sigma1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceTestSpec {
    F,
    Bartlett,
}

fn need(x: &[f64], k: usize) -> Result<()> {
    if x.len() < k {
        Err(Error::TooFewSamples {
            needed: k,
            got: x.len(),
        })
    } else {
        Ok(())
    }
}

/// Statistic for a zero standard error: 0 when the means agree, otherwise
/// an infinite statistic in the direction of the difference.
fn degenerate(diff: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Two-sample test for a difference in means.
pub fn mean_shift_test(
    x0: &[f64],
    x1: &[f64],
    spec: MeanTestSpec,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    spec.validate()?;
    let (n0, n1) = (x0.len(), x1.len());
    let diff = match spec {
        MeanTestSpec::Z { .. } => {
            need(x0, 1)?;
            need(x1, 1)?;
            mean(x0) - mean(x1)
        }
        _ => {
            need(x0, 2)?;
            need(x1, 2)?;
            mean(x0) - mean(x1)
        }
    };
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let (method, stat, null, zero_se) = match spec {
        MeanTestSpec::Z { sigma0, sigma1 } => {
            let se = (sigma0 * sigma0 / n0f + sigma1 * sigma1 / n1f).sqrt();
            ("z_test", diff / se, NullModel::StandardNormal, false)
        }
        MeanTestSpec::TPooled => {
            let df = n0f + n1f - 2.0;
            let sp = (((n0f - 1.0) * variance(x0) + (n1f - 1.0) * variance(x1)) / df).sqrt();
            let se = sp * (1.0 / n0f + 1.0 / n1f).sqrt();
            let zero = se == 0.0;
            let stat = if zero { degenerate(diff) } else { diff / se };
            ("t_pooled", stat, NullModel::StudentT { df }, zero)
        }
        MeanTestSpec::TWelch => {
            let a = variance(x0) / n0f;
            let b = variance(x1) / n1f;
            let se = (a + b).sqrt();
            let zero = se == 0.0;
            let df = if zero {
                n0f + n1f - 2.0
            } else {
                (a + b) * (a + b) / (a * a / (n0f - 1.0) + b * b / (n1f - 1.0))
            };
            let stat = if zero { degenerate(diff) } else { diff / se };
            ("t_welch", stat, NullModel::StudentT { df }, zero)
        }
    };
    let mut res = decide(stat, &null, hyp)?.with_method(method).with_sizes(n0, n1);
    if zero_se {
        res = res.with_note("zero pooled standard error; statistic set by the sign of the mean difference");
    }
    Ok(res)
}

/// Two-sample test for a difference in variances.
pub fn variance_shift_test(
    x0: &[f64],
    x1: &[f64],
    spec: VarianceTestSpec,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    need(x0, 2)?;
    need(x1, 2)?;
    let (n0, n1) = (x0.len(), x1.len());
    let (v0, v1) = (variance(x0), variance(x1));
    if v0 == 0.0 || v1 == 0.0 {
        return Err(Error::DegenerateVariance(format!(
            "sample variances are {v0} and {v1}"
        )));
    }
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    match spec {
        VarianceTestSpec::F => {
            let null = NullModel::F {
                df1: n0f - 1.0,
                df2: n1f - 1.0,
            };
            Ok(decide(v0 / v1, &null, hyp)?.with_method("f_test").with_sizes(n0, n1))
        }
        VarianceTestSpec::Bartlett => {
            let big_n = n0f + n1f;
            let sp2 = ((n0f - 1.0) * v0 + (n1f - 1.0) * v1) / (big_n - 2.0);
            let num = (big_n - 2.0) * sp2.ln() - (n0f - 1.0) * v0.ln() - (n1f - 1.0) * v1.ln();
            let den = 1.0 + (1.0 / (n0f - 1.0) + 1.0 / (n1f - 1.0) - 1.0 / (big_n - 2.0)) / 3.0;
            // rounding can push an exact zero slightly negative
            let b = (num / den).max(0.0);
            let upper = hyp.with_sidedness(Sidedness::Greater);
            let mut res = decide(b, &NullModel::ChiSquare { df: 1.0 }, &upper)?
                .with_method("bartlett")
                .with_sizes(n0, n1);
            if hyp.sidedness != Sidedness::Greater {
                res = res.with_note("bartlett statistic is non-directional; upper chi-square tail used");
            }
            Ok(res)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RejectionRegion;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn h() -> Hypothesis {
        Hypothesis::two_sided(0.05).unwrap()
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.5, 3.0, 7.0];
        for spec in [MeanTestSpec::TPooled, MeanTestSpec::TWelch, MeanTestSpec::z(1.0, 1.0).unwrap()] {
            let r = mean_shift_test(&x, &x, spec, &h()).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!(!r.reject_h0);
        }
    }

    #[test]
    fn z_printed_formula() {
        // means differ by exactly 0.5
        let x0: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.5 } else { 1.5 }).collect();
        let x1: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let r = mean_shift_test(&x0, &x1, MeanTestSpec::z(1.0, 1.0).unwrap(), &h()).unwrap();
        assert!((r.statistic - 0.5 / 0.02f64.sqrt()).abs() < 1e-12);
        assert!((r.statistic - 3.5355).abs() < 1e-4);
        assert!(r.reject_h0);
    }

    #[test]
    fn t_pooled_hand_value() {
        let r = mean_shift_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0], MeanTestSpec::TPooled, &h()).unwrap();
        // s_p^2 = 5/3, se = sqrt(5/3 * 1/2)
        let expect = -1.0 / (5.0f64 / 6.0).sqrt();
        assert!((r.statistic - expect).abs() < 1e-12);
        assert!((r.statistic + 1.0954).abs() < 1e-4);
        assert_eq!(r.df, Some(6.0));
    }

    #[test]
    fn zero_variance_paths() {
        let r = mean_shift_test(&[2.0, 2.0], &[2.0, 2.0, 2.0], MeanTestSpec::TPooled, &h()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject_h0);
        let r = mean_shift_test(&[3.0, 3.0], &[2.0, 2.0], MeanTestSpec::TWelch, &h()).unwrap();
        assert_eq!(r.statistic, f64::INFINITY);
        assert!(r.reject_h0);
        assert!(!r.notes.is_empty());
        assert!(matches!(
            mean_shift_test(&[1.0], &[1.0, 2.0], MeanTestSpec::TPooled, &h()),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(MeanTestSpec::z(0.0, 1.0).is_err());
    }

    #[test]
    fn f_and_bartlett() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let r = variance_shift_test(&x, &x, VarianceTestSpec::F, &h()).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(!r.reject_h0);
        let b = variance_shift_test(&x, &x, VarianceTestSpec::Bartlett, &h()).unwrap();
        assert!(b.statistic.abs() < 1e-12);
        assert!(!b.reject_h0);
        assert!((b.critical_value.unwrap() - 3.841).abs() < 1e-3);
        assert_eq!(b.region, Some(RejectionRegion::Upper));

        // x1: 21 points with variance 1; x0 = 2 * x1 has variance 4
        let x1: Vec<f64> = (0..21).map(|i| (i as f64 - 10.0) / (770.0f64 / 20.0).sqrt()).collect();
        assert!((variance(&x1) - 1.0).abs() < 1e-12);
        let x0: Vec<f64> = x1.iter().map(|v| 2.0 * v + 3.0).collect();
        let r = variance_shift_test(&x0, &x1, VarianceTestSpec::F, &h()).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!(r.reject_h0);

        assert!(matches!(
            variance_shift_test(&[1.0, 1.0], &x, VarianceTestSpec::Bartlett, &h()),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn h0_rejection_rates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let reps = 2000;
        let mut counts = [0usize; 5];
        for _ in 0..reps {
            let x0: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x1: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            let tests = [
                mean_shift_test(&x0, &x1, MeanTestSpec::z(1.0, 1.0).unwrap(), &h()).unwrap(),
                mean_shift_test(&x0, &x1, MeanTestSpec::TPooled, &h()).unwrap(),
                mean_shift_test(&x0, &x1, MeanTestSpec::TWelch, &h()).unwrap(),
                variance_shift_test(&x0, &x1, VarianceTestSpec::F, &h()).unwrap(),
                variance_shift_test(&x0, &x1, VarianceTestSpec::Bartlett, &h()).unwrap(),
            ];
            for (c, t) in counts.iter_mut().zip(&tests) {
                *c += t.reject_h0 as usize;
            }
        }
        let se = (0.05 * 0.95 / reps as f64).sqrt();
        for c in counts {
            let rate = c as f64 / reps as f64;
            assert!((rate - 0.05).abs() <= 3.0 * se, "rate {rate}");
        }
    }

    proptest! {
        #[test]
        fn welch_equals_pooled_for_equal_designs(v in proptest::collection::vec(-50.0f64..50.0, 3..20), shift in -5.0f64..5.0) {
            let x0 = v.clone();
            let x1: Vec<f64> = v.iter().rev().map(|a| a + shift).collect();
            let a = mean_shift_test(&x0, &x1, MeanTestSpec::TPooled, &h()).unwrap();
            let b = mean_shift_test(&x0, &x1, MeanTestSpec::TWelch, &h()).unwrap();
            prop_assume!(a.statistic.is_finite());
            prop_assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.abs().max(1.0));
        }

        #[test]
        fn f_reciprocal_and_swap_invariant(
            x0 in proptest::collection::vec(-10.0f64..10.0, 3..15),
            x1 in proptest::collection::vec(-10.0f64..10.0, 3..15),
        ) {
            prop_assume!(variance(&x0) > 1e-9 && variance(&x1) > 1e-9);
            let a = variance_shift_test(&x0, &x1, VarianceTestSpec::F, &h()).unwrap();
            let b = variance_shift_test(&x1, &x0, VarianceTestSpec::F, &h()).unwrap();
            prop_assert!((a.statistic * b.statistic - 1.0).abs() < 1e-12);
            prop_assert_eq!(a.reject_h0, b.reject_h0);
            prop_assert!((a.p_value.unwrap() - b.p_value.unwrap()).abs() < 1e-9);
        }

        #[test]
        fn location_equivariance(
            x0 in proptest::collection::vec(-10.0f64..10.0, 2..15),
            x1 in proptest::collection::vec(-10.0f64..10.0, 2..15),
            c in -100.0f64..100.0,
        ) {
            let s0: Vec<f64> = x0.iter().map(|v| v + c).collect();
            let s1: Vec<f64> = x1.iter().map(|v| v + c).collect();
            for spec in [MeanTestSpec::TPooled, MeanTestSpec::TWelch] {
                let a = mean_shift_test(&x0, &x1, spec, &h()).unwrap().statistic;
                let b = mean_shift_test(&s0, &s1, spec, &h()).unwrap().statistic;
                prop_assume!(a.is_finite() && a.abs() < 1e6);
                prop_assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
            }
        }
    }
}
