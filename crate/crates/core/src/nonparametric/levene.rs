//! Levene's test for equal spread of two samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, median};
use crate::types::{decide, Hypothesis, NullModel, Sidedness, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Mean,
    #[default]
    Median,
}

/// Two-group Levene statistic on absolute deviations from each group's
/// center.
pub fn levene_statistic(x0: &[f64], x1: &[f64], center: Center) -> f64 {
    let dev = |x: &[f64]| -> Vec<f64> {
        let c = match center {
            Center::Mean => mean(x),
            Center::Median => median(x),
        };
        x.iter().map(|v| (v - c).abs()).collect()
    };
    let z0 = dev(x0);
    let z1 = dev(x1);
    let (m0, m1) = (mean(&z0), mean(&z1));
    let n = (z0.len() + z1.len()) as f64;
    let grand = (z0.iter().sum::<f64>() + z1.iter().sum::<f64>()) / n;
    let between = z0.len() as f64 * (m0 - grand).powi(2) + z1.len() as f64 * (m1 - grand).powi(2);
    let within: f64 = z0.iter().map(|z| (z - m0).powi(2)).sum::<f64>()
        + z1.iter().map(|z| (z - m1).powi(2)).sum::<f64>();
    if within == 0.0 {
        return if between == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (n - 2.0) * between / within
}

pub fn levene_test(x0: &[f64], x1: &[f64], center: Center, hyp: &Hypothesis) -> Result<TestResult> {
    for x in [x0, x1] {
        if x.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: x.len(),
            });
        }
    }
    let w = levene_statistic(x0, x1, center);
    let null = NullModel::F {
        df1: 1.0,
        df2: (x0.len() + x1.len()) as f64 - 2.0,
    };
    let method = match center {
        Center::Mean => "levene_mean",
        Center::Median => "levene_median",
    };
    Ok(decide(w, &null, &hyp.with_sidedness(Sidedness::Greater))?
        .with_method(method)
        .with_sizes(x0.len(), x1.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> Hypothesis {
        Hypothesis::two_sided(0.05).unwrap()
    }

    #[test]
    fn equal_spread_gives_zero() {
        let x0 = [1.0, 3.0, 5.0, 7.0];
        let x1 = [11.0, 13.0, 15.0, 17.0];
        let r = levene_test(&x0, &x1, Center::Mean, &h()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject_h0);
    }

    #[test]
    fn hand_evaluated_example() {
        // Z0 = (5,5,5,5), Z1 = (1,0,0,1); between = 40.5, within = 1
        let x0 = [0.0, 0.0, 10.0, 10.0];
        let x1 = [4.0, 5.0, 5.0, 6.0];
        let r = levene_test(&x0, &x1, Center::Mean, &h()).unwrap();
        assert!((r.statistic - 243.0).abs() < 1e-9);
        assert!(r.reject_h0);
        assert_eq!(r.df2, Some(6.0));
    }

    #[test]
    fn centers_differ_on_skewed_input() {
        let x0 = [0.0, 0.1, 0.2, 0.3, 5.0];
        let x1 = [0.0, 1.0, 2.0, 3.0, 4.0];
        // recompute both by hand
        let by_hand = |c0: f64, c1: f64| {
            let z0: Vec<f64> = x0.iter().map(|v| (v - c0).abs()).collect();
            let z1: Vec<f64> = x1.iter().map(|v| (v - c1).abs()).collect();
            let m0 = z0.iter().sum::<f64>() / 5.0;
            let m1 = z1.iter().sum::<f64>() / 5.0;
            let g = (m0 + m1) / 2.0;
            let between = 5.0 * ((m0 - g).powi(2) + (m1 - g).powi(2));
            let within: f64 = z0.iter().map(|z| (z - m0).powi(2)).sum::<f64>()
                + z1.iter().map(|z| (z - m1).powi(2)).sum::<f64>();
            8.0 * between / within
        };
        let mean_w = levene_statistic(&x0, &x1, Center::Mean);
        let med_w = levene_statistic(&x0, &x1, Center::Median);
        assert!((mean_w - by_hand(1.12, 2.0)).abs() < 1e-9);
        assert!((med_w - by_hand(0.2, 2.0)).abs() < 1e-9);
        assert!((mean_w - med_w).abs() > 1e-3);
    }
}
