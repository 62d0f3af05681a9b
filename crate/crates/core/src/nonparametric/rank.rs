//! Mann-Whitney U (Wilcoxon rank-sum) test.

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_quantile, normal_sf};
use crate::stats::midranks;
use crate::types::{Hypothesis, RejectionRegion, Sidedness, TestResult};

/// Largest `n0 * n1` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 400;

/// `U = n0*n1 + n0(n0+1)/2 - R0` using midranks.
///
/// `U` counts pairs with `x0_i < x1_j` (ties count one half), so a small `U`
/// means window 0 tends to be larger.
pub fn u_statistic(x0: &[f64], x1: &[f64]) -> f64 {
    let pooled: Vec<f64> = x0.iter().chain(x1).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let r0: f64 = ranks[..x0.len()].iter().sum();
    let (n0, n1) = (x0.len() as f64, x1.len() as f64);
    n0 * n1 + n0 * (n0 + 1.0) / 2.0 - r0
}

/// Null frequencies of `U` for sizes `(m, n)` without ties:
/// coefficients of the Gaussian binomial `[m+n choose m]_q`.
pub fn exact_counts(m: usize, n: usize) -> Vec<i128> {
    let len = m * n + 1;
    let mut c = vec![0i128; len];
    c[0] = 1;
    for i in 1..=m {
        // multiply by (1 - q^(n+i))
        let a = n + i;
        for k in (a..len).rev() {
            c[k] -= c[k - a];
        }
        // divide by (1 - q^i)
        for k in i..len {
            c[k] += c[k - i];
        }
    }
    c
}

/// Exact null CDF `P(U <= u)` for every integer `u`.
fn exact_cdf(m: usize, n: usize) -> Vec<f64> {
    let counts = exact_counts(m, n);
    let total: i128 = counts.iter().sum();
    let mut acc = 0i128;
    counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect()
}

/// Two-sided exact critical value: the largest `c` with
/// `2 P(U <= c) < alpha`, or `None` when no such `c` exists.
pub fn exact_critical_value(n0: usize, n1: usize, alpha: f64) -> Option<usize> {
    let cdf = exact_cdf(n0, n1);
    cdf.iter().take_while(|&&p| 2.0 * p < alpha).count().checked_sub(1)
}

pub fn mann_whitney_u(x0: &[f64], x1: &[f64], hyp: &Hypothesis) -> Result<TestResult> {
    hyp.validate()?;
    if x0.is_empty() || x1.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n0, n1) = (x0.len(), x1.len());
    let u = u_statistic(x0, x1);
    let pooled: Vec<f64> = x0.iter().chain(x1).copied().collect();
    let (_, ties) = midranks(&pooled);
    let mn = (n0 * n1) as f64;
    let alpha = hyp.alpha;

    if n0 * n1 <= EXACT_LIMIT && ties.is_empty() {
        let cdf = exact_cdf(n0, n1);
        let ui = u.round() as usize;
        let lower = cdf[ui];
        let upper = if ui == 0 { 1.0 } else { 1.0 - cdf[ui - 1] };
        let p = match hyp.sidedness {
            Sidedness::Greater => lower,
            Sidedness::Less => upper,
            Sidedness::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        };
        let mut res = TestResult::from_p_value("mann_whitney_u", u, p, hyp)
            .with_sizes(n0, n1)
            .with_note("exact null distribution");
        let lower_crit = |level: f64| cdf.iter().take_while(|&&q| q < level).count().checked_sub(1);
        match hyp.sidedness {
            Sidedness::TwoSided => {
                if let Some(c) = lower_crit(alpha / 2.0) {
                    res = res
                        .with_critical(c as f64, RejectionRegion::Lower)
                        .with_note(format!("reject when min(U, n0*n1 - U) <= {c}"));
                }
            }
            Sidedness::Greater => {
                if let Some(c) = lower_crit(alpha) {
                    res = res.with_critical(c as f64, RejectionRegion::Lower);
                }
            }
            Sidedness::Less => {
                if let Some(c) = lower_crit(alpha) {
                    res = res.with_critical(mn - c as f64, RejectionRegion::Upper);
                }
            }
        }
        return Ok(res);
    }

    let n = (n0 + n1) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = mn / 12.0 * ((n + 1.0) - tie_term);
    let mean = mn / 2.0;
    let mut res = if var <= 0.0 {
        TestResult::from_p_value("mann_whitney_u", u, 1.0, hyp).with_note("all observations tied")
    } else {
        let sd = var.sqrt();
        // continuity-corrected tails
        let lower = normal_cdf((u - mean + 0.5) / sd);
        let upper = normal_sf((u - mean - 0.5) / sd);
        let p = match hyp.sidedness {
            Sidedness::Greater => lower,
            Sidedness::Less => upper,
            Sidedness::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        };
        let z = match hyp.sidedness {
            Sidedness::TwoSided => normal_quantile(alpha / 2.0),
            _ => normal_quantile(alpha),
        };
        let res = TestResult::from_p_value("mann_whitney_u", u, p, hyp);
        match hyp.sidedness {
            Sidedness::Less => res.with_critical(mean - z * sd + 0.5, RejectionRegion::Upper),
            _ => res.with_critical(mean + z * sd - 0.5, RejectionRegion::Lower),
        }
    };
    res = res.with_sizes(n0, n1).with_note(if ties.is_empty() {
        "normal approximation with continuity correction".to_string()
    } else {
        format!(
            "normal approximation with continuity and tie correction ({} tie groups)",
            ties.len()
        )
    });
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h() -> Hypothesis {
        Hypothesis::two_sided(0.05).unwrap()
    }

    fn brute_u(x0: &[f64], x1: &[f64]) -> f64 {
        // n0*n1 minus pairs where x0 beats x1, ties half
        let mut greater = 0.0;
        for a in x0 {
            for b in x1 {
                if a > b {
                    greater += 1.0;
                } else if a == b {
                    greater += 0.5;
                }
            }
        }
        (x0.len() * x1.len()) as f64 - greater
    }

    #[test]
    fn critical_value_20_20() {
        assert_eq!(exact_critical_value(20, 20, 0.05), Some(127));
        let x0: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x1: Vec<f64> = (0..20).map(|i| i as f64 + 0.5).collect();
        let r = mann_whitney_u(&x0, &x1, &h()).unwrap();
        assert_eq!(r.critical_value, Some(127.0));
    }

    #[test]
    fn maximal_separation() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &h()).unwrap();
        assert_eq!(r.statistic, 9.0);
        assert_eq!(brute_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 9.0);
        // exact two-sided p = 2 / C(6,3)
        assert!((r.p_value.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_are_centered() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let r = mann_whitney_u(&x, &x, &h()).unwrap();
        assert_eq!(r.statistic, 18.0);
        assert!(!r.reject_h0);
    }

    #[test]
    fn counts_sum_to_binomial() {
        let c = exact_counts(5, 7);
        assert_eq!(c.iter().sum::<i128>(), 792);
        assert!(c.iter().all(|&v| v >= 0));
        assert_eq!(c, c.iter().rev().copied().collect::<Vec<_>>());
    }

    #[test]
    fn empty_sample() {
        assert!(matches!(mann_whitney_u(&[], &[1.0], &h()), Err(Error::EmptySample)));
    }

    proptest! {
        #[test]
        fn u_matches_pair_counting(
            x0 in proptest::collection::vec(0i32..6, 1..=8),
            x1 in proptest::collection::vec(0i32..6, 1..=8),
        ) {
            let a: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = x1.iter().map(|&v| v as f64).collect();
            prop_assert_eq!(u_statistic(&a, &b), brute_u(&a, &b));
        }
    }
}
