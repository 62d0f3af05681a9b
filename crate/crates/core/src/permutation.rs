//! Permutation calibration: turns any two-sample statistic into a test.
//!
//! The pooled sample is relabeled `B` times. Permutation `b` is a
//! Fisher-Yates shuffle driven by a ChaCha stream selected by `(seed, b)`,
//! so each draw is reproducible on its own and the null sample does not
//! depend on how iterations are scheduled across threads.
//!
//! The p-value uses the add-one estimator `(1 + #{T_b >= T_obs}) / (1 + B)`;
//! large statistics are evidence against the null.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Hypothesis, Sidedness, TestResult};

pub const DEFAULT_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PermutationPlan {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

impl PermutationPlan {
    pub fn new(iterations: usize, seed: u64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidParameter("permutation count must be >= 1".into()));
        }
        Ok(Self { iterations, seed })
    }
}

/// Random stream for draw `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Permutation `index` of `0..n`.
pub fn permuted_indices(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, index));
    idx
}

/// Observed statistic, its permutation null sample and the add-one p-value.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    pub observed: f64,
    pub null: Vec<f64>,
    pub p_value: f64,
}

impl PermutationOutcome {
    /// Five-number summary of the null draws, for report notes.
    pub fn summary(&self) -> String {
        let mut s = self.null.clone();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| s[((s.len() - 1) as f64 * p).round() as usize];
        format!(
            "permutation null (B={}): min={:.6} q05={:.6} median={:.6} q95={:.6} max={:.6}",
            s.len(),
            q(0.0),
            q(0.05),
            q(0.5),
            q(0.95),
            q(1.0)
        )
    }
}

fn exceeds(tb: f64, observed: f64) -> bool {
    tb >= observed - 1e-12 * observed.abs().max(1.0)
}

/// Permutation null for a statistic over the pooled index space.
///
/// `stat` receives an ordering of `0..n0+n1`; its first `n0` entries form
/// group 0. The identity ordering gives the observed statistic.
pub fn permutation_null<F>(n0: usize, n1: usize, plan: &PermutationPlan, stat: F) -> Result<PermutationOutcome>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if plan.iterations == 0 {
        return Err(Error::InvalidParameter("permutation count must be >= 1".into()));
    }
    let n = n0 + n1;
    let identity: Vec<usize> = (0..n).collect();
    let observed = stat(&identity)?;
    let null: Vec<Result<f64>> = (0..plan.iterations)
        .into_par_iter()
        .map(|b| {
            let perm = permuted_indices(n, plan.seed, b as u64);
            stat(&perm).map_err(|e| Error::StatisticFailure {
                index: b,
                message: e.to_string(),
            })
        })
        .collect();
    let null = null.into_iter().collect::<Result<Vec<f64>>>()?;
    let hits = null.iter().filter(|&&t| exceeds(t, observed)).count();
    let p_value = (1 + hits) as f64 / (1 + plan.iterations) as f64;
    Ok(PermutationOutcome {
        observed,
        null,
        p_value,
    })
}

/// Wraps an arbitrary statistic of two samples into a permutation test.
pub fn permutation_test<T, F>(
    d0: &[T],
    d1: &[T],
    plan: &PermutationPlan,
    hyp: &Hypothesis,
    method: &str,
    stat: F,
) -> Result<TestResult>
where
    T: Clone + Sync,
    F: Fn(&[T], &[T]) -> Result<f64> + Sync,
{
    if d0.is_empty() || d1.is_empty() {
        return Err(Error::EmptySample);
    }
    let pooled: Vec<&T> = d0.iter().chain(d1.iter()).collect();
    let n0 = d0.len();
    let outcome = permutation_null(n0, d1.len(), plan, |perm| {
        let a: Vec<T> = perm[..n0].iter().map(|&i| pooled[i].clone()).collect();
        let b: Vec<T> = perm[n0..].iter().map(|&i| pooled[i].clone()).collect();
        stat(&a, &b)
    })?;
    Ok(outcome_result(method, &outcome, hyp, n0, d1.len()))
}

/// Builds the test result for a permutation outcome.
pub fn outcome_result(
    method: &str,
    outcome: &PermutationOutcome,
    hyp: &Hypothesis,
    n0: usize,
    n1: usize,
) -> TestResult {
    let hyp = hyp.with_sidedness(Sidedness::Greater);
    TestResult::from_p_value(method, outcome.observed, outcome.p_value, &hyp)
        .with_sizes(n0, n1)
        .with_note(outcome.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    fn h() -> Hypothesis {
        Hypothesis::two_sided(0.05).unwrap()
    }

    fn mean_gap(a: &[f64], b: &[f64]) -> Result<f64> {
        Ok((mean(a) - mean(b)).abs())
    }

    #[test]
    fn constant_pool_gives_p_one() {
        let plan = PermutationPlan::new(200, 3).unwrap();
        let r = permutation_test(&[2.0; 10], &[2.0; 7], &plan, &h(), "mean_gap", mean_gap).unwrap();
        assert_eq!(r.p_value, Some(1.0));
        assert!(!r.reject_h0);
    }

    #[test]
    fn extreme_statistic_hits_floor() {
        let plan = PermutationPlan::new(99, 1).unwrap();
        let out = permutation_null(5, 5, &plan, |perm| {
            // only the identity ordering scores 1
            Ok(if perm.iter().enumerate().all(|(i, &p)| i == p) { 1.0 } else { 0.0 })
        })
        .unwrap();
        assert_eq!(out.p_value, 1.0 / 100.0);
    }

    #[test]
    fn p_value_bounds_and_determinism() {
        let x0: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1: Vec<f64> = (0..25).map(|i| (i as f64 * 0.91).cos() + 0.3).collect();
        let plan = PermutationPlan::new(300, 42).unwrap();
        let a = permutation_test(&x0, &x1, &plan, &h(), "m", mean_gap).unwrap();
        let b = permutation_test(&x0, &x1, &plan, &h(), "m", mean_gap).unwrap();
        assert_eq!(a, b);
        let p = a.p_value.unwrap();
        assert!((1.0 / 301.0..=1.0).contains(&p));
        // same result when run on a single-thread pool
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| permutation_test(&x0, &x1, &plan, &h(), "m", mean_gap).unwrap());
        assert_eq!(a.p_value, c.p_value);
    }

    #[test]
    fn statistic_failure_reports_index() {
        let plan = PermutationPlan::new(10, 0).unwrap();
        let err = permutation_null(3, 3, &plan, |perm| {
            if perm[0] == 0 && perm[1] == 1 && perm[2] == 2 {
                Ok(0.0)
            } else {
                Err(Error::EmptySample)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::StatisticFailure { index: 0, .. }));
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a = permuted_indices(50, 9, 17);
        let _ = permuted_indices(50, 9, 3);
        assert_eq!(a, permuted_indices(50, 9, 17));
        assert_ne!(a, permuted_indices(50, 9, 18));
    }
}
