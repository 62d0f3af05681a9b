//! Two-sample Anderson-Darling test.
//!
//! Uses the rank-based k-sample statistic of Scholz and Stephens with the
//! midrank adjustment for ties, specialised to two samples. Its null
//! distribution depends on the tie structure, so p-values come from the
//! permutation engine.

use crate::error::{Error, Result};
use crate::permutation::{outcome_result, permutation_null, PermutationPlan};
use crate::types::{Hypothesis, TestResult};

/// Pooled-sample tie structure shared by every relabeling.
#[derive(Debug, Clone)]
pub struct AdPrepared {
    n0: usize,
    n: usize,
    /// distinct-value index of each pooled observation
    group_of: Vec<usize>,
    /// multiplicity of each distinct value
    mult: Vec<usize>,
    /// midrank-adjusted cumulative pooled counts
    b_adj: Vec<f64>,
}

impl AdPrepared {
    pub fn new(x0: &[f64], x1: &[f64]) -> Self {
        let pooled: Vec<f64> = x0.iter().chain(x1).copied().collect();
        let n = pooled.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
        let mut group_of = vec![0; n];
        let mut mult: Vec<usize> = Vec::new();
        let mut prev: Option<f64> = None;
        for &i in &order {
            if prev != Some(pooled[i]) {
                mult.push(0);
                prev = Some(pooled[i]);
            }
            *mult.last_mut().unwrap() += 1;
            group_of[i] = mult.len() - 1;
        }
        let mut cum = 0usize;
        let b_adj = mult
            .iter()
            .map(|&l| {
                cum += l;
                cum as f64 - l as f64 / 2.0
            })
            .collect();
        Self {
            n0: x0.len(),
            n,
            group_of,
            mult,
            b_adj,
        }
    }

    /// Statistic for the relabeling whose first `n0` entries form sample 0.
    pub fn statistic(&self, perm: &[usize]) -> f64 {
        let mut f0 = vec![0usize; self.mult.len()];
        for &i in &perm[..self.n0] {
            f0[self.group_of[i]] += 1;
        }
        let n = self.n as f64;
        let sizes = [self.n0 as f64, (self.n - self.n0) as f64];
        let mut sums = [0.0f64; 2];
        let mut cum = [0usize; 2];
        for (j, &l) in self.mult.iter().enumerate() {
            let lf = l as f64;
            let denom = self.b_adj[j] * (n - self.b_adj[j]) - n * lf / 4.0;
            let f = [f0[j], l - f0[j]];
            for s in 0..2 {
                let m_adj = cum[s] as f64 + f[s] as f64 / 2.0;
                cum[s] += f[s];
                if denom > 0.0 {
                    let dev = n * m_adj - sizes[s] * self.b_adj[j];
                    sums[s] += lf * dev * dev / denom;
                }
            }
        }
        (n - 1.0) / (n * n) * (sums[0] / sizes[0] + sums[1] / sizes[1])
    }
}

pub fn ad_statistic(x0: &[f64], x1: &[f64]) -> f64 {
    let prep = AdPrepared::new(x0, x1);
    let identity: Vec<usize> = (0..prep.n).collect();
    prep.statistic(&identity)
}

pub fn anderson_darling_test(
    x0: &[f64],
    x1: &[f64],
    plan: &PermutationPlan,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    hyp.validate()?;
    for x in [x0, x1] {
        if x.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: x.len(),
            });
        }
    }
    let prep = AdPrepared::new(x0, x1);
    let outcome = permutation_null(x0.len(), x1.len(), plan, |perm| Ok(prep.statistic(perm)))?;
    Ok(outcome_result("anderson_darling", &outcome, hyp, x0.len(), x1.len()))
}
