//! Friedman-Rafsky minimum-spanning-tree test.
//!
//! The Euclidean MST of the pooled sample is built once; the statistic is
//! the number of tree edges joining points from different windows. Few
//! cross edges mean the windows occupy different regions, so the test
//! rejects for small standardized values.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, euclidean, Points};
use crate::permutation::{permutation_null, PermutationPlan};
use crate::special::{normal_cdf, normal_quantile};
use crate::types::{Hypothesis, RejectionRegion, Sidedness, TestResult};

/// Strict total order on edges: length, then index pair.
fn edge_cmp(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

fn key(d: f64, i: usize, j: usize) -> (f64, usize, usize) {
    (d, i.min(j), i.max(j))
}

/// Euclidean MST over `points`, as `(lo, hi)` index pairs in insertion
/// order. Ties in length are broken by the index pair, so the tree is
/// unique and matches Kruskal's algorithm under the same ordering.
pub fn minimum_spanning_tree(points: &[&[f64]]) -> Vec<(usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize, usize)> = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let p = points[current];
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let k = key(euclidean(p, points[v]), current, v);
            if edge_cmp(k, best[v]) == Ordering::Less {
                best[v] = k;
                parent[v] = current;
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| edge_cmp(best[a], best[b]))
            .expect("non-tree vertex remains");
        in_tree[next] = true;
        edges.push((parent[next].min(next), parent[next].max(next)));
        current = next;
    }
    edges
}

/// Number of edge pairs sharing a node: `sum_v deg(v) (deg(v) - 1) / 2`.
pub fn adjacent_edge_pairs(edges: &[(usize, usize)], n: usize) -> usize {
    let mut deg = vec![0usize; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum()
}

/// Permutation mean and variance of the cross-edge count for a fixed tree
/// with `shared` adjacent edge pairs.
pub fn null_moments(n0: usize, n1: usize, shared: usize) -> (f64, f64) {
    let (m, k) = (n0 as f64, n1 as f64);
    let n = m + k;
    let c = shared as f64;
    let mean = 2.0 * m * k / n;
    let var = 2.0 * m * k / (n * (n - 1.0))
        * ((2.0 * m * k - n) / n
            + (c - n + 2.0) / ((n - 2.0) * (n - 3.0)) * (n * (n - 1.0) - 4.0 * m * k + 2.0));
    (mean, var)
}

/// The moment expressions in the form they are commonly quoted for this
/// test, with `shared` standing in for W. Kept for comparison only: the
/// variance expression does not reproduce the permutation variance.
pub fn quoted_moments(n0: usize, n1: usize, shared: usize) -> (f64, f64) {
    let (m, k) = (n0 as f64, n1 as f64);
    let n = m + k;
    let mean = 2.0 * m * k / (n - 1.0);
    let var = 2.0 * m * k / (n * (n - 1.0)) * (1.0 + (shared as f64 - (n - 1.0)) / (2.0 * (n - 2.0)));
    (mean, var)
}

/// Cross-edge count for the labeling whose first `n0` entries of `perm`
/// form window 0.
pub fn cross_edges(edges: &[(usize, usize)], perm: &[usize], n0: usize) -> usize {
    let mut group = vec![false; perm.len()];
    for &i in &perm[n0..] {
        group[i] = true;
    }
    edges.iter().filter(|&&(a, b)| group[a] != group[b]).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanRafsky {
    pub edges: Vec<(usize, usize)>,
    pub cross_edges: usize,
    pub shared_pairs: usize,
    pub mean: f64,
    pub variance: f64,
}

impl FriedmanRafsky {
    pub fn compute(d0: &Points, d1: &Points) -> Result<Self> {
        check_dims(d0, d1)?;
        let n = d0.len() + d1.len();
        if n < 4 {
            return Err(Error::TooFewSamples { needed: 4, got: n });
        }
        if d0.is_empty() || d1.is_empty() {
            return Err(Error::EmptySample);
        }
        let pts: Vec<&[f64]> = d0.iter().chain(d1).map(Vec::as_slice).collect();
        if pts.iter().all(|p| *p == pts[0]) {
            return Err(Error::DegeneratePoints);
        }
        let edges = minimum_spanning_tree(&pts);
        let identity: Vec<usize> = (0..n).collect();
        let cross = cross_edges(&edges, &identity, d0.len());
        let shared = adjacent_edge_pairs(&edges, n);
        let (mean, variance) = null_moments(d0.len(), d1.len(), shared);
        if !(variance > 0.0) {
            return Err(Error::DegeneratePoints);
        }
        Ok(Self {
            edges,
            cross_edges: cross,
            shared_pairs: shared,
            mean,
            variance,
        })
    }

    pub fn z(&self) -> f64 {
        (self.cross_edges as f64 - self.mean) / self.variance.sqrt()
    }
}

pub fn friedman_rafsky_test(
    d0: &Points,
    d1: &Points,
    plan: &PermutationPlan,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    hyp.validate()?;
    let fr = FriedmanRafsky::compute(d0, d1)?;
    let n0 = d0.len();
    let z = fr.z();
    let lower = hyp.with_sidedness(Sidedness::Less);
    let perm = permutation_null(n0, d1.len(), plan, |p| {
        Ok(-(cross_edges(&fr.edges, p, n0) as f64))
    })?;
    let mut res = TestResult::from_p_value("friedman_rafsky", z, normal_cdf(z), &lower)
        .with_critical(normal_quantile(hyp.alpha), RejectionRegion::Lower)
        .with_sizes(n0, d1.len())
        .with_note(format!(
            "R={} cross edges, E[R]={:.6}, Var(R)={:.6}, adjacent edge pairs={}",
            fr.cross_edges, fr.mean, fr.variance, fr.shared_pairs
        ))
        .with_note(format!(
            "permutation p={:.6} (B={})",
            perm.p_value, plan.iterations
        ));
    if hyp.sidedness != Sidedness::Less {
        res = res.with_note("rejects for few cross edges (lower tail)");
    }
    Ok(res)
}
