//! Distances and divergences between empirical distributions.
//!
//! These return raw values. [`divergence_test`] and [`energy_test`] lift
//! them into tests through the permutation engine, with any fitted
//! parameters (histogram edges) frozen from the pooled sample first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, group_weights, DistanceMatrix, Points};
use crate::permutation::{outcome_result, permutation_null, PermutationPlan};
use crate::stats::quantile_sorted;
use crate::types::{Hypothesis, TestResult};

pub const MIN_BINS: usize = 10;
pub const MAX_BINS: usize = 256;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Pooled distance matrix for repeated energy-distance evaluation.
pub struct EnergyPrepared {
    dist: DistanceMatrix,
    n0: usize,
    scale: f64,
}

impl EnergyPrepared {
    pub fn new(d0: &Points, d1: &Points) -> Result<Self> {
        if d0.is_empty() || d1.is_empty() {
            return Err(Error::EmptySample);
        }
        check_dims(d0, d1)?;
        let dist = DistanceMatrix::pooled(d0, d1);
        let scale = dist.off_diagonal().iter().fold(0.0f64, |m, &d| m.max(d));
        Ok(Self {
            dist,
            n0: d0.len(),
            scale,
        })
    }

    /// Energy distance for the split given by `perm`.
    pub fn statistic(&self, perm: &[usize]) -> f64 {
        let w = group_weights(perm, self.n0);
        let v = -self.dist.quadratic_form(&w, 0.0);
        // roundoff floor relative to the largest distance
        if v <= 1e-13 * self.scale {
            0.0
        } else {
            v
        }
    }

    pub fn observed(&self) -> f64 {
        let identity: Vec<usize> = (0..self.dist.len()).collect();
        self.statistic(&identity)
    }
}

/// `2 E|X - Y| - E|X - X'| - E|Y - Y'|` over all pairs, self-pairs included.
pub fn energy_distance(d0: &Points, d1: &Points) -> Result<f64> {
    Ok(EnergyPrepared::new(d0, d1)?.observed())
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `(int_0^1 |F0^-1(u) - F1^-1(u)|^p du)^(1/p)` for sorted samples.
fn wasserstein_sorted(a: &[f64], b: &[f64], p: u32) -> f64 {
    let (n0, n1) = (a.len(), b.len());
    // breakpoints i/n0 and j/n1 measured in units of 1/(n0 n1)
    let (mut i, mut j, mut u) = (0usize, 0usize, 0usize);
    let mut acc = 0.0;
    while i < n0 && j < n1 {
        let next_a = (i + 1) * n1;
        let next_b = (j + 1) * n0;
        let next = next_a.min(next_b);
        let gap = (a[i] - b[j]).abs();
        acc += gap.powi(p as i32) * (next - u) as f64;
        u = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    (acc / (n0 * n1) as f64).powf(1.0 / p as f64)
}

/// Exact `W_p` (`p` in {1, 2}) between two univariate empirical
/// distributions.
pub fn wasserstein_1d(x0: &[f64], x1: &[f64], p: u32) -> Result<f64> {
    if x0.is_empty() || x1.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p == 1 || p == 2) {
        return Err(Error::InvalidParameter(format!("Wasserstein order must be 1 or 2, got {p}")));
    }
    Ok(wasserstein_sorted(&sorted(x0), &sorted(x1), p))
}

/// Two smoothed histograms over shared bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub edges: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub epsilon: f64,
}

/// Freedman-Diaconis bin edges for the pooled sample, clamped to
/// `[MIN_BINS, MAX_BINS]` bins.
pub fn fd_edges(pooled: &[f64]) -> Result<Vec<f64>> {
    if pooled.is_empty() {
        return Err(Error::EmptySample);
    }
    let s = sorted(pooled);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).clamp(MIN_BINS, MAX_BINS)
    } else {
        MIN_BINS
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + step * k as f64).collect();
    edges.push(hi);
    Ok(edges)
}

/// Bin index of `x`; the last bin is closed on the right and values
/// outside the edges go to the nearest end bin.
pub fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    let k = edges.partition_point(|&e| e <= x);
    k.saturating_sub(1).min(bins - 1)
}

fn smooth(counts: &[usize], epsilon: f64) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let z = 1.0 + epsilon * counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 / n as f64 + epsilon) / z)
        .collect()
}

impl HistogramPair {
    /// Bins both samples on Freedman-Diaconis edges of the pooled sample.
    pub fn from_samples(x0: &[f64], x1: &[f64], epsilon: f64) -> Result<Self> {
        if x0.is_empty() || x1.is_empty() {
            return Err(Error::EmptySample);
        }
        let pooled: Vec<f64> = x0.iter().chain(x1).copied().collect();
        Self::with_edges(fd_edges(&pooled)?, x0, x1, epsilon)
    }

    pub fn with_edges(edges: Vec<f64>, x0: &[f64], x1: &[f64], epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("bin edges must be strictly increasing".into()));
        }
        if x0.is_empty() || x1.is_empty() {
            return Err(Error::EmptySample);
        }
        let count = |x: &[f64]| {
            let mut c = vec![0usize; edges.len() - 1];
            for &v in x {
                c[bin_of(&edges, v)] += 1;
            }
            c
        };
        let (c0, c1) = (count(x0), count(x1));
        Ok(Self {
            p0: smooth(&c0, epsilon),
            p1: smooth(&c1, epsilon),
            edges,
            epsilon,
        })
    }

    /// Smooths and renormalizes given masses (edges are bin indices).
    pub fn from_masses(p0: &[f64], p1: &[f64], epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if p0.len() != p1.len() || p0.is_empty() {
            return Err(Error::DimensionMismatch("histograms need the same, non-zero bin count".into()));
        }
        let norm = |p: &[f64]| -> Result<Vec<f64>> {
            if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParameter("masses must be finite and non-negative".into()));
            }
            let s: f64 = p.iter().sum();
            if s <= 0.0 {
                return Err(Error::InvalidParameter("masses sum to zero".into()));
            }
            let z = 1.0 + epsilon * p.len() as f64;
            Ok(p.iter().map(|&v| (v / s + epsilon) / z).collect())
        };
        Ok(Self {
            edges: (0..=p0.len()).map(|k| k as f64).collect(),
            p0: norm(p0)?,
            p1: norm(p1)?,
            epsilon,
        })
    }

    pub fn bins(&self) -> usize {
        self.p0.len()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("smoothing epsilon must be >= 0, got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FDivergence {
    Kl,
    Js,
}

fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (bin, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::UnsmoothedZeroBin { bin });
        }
        acc += a * (a / b).ln();
    }
    Ok(acc.max(0.0))
}

/// KL(p0 || p1) or the Jensen-Shannon divergence, in nats.
pub fn f_divergence(hist: &HistogramPair, kind: FDivergence) -> Result<f64> {
    match kind {
        FDivergence::Kl => kl(&hist.p0, &hist.p1),
        FDivergence::Js => {
            let m: Vec<f64> = hist.p0.iter().zip(&hist.p1).map(|(a, b)| 0.5 * (a + b)).collect();
            Ok(0.5 * kl(&hist.p0, &m)? + 0.5 * kl(&hist.p1, &m)?)
        }
    }
}

/// Univariate divergences available as permutation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Energy,
    Wasserstein1,
    Wasserstein2,
    Kl,
    Js,
}

impl DivergenceKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Energy => "energy",
            Self::Wasserstein1 => "wasserstein_1",
            Self::Wasserstein2 => "wasserstein_2",
            Self::Kl => "kl",
            Self::Js => "js",
        }
    }
}

/// Permutation test of a univariate divergence. Histogram edges come from
/// the pooled sample, which every relabeling shares.
pub fn divergence_test(
    x0: &[f64],
    x1: &[f64],
    kind: DivergenceKind,
    epsilon: f64,
    plan: &PermutationPlan,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    hyp.validate()?;
    if x0.is_empty() || x1.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n0, n1) = (x0.len(), x1.len());
    let pooled: Vec<f64> = x0.iter().chain(x1).copied().collect();
    let method = format!("{}_permutation", kind.name());
    let outcome = match kind {
        DivergenceKind::Energy => {
            let a: Vec<Vec<f64>> = x0.iter().map(|&v| vec![v]).collect();
            let b: Vec<Vec<f64>> = x1.iter().map(|&v| vec![v]).collect();
            let prep = EnergyPrepared::new(&a, &b)?;
            permutation_null(n0, n1, plan, |p| Ok(prep.statistic(p)))?
        }
        DivergenceKind::Wasserstein1 | DivergenceKind::Wasserstein2 => {
            let order = if kind == DivergenceKind::Wasserstein1 { 1 } else { 2 };
            let mut by_value: Vec<usize> = (0..pooled.len()).collect();
            by_value.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
            permutation_null(n0, n1, plan, |p| {
                let mut in0 = vec![false; pooled.len()];
                for &i in &p[..n0] {
                    in0[i] = true;
                }
                let mut a = Vec::with_capacity(n0);
                let mut b = Vec::with_capacity(n1);
                for &i in &by_value {
                    if in0[i] {
                        a.push(pooled[i]);
                    } else {
                        b.push(pooled[i]);
                    }
                }
                Ok(wasserstein_sorted(&a, &b, order))
            })?
        }
        DivergenceKind::Kl | DivergenceKind::Js => {
            check_epsilon(epsilon)?;
            let edges = fd_edges(&pooled)?;
            let bins: Vec<usize> = pooled.iter().map(|&v| bin_of(&edges, v)).collect();
            let k = edges.len() - 1;
            let f = if kind == DivergenceKind::Kl { FDivergence::Kl } else { FDivergence::Js };
            permutation_null(n0, n1, plan, |p| {
                let mut c0 = vec![0usize; k];
                let mut c1 = vec![0usize; k];
                for &i in &p[..n0] {
                    c0[bins[i]] += 1;
                }
                for &i in &p[n0..] {
                    c1[bins[i]] += 1;
                }
                let hist = HistogramPair {
                    edges: Vec::new(),
                    p0: smooth(&c0, epsilon),
                    p1: smooth(&c1, epsilon),
                    epsilon,
                };
                f_divergence(&hist, f)
            })?
        }
    };
    Ok(outcome_result(&method, &outcome, hyp, n0, n1))
}

/// Permutation test of the multivariate energy distance.
pub fn energy_test(d0: &Points, d1: &Points, plan: &PermutationPlan, hyp: &Hypothesis) -> Result<TestResult> {
    hyp.validate()?;
    let prep = EnergyPrepared::new(d0, d1)?;
    let outcome = permutation_null(d0.len(), d1.len(), plan, |p| Ok(prep.statistic(p)))?;
    Ok(outcome_result("energy_permutation", &outcome, hyp, d0.len(), d1.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(x: &[f64]) -> Vec<Vec<f64>> {
        x.iter().map(|&v| vec![v]).collect()
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    /// Optimal transport cost over every integer transport table between
    /// the samples replicated to a common size. Tables are enumerated row
    /// by row; the best completion of each (row, remaining column
    /// capacity) state is memoized, so every table is covered once.
    fn brute_ot(x0: &[f64], x1: &[f64], p: u32) -> f64 {
        use std::collections::HashMap;
        struct Tables {
            cost: Vec<Vec<f64>>,
            r: usize,
            memo: HashMap<(usize, Vec<usize>), f64>,
        }
        impl Tables {
            fn best_from(&mut self, i: usize, cols: Vec<usize>) -> f64 {
                if i == self.cost.len() {
                    return 0.0;
                }
                if let Some(&v) = self.memo.get(&(i, cols.clone())) {
                    return v;
                }
                let mut best = f64::INFINITY;
                let mut row = vec![0usize; cols.len()];
                self.fill_row(i, 0, self.r, &cols, &mut row, &mut best);
                self.memo.insert((i, cols), best);
                best
            }

            fn fill_row(&mut self, i: usize, j: usize, rem: usize, cols: &[usize], row: &mut Vec<usize>, best: &mut f64) {
                if j == cols.len() {
                    if rem > 0 {
                        return;
                    }
                    let here: f64 = row.iter().zip(&self.cost[i]).map(|(&t, &c)| t as f64 * c).sum();
                    let left: Vec<usize> = cols.iter().zip(row.iter()).map(|(c, t)| c - t).collect();
                    let total = here + self.best_from(i + 1, left);
                    if total < *best {
                        *best = total;
                    }
                    return;
                }
                for t in 0..=rem.min(cols[j]) {
                    row[j] = t;
                    self.fill_row(i, j + 1, rem - t, cols, row, best);
                }
                row[j] = 0;
            }
        }
        let (n0, n1) = (x0.len(), x1.len());
        let l = n0 / gcd(n0, n1) * n1;
        let mut tables = Tables {
            cost: x0
                .iter()
                .map(|a| x1.iter().map(|b| (a - b).abs().powi(p as i32)).collect())
                .collect(),
            r: l / n0,
            memo: HashMap::new(),
        };
        let best = tables.best_from(0, vec![l / n1; n1]);
        (best / l as f64).powf(1.0 / p as f64)
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_distance(&pts(&[0.0]), &pts(&[1.0])).unwrap(), 2.0);
        let d = pts(&[0.3, 1.2, -0.7, 2.0]);
        assert_eq!(energy_distance(&d, &d).unwrap(), 0.0);
        let e = pts(&[1.0, 5.0, 2.5]);
        let ab = energy_distance(&d, &e).unwrap();
        assert!((ab - energy_distance(&e, &d).unwrap()).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0], 1).unwrap(), 1.0);
        let x = [0.2, -1.0, 3.5, 0.7];
        assert_eq!(wasserstein_1d(&x, &x, 2).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v - 2.25).collect();
        assert!((wasserstein_1d(&x, &shifted, 1).unwrap() - 2.25).abs() < 1e-12);
        assert!(wasserstein_1d(&x, &x, 3).is_err());
    }

    #[test]
    fn kl_js_examples() {
        let h = HistogramPair::from_masses(&[0.9, 0.1], &[0.5, 0.5], 0.0).unwrap();
        let kl = f_divergence(&h, FDivergence::Kl).unwrap();
        let hand = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((kl - hand).abs() < 1e-12);
        assert!((kl - 0.3681).abs() < 1e-4);
        let rev = HistogramPair::from_masses(&[0.5, 0.5], &[0.9, 0.1], 0.0).unwrap();
        assert!((f_divergence(&rev, FDivergence::Kl).unwrap() - kl).abs() > 0.01);
        let same = HistogramPair::from_masses(&[0.2, 0.8], &[0.2, 0.8], 1e-6).unwrap();
        assert_eq!(f_divergence(&same, FDivergence::Kl).unwrap(), 0.0);
        assert_eq!(f_divergence(&same, FDivergence::Js).unwrap(), 0.0);
    }

    #[test]
    fn unsmoothed_zero_bin() {
        let h = HistogramPair::from_masses(&[0.5, 0.5], &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(f_divergence(&h, FDivergence::Kl), Err(Error::UnsmoothedZeroBin { bin: 1 }));
        assert!(f_divergence(&h, FDivergence::Js).is_ok());
    }

    #[test]
    fn histogram_invariants() {
        let x0: Vec<f64> = (0..300).map(|i| (i as f64 * 0.13).sin()).collect();
        let x1: Vec<f64> = (0..200).map(|i| (i as f64 * 0.07).cos() * 2.0).collect();
        let h = HistogramPair::from_samples(&x0, &x1, DEFAULT_EPSILON).unwrap();
        assert!((MIN_BINS..=MAX_BINS).contains(&h.bins()));
        for p in [&h.p0, &h.p1] {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= DEFAULT_EPSILON / h.bins() as f64));
        }
        let c = HistogramPair::from_samples(&[1.0; 5], &[1.0; 4], DEFAULT_EPSILON).unwrap();
        assert_eq!(c.bins(), MIN_BINS);
        assert_eq!(f_divergence(&c, FDivergence::Js).unwrap(), 0.0);
    }

    #[test]
    fn brute_ot_worst_sizes() {
        let t = std::time::Instant::now();
        let x0 = [0.3, -1.2, 4.0, 2.2, -0.5, 0.1];
        let x1 = [1.1, 0.0, -3.0, 2.5, 0.9];
        for p in [1, 2] {
            let w = wasserstein_1d(&x0, &x1, p).unwrap();
            assert!((brute_ot(&x0, &x1, p) - w).abs() < 1e-9);
            assert!((brute_ot(&x1, &x0, p) - w).abs() < 1e-9);
        }
        let tied = [1.0; 6];
        assert!((brute_ot(&tied, &[0.0, 1.0, 1.0, 2.0, 2.0], 1) - 0.6).abs() < 1e-9);
        eprintln!("brute_ot worst sizes took {:?}", t.elapsed());
    }

    #[test]
    fn brute_ot_small_exhaustive() {
        assert!((brute_ot(&[0.0, 1.0], &[0.0, 0.5, 1.0], 1) - wasserstein_1d(&[0.0, 1.0], &[0.0, 0.5, 1.0], 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn permutation_tests_detect_shift() {
        let x0: Vec<f64> = (0..80).map(|i| ((i * 37 % 80) as f64 / 80.0 - 0.5) * 3.0).collect();
        let x1: Vec<f64> = x0.iter().map(|v| v + 1.5).collect();
        let plan = PermutationPlan::new(199, 1).unwrap();
        let h = Hypothesis::two_sided(0.05).unwrap();
        for kind in [
            DivergenceKind::Energy,
            DivergenceKind::Wasserstein1,
            DivergenceKind::Wasserstein2,
            DivergenceKind::Kl,
            DivergenceKind::Js,
        ] {
            let r = divergence_test(&x0, &x1, kind, DEFAULT_EPSILON, &plan, &h).unwrap();
            assert!(r.reject_h0, "{kind:?}");
            let same = divergence_test(&x0, &x0, kind, DEFAULT_EPSILON, &plan, &h).unwrap();
            assert!(!same.reject_h0, "{kind:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn wasserstein_matches_exhaustive_transport(
            x0 in proptest::collection::vec(-5.0f64..5.0, 1..=6),
            x1 in proptest::collection::vec(-5.0f64..5.0, 1..=6),
            p in 1u32..=2,
        ) {
            let w = wasserstein_1d(&x0, &x1, p).unwrap();
            prop_assert!((w - brute_ot(&x0, &x1, p)).abs() < 1e-9);
        }

        #[test]
        fn js_symmetric_and_bounded(
            a in proptest::collection::vec(0.0f64..1.0, 2..12),
            seed in 0.0f64..1.0,
        ) {
            let b: Vec<f64> = a.iter().map(|v| (v + seed).fract()).collect();
            let h = HistogramPair::from_masses(&a, &b, DEFAULT_EPSILON).unwrap();
            let r = HistogramPair::from_masses(&b, &a, DEFAULT_EPSILON).unwrap();
            let js = f_divergence(&h, FDivergence::Js).unwrap();
            prop_assert!((js - f_divergence(&r, FDivergence::Js).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&js));
            prop_assert!(f_divergence(&h, FDivergence::Kl).unwrap() >= 0.0);
        }

        #[test]
        fn energy_nonnegative(
            x0 in proptest::collection::vec(-5.0f64..5.0, 1..10),
            x1 in proptest::collection::vec(-5.0f64..5.0, 1..10),
        ) {
            prop_assert!(energy_distance(&pts(&x0), &pts(&x1)).unwrap() >= 0.0);
        }
    }
}
