//! Kernel maximum mean discrepancy with a Gaussian RBF kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, group_weights, DistanceMatrix, Points};
use crate::permutation::{permutation_null, PermutationPlan};
use crate::types::{Hypothesis, RejectionRegion, Sidedness, TestResult};

/// Largest number of points used to estimate the median heuristic.
pub const MEDIAN_SUBSAMPLE: usize = 1000;

// Each block mean is at most 1, so accumulated error stays far below this.
const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    #[default]
    MedianHeuristic,
    Fixed(f64),
}

/// `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`; bounded by `K = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub const SUP: f64 = 1.0;

    pub fn fixed(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {sigma}")));
        }
        Ok(Self {
            bandwidth: Bandwidth::Fixed(sigma),
        })
    }

    /// Resolves the bandwidth against the pooled sample.
    pub fn resolve(&self, d0: &Points, d1: &Points) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            Bandwidth::Fixed(s) => Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {s}"
            ))),
            Bandwidth::MedianHeuristic => median_heuristic(d0, d1),
        }
    }
}

/// Median nonzero pairwise distance of the pooled sample. Larger samples
/// are thinned to an evenly spaced subsample of at most
/// [`MEDIAN_SUBSAMPLE`] points.
pub fn median_heuristic(d0: &Points, d1: &Points) -> Result<f64> {
    let pooled: Vec<&[f64]> = d0.iter().chain(d1).map(Vec::as_slice).collect();
    let n = pooled.len();
    let pts: Vec<&[f64]> = if n > MEDIAN_SUBSAMPLE {
        (0..MEDIAN_SUBSAMPLE).map(|i| pooled[i * n / MEDIAN_SUBSAMPLE]).collect()
    } else {
        pooled
    };
    DistanceMatrix::euclidean(&pts)
        .median_positive()
        .ok_or(Error::BandwidthUndefined)
}

/// `sqrt(2K/m) (1 + sqrt(2 ln(1/alpha)))` with `m = min(n0, n1)`.
pub fn mmd_bound(m: usize, alpha: f64, k_sup: f64) -> f64 {
    (2.0 * k_sup / m as f64).sqrt() * (1.0 + (2.0 * (1.0 / alpha).ln()).sqrt())
}

/// Pooled kernel matrix (off-diagonal part; the diagonal is `K = 1`).
pub struct KernelMatrix {
    gram: DistanceMatrix,
    n0: usize,
    pub bandwidth: f64,
}

impl KernelMatrix {
    pub fn new(d0: &Points, d1: &Points, kernel: &KernelSpec) -> Result<Self> {
        check_dims(d0, d1)?;
        let bandwidth = kernel.resolve(d0, d1)?;
        let scale = 1.0 / (2.0 * bandwidth * bandwidth);
        let gram = DistanceMatrix::pooled(d0, d1).map(|d| (-d * d * scale).exp());
        Ok(Self {
            gram,
            n0: d0.len(),
            bandwidth,
        })
    }

    /// Squared biased MMD for the split given by `perm`. Values within
    /// summation roundoff of zero are reported as zero.
    pub fn mmd_squared(&self, perm: &[usize]) -> f64 {
        let w = group_weights(perm, self.n0);
        let v = self.gram.quadratic_form(&w, KernelSpec::SUP);
        if v < ROUNDOFF {
            0.0
        } else {
            v
        }
    }

    pub fn mmd_b(&self) -> f64 {
        let identity: Vec<usize> = (0..self.gram.len()).collect();
        self.mmd_squared(&identity).sqrt()
    }
}

/// Biased estimator `MMD_b`: the square root of
/// `mean k(x,x') - 2 mean k(x,y) + mean k(y,y')`, self-pairs included.
pub fn mmd_b(d0: &Points, d1: &Points, kernel: &KernelSpec) -> Result<f64> {
    if d0.is_empty() || d1.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(KernelMatrix::new(d0, d1, kernel)?.mmd_b())
}

/// How `mmd_test` turns the statistic into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdDecision {
    /// Reject iff `MMD_b` reaches the distribution-free bound.
    #[default]
    Bound,
    /// Reject iff the permutation p-value is below alpha.
    Permutation,
}

pub fn mmd_test(
    d0: &Points,
    d1: &Points,
    kernel: &KernelSpec,
    decision: MmdDecision,
    plan: &PermutationPlan,
    hyp: &Hypothesis,
) -> Result<TestResult> {
    hyp.validate()?;
    let (n0, n1) = (d0.len(), d1.len());
    if n0 < 2 || n1 < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n0.min(n1),
        });
    }
    let km = KernelMatrix::new(d0, d1, kernel)?;
    let stat = km.mmd_b();
    let bound = mmd_bound(n0.min(n1), hyp.alpha, KernelSpec::SUP);
    let perm = permutation_null(n0, n1, plan, |p| Ok(km.mmd_squared(p)))?;
    let upper = hyp.with_sidedness(Sidedness::Greater);
    let bw = format!("gaussian_rbf bandwidth={:.6}", km.bandwidth);
    let res = match decision {
        MmdDecision::Bound => TestResult::from_critical("mmd", stat, bound, RejectionRegion::Upper, &upper)
            .with_note(format!("decision by kernel bound {bound:.6} (K=1, m={})", n0.min(n1)))
            .with_note(format!("permutation p={:.6} (B={})", perm.p_value, plan.iterations)),
        MmdDecision::Permutation => TestResult::from_p_value("mmd", stat, perm.p_value, &upper)
            .with_note(format!(
                "decision by permutation p (B={}); kernel bound {bound:.6} would {}reject",
                plan.iterations,
                if stat >= bound { "" } else { "not " }
            )),
    };
    Ok(res.with_sizes(n0, n1).with_note(bw))
}
