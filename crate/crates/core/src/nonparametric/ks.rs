//! Two-sample Kolmogorov-Smirnov test with asymptotic Kolmogorov critical
//! values.

use crate::error::{Error, Result};
use crate::special::{kolmogorov_critical, kolmogorov_sf};
use crate::types::{Hypothesis, RejectionRegion, Sidedness, TestResult};

/// Signed ECDF gaps over the merged order statistics:
/// `(sup (F1 - F0), sup (F0 - F1))`, both non-negative.
pub fn ecdf_gaps(x0: &[f64], x1: &[f64]) -> (f64, f64) {
    let mut a = x0.to_vec();
    let mut b = x1.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n0, n1) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut plus, mut minus) = (0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        // step past every tie at v in both samples
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        let f0 = i as f64 / n0;
        let f1 = j as f64 / n1;
        plus = plus.max(f1 - f0);
        minus = minus.max(f0 - f1);
    }
    (plus, minus)
}

pub fn ks_statistic(x0: &[f64], x1: &[f64]) -> f64 {
    let (p, m) = ecdf_gaps(x0, x1);
    p.max(m)
}

/// `Sidedness::Greater` is the alternative that window 0 is stochastically
/// larger, i.e. `F0 <= F1`, measured by `sup (F1 - F0)`.
pub fn ks_test(x0: &[f64], x1: &[f64], hyp: &Hypothesis) -> Result<TestResult> {
    hyp.validate()?;
    if x0.is_empty() || x1.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n0, n1) = (x0.len() as f64, x1.len() as f64);
    let scale = ((n0 + n1) / (n0 * n1)).sqrt();
    let ne = n0 * n1 / (n0 + n1);
    let (plus, minus) = ecdf_gaps(x0, x1);
    let (method, d, p, c) = match hyp.sidedness {
        Sidedness::TwoSided => {
            let d = plus.max(minus);
            ("ks", d, kolmogorov_sf(ne.sqrt() * d), kolmogorov_critical(hyp.alpha))
        }
        Sidedness::Greater => (
            "ks_greater",
            plus,
            (-2.0 * ne * plus * plus).exp(),
            ((1.0 / hyp.alpha).ln() / 2.0).sqrt(),
        ),
        Sidedness::Less => (
            "ks_less",
            minus,
            (-2.0 * ne * minus * minus).exp(),
            ((1.0 / hyp.alpha).ln() / 2.0).sqrt(),
        ),
    };
    Ok(TestResult::from_p_value(method, d, p, hyp)
        .with_critical(c * scale, RejectionRegion::Upper)
        .with_sizes(x0.len(), x1.len())
        .with_note(format!("asymptotic Kolmogorov constant c(alpha)={c:.4}")))
}
