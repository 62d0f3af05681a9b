//! Pairwise Euclidean geometry over encoded multivariate samples.

use crate::error::{Error, Result};

/// A sample of points, one `Vec` of coordinates per observation.
pub type Points = [Vec<f64>];

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Checks that every point has the same, non-zero dimension.
pub fn check_dims(d0: &Points, d1: &Points) -> Result<usize> {
    let dim = d0
        .first()
        .or_else(|| d1.first())
        .map(Vec::len)
        .ok_or(Error::EmptySample)?;
    if dim == 0 {
        return Err(Error::DimensionMismatch("points have no coordinates".into()));
    }
    if let Some(p) = d0.iter().chain(d1).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "expected {dim} coordinates, found {}",
            p.len()
        )));
    }
    Ok(dim)
}

/// Symmetric matrix with zero diagonal, stored as its strict upper
/// triangle in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    /// Pairwise Euclidean distances of `points`.
    pub fn euclidean(points: &[&[f64]]) -> Self {
        let n = points.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(euclidean(points[i], points[j]));
            }
        }
        Self { n, upper }
    }

    /// Distances of the pooled sample `d0` followed by `d1`.
    pub fn pooled(d0: &Points, d1: &Points) -> Self {
        let pts: Vec<&[f64]> = d0.iter().chain(d1).map(Vec::as_slice).collect();
        Self::euclidean(&pts)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn offset(&self, i: usize) -> usize {
        // start of row i in the packed upper triangle
        i * (2 * self.n - i - 1) / 2
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[self.offset(i) + j - i - 1],
            std::cmp::Ordering::Greater => self.upper[self.offset(j) + i - j - 1],
        }
    }

    /// Applies `f` to every off-diagonal entry, keeping the layout.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|&d| f(d)).collect(),
        }
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.upper
    }

    /// `w' M w`, with `diag` as the value of every diagonal entry.
    pub fn quadratic_form(&self, w: &[f64], diag: f64) -> f64 {
        debug_assert_eq!(w.len(), self.n);
        let mut off = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            let row = &self.upper[k..k + self.n - i - 1];
            let wi = w[i];
            let mut acc = 0.0;
            for (m, wj) in row.iter().zip(&w[i + 1..]) {
                acc += m * wj;
            }
            off += wi * acc;
            k += self.n - i - 1;
        }
        let sq: f64 = w.iter().map(|x| x * x).sum();
        2.0 * off + diag * sq
    }

    /// Median of the strictly positive entries, if any.
    pub fn median_positive(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.upper.iter().copied().filter(|&d| d > 0.0).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

/// Signed weights `+1/n0` on group 0 and `-1/n1` on group 1, where the
/// first `n0` entries of `perm` make up group 0.
pub fn group_weights(perm: &[usize], n0: usize) -> Vec<f64> {
    let n1 = perm.len() - n0;
    let mut w = vec![0.0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        w[i] = if k < n0 { 1.0 / n0 as f64 } else { -1.0 / n1 as f64 };
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let d = DistanceMatrix::euclidean(&refs);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.get(i, j), (pts[i][0] - pts[j][0]).abs());
            }
        }
        let w = [1.0, -2.0, 0.5, 3.0];
        let mut brute = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                brute += w[i] * w[j] * d.get(i, j);
            }
        }
        assert!((d.quadratic_form(&w, 0.0) - brute).abs() < 1e-12);
        assert_eq!(d.median_positive(), Some(3.5));
    }

    #[test]
    fn dims_checked() {
        assert!(check_dims(&[vec![1.0, 2.0]], &[vec![1.0]]).is_err());
        assert_eq!(check_dims(&[vec![1.0, 2.0]], &[vec![1.0, 0.0]]).unwrap(), 2);
    }
}
