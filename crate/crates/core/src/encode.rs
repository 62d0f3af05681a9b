//! Numeric encoding of mixed-type rows for the multivariate tests.
//!
//! Numeric columns are standardized by the mean and SD of both windows
//! pooled, so the two windows are treated alike. Categorical columns become
//! one-hot blocks over the sorted union of observed levels.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};
use crate::types::{ColumnData, Dataset, Kind};

/// Encoded rows, one `Vec` per observation.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Numeric { col: usize, mean: f64, scale: f64 },
    OneHot { col: usize, levels: Vec<String> },
}

/// Extra 0/1 coordinate appended after the encoded features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Append {
    Nothing,
    /// The label `y`, times the given scale.
    Label(f64),
    /// The correctness indicator `z = 1[y_hat == y]`, times the given scale.
    Correctness(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    parts: Vec<Part>,
    append: Append,
}

impl Encoder {
    /// Fits the encoding of schema columns `cols` on both windows.
    pub fn fit(d0: &Dataset, d1: &Dataset, cols: &[usize], append: Append) -> Result<Self> {
        if d0.schema() != d1.schema() {
            return Err(Error::SchemaMismatch("windows have different schemas".into()));
        }
        let schema = d0.schema();
        let mut parts = Vec::with_capacity(cols.len());
        for &col in cols {
            let spec = schema
                .columns()
                .get(col)
                .ok_or_else(|| Error::InvalidParameter(format!("no column at index {col}")))?;
            let part = match (&d0.columns()[col], &d1.columns()[col]) {
                (ColumnData::Numeric(a), ColumnData::Numeric(b)) => {
                    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
                    let sd = if pooled.len() > 1 { std_dev(&pooled) } else { 0.0 };
                    Part::Numeric {
                        col,
                        mean: mean(&pooled),
                        scale: if sd > 0.0 { sd } else { 1.0 },
                    }
                }
                (ColumnData::Categorical { levels: la, .. }, ColumnData::Categorical { levels: lb, .. }) => {
                    let levels: BTreeSet<&String> = la.iter().chain(lb).collect();
                    Part::OneHot {
                        col,
                        levels: levels.into_iter().cloned().collect(),
                    }
                }
                (ColumnData::Binary(_), ColumnData::Binary(_)) => Part::Numeric {
                    col,
                    mean: 0.0,
                    scale: 1.0,
                },
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` is not {:?} in both windows",
                        spec.name, spec.kind
                    )))
                }
            };
            parts.push(part);
        }
        if parts.is_empty() && matches!(append, Append::Nothing) {
            return Err(Error::InvalidParameter("nothing to encode".into()));
        }
        Ok(Self { parts, append })
    }

    /// Encoder over all feature columns of the schema.
    pub fn features(d0: &Dataset, d1: &Dataset, append: Append) -> Result<Self> {
        Self::fit(d0, d1, &d0.schema().feature_indices(), append)
    }

    pub fn dim(&self) -> usize {
        let base: usize = self
            .parts
            .iter()
            .map(|p| match p {
                Part::Numeric { .. } => 1,
                Part::OneHot { levels, .. } => levels.len(),
            })
            .sum();
        base + usize::from(!matches!(self.append, Append::Nothing))
    }

    pub fn encode(&self, d: &Dataset) -> Result<Vec<Vec<f64>>> {
        let extra: Option<(Vec<u8>, f64)> = match self.append {
            Append::Nothing => None,
            Append::Label(s) => Some((
                d.labels().ok_or_else(|| Error::MissingColumn("label".into()))?.to_vec(),
                s,
            )),
            Append::Correctness(s) => Some((correctness(d)?, s)),
        };
        let mut rows = vec![Vec::with_capacity(self.dim()); d.len()];
        for part in &self.parts {
            match part {
                Part::Numeric { col, mean, scale } => match &d.columns()[*col] {
                    ColumnData::Numeric(v) => {
                        for (row, &x) in rows.iter_mut().zip(v) {
                            row.push((x - mean) / scale);
                        }
                    }
                    ColumnData::Binary(v) => {
                        for (row, &x) in rows.iter_mut().zip(v) {
                            row.push(x as f64);
                        }
                    }
                    _ => return Err(Error::SchemaMismatch("column kind changed after fitting".into())),
                },
                Part::OneHot { col, levels } => {
                    let c = &d.columns()[*col];
                    for (r, row) in rows.iter_mut().enumerate() {
                        let level = c
                            .level_at(r)
                            .ok_or_else(|| Error::SchemaMismatch("column kind changed after fitting".into()))?;
                        row.extend(levels.iter().map(|l| if l == level { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        if let Some((v, s)) = extra {
            for (row, &x) in rows.iter_mut().zip(&v) {
                row.push(x as f64 * s);
            }
        }
        Ok(rows)
    }

    pub fn encode_pair(&self, d0: &Dataset, d1: &Dataset) -> Result<(Rows, Rows)> {
        Ok((self.encode(d0)?, self.encode(d1)?))
    }
}

/// `z_i = 1` iff prediction equals label on row `i`.
pub fn correctness(d: &Dataset) -> Result<Vec<u8>> {
    let y = d.labels().ok_or_else(|| Error::MissingColumn("label".into()))?;
    let yhat = d.predictions().ok_or_else(|| Error::MissingColumn("prediction".into()))?;
    Ok(y.iter().zip(yhat).map(|(a, b)| u8::from(a == b)).collect())
}

/// Encodes only the numeric columns named in `names`, without scaling.
pub fn raw_numeric(d: &Dataset, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|n| {
            d.numeric(n).ok_or_else(|| {
                Error::InvalidParameter(format!("`{n}` is not a numeric column"))
            })
        })
        .collect::<Result<_>>()?;
    Ok((0..d.len()).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

/// Kind of every feature column, for callers that branch on it.
pub fn feature_kinds(d: &Dataset) -> Vec<(String, Kind)> {
    d.schema()
        .columns()
        .iter()
        .filter(|c| c.role.is_feature())
        .map(|c| (c.name.clone(), c.kind))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{validate_dataset, ColumnSpec, RawCell, RawTable, Role, Schema, Window, WindowTag};

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("age", Role::ClinicalFeature, Kind::Numeric),
            ColumnSpec::new("site", Role::ClinicalFeature, Kind::Categorical),
            ColumnSpec::new("y", Role::Label, Kind::Numeric),
            ColumnSpec::new("yhat", Role::Prediction, Kind::Numeric),
        ])
        .unwrap()
    }

    fn ds(rows: &[(f64, &str, u8, u8)], w: Window) -> Dataset {
        let raw = RawTable {
            header: vec!["age".into(), "site".into(), "y".into(), "yhat".into()],
            rows: rows
                .iter()
                .map(|&(a, s, y, p)| {
                    vec![
                        RawCell::Number(a),
                        RawCell::Text(s.into()),
                        RawCell::Number(y as f64),
                        RawCell::Number(p as f64),
                    ]
                })
                .collect(),
        };
        validate_dataset(&raw, &schema(), WindowTag::new(w, "")).unwrap()
    }

    #[test]
    fn pooled_standardization_and_one_hot() {
        let d0 = ds(&[(1.0, "A", 1, 1), (3.0, "B", 0, 1)], Window::T0);
        let d1 = ds(&[(5.0, "C", 1, 0), (7.0, "A", 0, 0)], Window::T1);
        let enc = Encoder::features(&d0, &d1, Append::Correctness(1.0)).unwrap();
        assert_eq!(enc.dim(), 5);
        let (a, b) = enc.encode_pair(&d0, &d1).unwrap();
        let sd = std_dev(&[1.0, 3.0, 5.0, 7.0]);
        assert!((a[0][0] - (1.0 - 4.0) / sd).abs() < 1e-12);
        assert_eq!(&a[0][1..], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(&a[1][1..], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&b[0][1..], &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(&b[1][1..], &[1.0, 0.0, 0.0, 1.0]);
        let all: Vec<f64> = a.iter().chain(&b).map(|r| r[0]).collect();
        assert!(mean(&all).abs() < 1e-12);
    }

    #[test]
    fn correctness_definition() {
        let d = ds(&[(0.0, "A", 1, 0), (0.0, "A", 0, 0)], Window::T0);
        assert_eq!(correctness(&d).unwrap(), vec![0, 1]);
    }
}
