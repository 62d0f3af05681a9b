//! Shared data model: schemas, datasets for one monitoring window,
//! hypotheses and test results.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    InputFeature,
    ClinicalFeature,
    Label,
    Prediction,
}

impl Role {
    pub fn is_feature(self) -> bool {
        matches!(self, Role::InputFeature | Role::ClinicalFeature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        Self {
            name: name.into(),
            role,
            kind,
        }
    }
}

/// Ordered column declarations for a prediction log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = Error;
    fn try_from(r: SchemaRepr) -> Result<Self> {
        Schema::new(r.columns)
    }
}

impl From<Schema> for SchemaRepr {
    fn from(s: Schema) -> Self {
        SchemaRepr { columns: s.columns }
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column `{}`", c.name)));
            }
        }
        for role in [Role::Label, Role::Prediction] {
            if columns.iter().filter(|c| c.role == role).count() > 1 {
                return Err(Error::InvalidSchema(format!(
                    "more than one column with role {role:?}"
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn label_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == Role::Label)
    }

    pub fn prediction_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == Role::Prediction)
    }

    /// Indices of input and clinical feature columns, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].role.is_feature())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    T0,
    T1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTag {
    pub window: Window,
    pub timestamp: String,
}

impl WindowTag {
    pub fn new(window: Window, timestamp: impl Into<String>) -> Self {
        Self {
            window,
            timestamp: timestamp.into(),
        }
    }
}

/// One cell of an unvalidated input row.
#[derive(Debug, Clone, PartialEq)]
pub enum RawCell {
    Number(f64),
    Text(String),
}

/// Unvalidated records as produced by an ingestion layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<RawCell>>,
}

/// Column storage. Categorical levels are interned in order of first
/// appearance; labels and predictions are stored as 0/1 bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
    Binary(Vec<u8>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
            ColumnData::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Binary(v) => ColumnData::Binary(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { levels, codes } => {
                let mut interner = Interner::default();
                let codes = rows
                    .iter()
                    .map(|&i| interner.intern(&levels[codes[i] as usize]))
                    .collect();
                ColumnData::Categorical {
                    levels: interner.levels,
                    codes,
                }
            }
        }
    }

    /// The level string of a categorical cell.
    pub fn level_at(&self, row: usize) -> Option<&str> {
        match self {
            ColumnData::Categorical { levels, codes } => Some(levels[codes[row] as usize].as_str()),
            _ => None,
        }
    }
}

#[derive(Default)]
struct Interner {
    levels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&c) = self.index.get(s) {
            return c;
        }
        let c = self.levels.len() as u32;
        self.levels.push(s.to_string());
        self.index.insert(s.to_string(), c);
        c
    }
}

/// A validated sample for one monitoring window.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<ColumnData>,
    n: usize,
    tag: WindowTag,
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Checks raw records against `schema` and builds a [`Dataset`].
///
/// Header order may differ from schema order; columns are stored in schema
/// order. Label and prediction cells are coerced to 0/1.
pub fn validate_dataset(raw: &RawTable, schema: &Schema, tag: WindowTag) -> Result<Dataset> {
    let mut positions = Vec::with_capacity(schema.columns().len());
    for spec in schema.columns() {
        match raw.header.iter().position(|h| h == &spec.name) {
            Some(p) => positions.push(p),
            None => {
                return Err(Error::SchemaMismatch(format!("missing column `{}`", spec.name)));
            }
        }
    }
    if let Some(extra) = raw.header.iter().find(|h| schema.get(h).is_none()) {
        return Err(Error::SchemaMismatch(format!("unexpected column `{extra}`")));
    }
    if raw.header.len() != schema.columns().len() {
        return Err(Error::SchemaMismatch("duplicate header names".into()));
    }
    if raw.rows.is_empty() {
        return Err(Error::EmptySample);
    }
    for (r, row) in raw.rows.iter().enumerate() {
        if row.len() != raw.header.len() {
            return Err(Error::SchemaMismatch(format!(
                "row {r} has {} cells, header has {}",
                row.len(),
                raw.header.len()
            )));
        }
    }

    let mut columns = Vec::with_capacity(positions.len());
    for (spec, &pos) in schema.columns().iter().zip(&positions) {
        let cells = raw.rows.iter().map(|row| &row[pos]);
        let data = match spec.role {
            Role::Label | Role::Prediction => {
                let mut out = Vec::with_capacity(raw.rows.len());
                for (r, cell) in cells.enumerate() {
                    let v = match cell {
                        RawCell::Number(x) if *x == 0.0 => 0,
                        RawCell::Number(x) if *x == 1.0 => 1,
                        RawCell::Text(s) if s.trim() == "0" => 0,
                        RawCell::Text(s) if s.trim() == "1" => 1,
                        RawCell::Number(x) if !x.is_finite() => {
                            return Err(Error::NonFiniteValue {
                                column: spec.name.clone(),
                                row: r,
                            })
                        }
                        _ => {
                            return Err(Error::NonBinaryLabel {
                                column: spec.name.clone(),
                                row: r,
                            })
                        }
                    };
                    out.push(v);
                }
                ColumnData::Binary(out)
            }
            _ => match spec.kind {
                Kind::Numeric => {
                    let mut out = Vec::with_capacity(raw.rows.len());
                    for (r, cell) in cells.enumerate() {
                        match cell {
                            RawCell::Number(x) if x.is_finite() => out.push(*x),
                            RawCell::Number(_) => {
                                return Err(Error::NonFiniteValue {
                                    column: spec.name.clone(),
                                    row: r,
                                })
                            }
                            RawCell::Text(s) => {
                                return Err(Error::SchemaMismatch(format!(
                                    "non-numeric value `{s}` in numeric column `{}` at row {r}",
                                    spec.name
                                )))
                            }
                        }
                    }
                    ColumnData::Numeric(out)
                }
                Kind::Categorical => {
                    let mut interner = Interner::default();
                    let codes = cells
                        .map(|cell| match cell {
                            RawCell::Text(s) => interner.intern(s),
                            RawCell::Number(x) => interner.intern(&format_number(*x)),
                        })
                        .collect();
                    ColumnData::Categorical {
                        levels: interner.levels,
                        codes,
                    }
                }
            },
        };
        columns.push(data);
    }
    Ok(Dataset {
        schema: schema.clone(),
        columns,
        n: raw.rows.len(),
        tag,
    })
}

impl Dataset {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tag(&self) -> &WindowTag {
        &self.tag
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    pub fn numeric(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            ColumnData::Numeric(v) => Some(v),
            _ => None,
        }
    }

    pub fn labels(&self) -> Option<&[u8]> {
        match &self.columns[self.schema.label_index()?] {
            ColumnData::Binary(v) => Some(v),
            _ => None,
        }
    }

    pub fn predictions(&self) -> Option<&[u8]> {
        match &self.columns[self.schema.prediction_index()?] {
            ColumnData::Binary(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.labels().is_some() && self.predictions().is_some()
    }

    /// Rows `rows` (in the given order) as a new dataset with the same tag.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n: rows.len(),
            tag: self.tag.clone(),
        })
    }

    /// Inverse of [`validate_dataset`].
    pub fn to_raw(&self) -> RawTable {
        let header = self.schema.columns().iter().map(|c| c.name.clone()).collect();
        let rows = (0..self.n)
            .map(|r| {
                self.columns
                    .iter()
                    .map(|c| match c {
                        ColumnData::Numeric(v) => RawCell::Number(v[r]),
                        ColumnData::Binary(v) => RawCell::Number(v[r] as f64),
                        ColumnData::Categorical { levels, codes } => {
                            RawCell::Text(levels[codes[r] as usize].clone())
                        }
                    })
                    .collect()
            })
            .collect();
        RawTable { header, rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Greater,
    Less,
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sidedness::TwoSided => "two_sided",
            Sidedness::Greater => "greater",
            Sidedness::Less => "less",
        })
    }
}

/// Significance level, alternative direction and optional tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub alpha: f64,
    #[serde(default)]
    pub sidedness: Sidedness,
    #[serde(default)]
    pub tau: Option<f64>,
}

impl Hypothesis {
    pub fn new(alpha: f64, sidedness: Sidedness) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Self {
            alpha,
            sidedness,
            tau: None,
        })
    }

    pub fn two_sided(alpha: f64) -> Result<Self> {
        Self::new(alpha, Sidedness::TwoSided)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
        }
        self.tau = Some(tau);
        Ok(self)
    }

    pub fn with_sidedness(mut self, sidedness: Sidedness) -> Self {
        self.sidedness = sidedness;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.alpha, self.sidedness)?;
        if let Some(t) = self.tau {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!("tau must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Where a statistic must fall for a critical-value decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionRegion {
    Upper,
    Lower,
    TwoSidedAbs,
}

/// Outcome of one two-sample (or one-sample) test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    #[serde(with = "float_repr")]
    pub statistic: f64,
    pub p_value: Option<f64>,
    #[serde(with = "opt_float_repr")]
    pub critical_value: Option<f64>,
    pub region: Option<RejectionRegion>,
    pub df: Option<f64>,
    pub df2: Option<f64>,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub reject_h0: bool,
    pub n0: usize,
    pub n1: usize,
    pub notes: Vec<String>,
}

impl TestResult {
    /// A result decided by a critical value alone.
    pub fn from_critical(
        method: impl Into<String>,
        statistic: f64,
        critical_value: f64,
        region: RejectionRegion,
        hyp: &Hypothesis,
    ) -> Self {
        let reject = match region {
            RejectionRegion::Upper => statistic >= critical_value,
            RejectionRegion::Lower => statistic <= critical_value,
            RejectionRegion::TwoSidedAbs => statistic.abs() >= critical_value,
        };
        Self {
            method: method.into(),
            statistic,
            p_value: None,
            critical_value: Some(critical_value),
            region: Some(region),
            df: None,
            df2: None,
            alpha: hyp.alpha,
            sidedness: hyp.sidedness,
            reject_h0: reject,
            n0: 0,
            n1: 0,
            notes: Vec::new(),
        }
    }

    /// A result decided by a p-value, with the decision derived from it.
    pub fn from_p_value(method: impl Into<String>, statistic: f64, p_value: f64, hyp: &Hypothesis) -> Self {
        let p = p_value.clamp(0.0, 1.0);
        Self {
            method: method.into(),
            statistic,
            p_value: Some(p),
            critical_value: None,
            region: None,
            df: None,
            df2: None,
            alpha: hyp.alpha,
            sidedness: hyp.sidedness,
            reject_h0: p < hyp.alpha,
            n0: 0,
            n1: 0,
            notes: Vec::new(),
        }
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    pub fn with_sizes(mut self, n0: usize, n1: usize) -> Self {
        self.n0 = n0;
        self.n1 = n1;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn with_critical(mut self, c: f64, region: RejectionRegion) -> Self {
        self.critical_value = Some(c);
        self.region = Some(region);
        self
    }

    /// Checks the decision invariants: a p-value governs when present,
    /// otherwise the critical value and region do.
    pub fn is_consistent(&self) -> bool {
        match (self.p_value, self.critical_value, self.region) {
            (Some(p), _, _) => (0.0..=1.0).contains(&p) && self.reject_h0 == (p < self.alpha),
            (None, Some(c), Some(region)) => {
                let r = match region {
                    RejectionRegion::Upper => self.statistic >= c,
                    RejectionRegion::Lower => self.statistic <= c,
                    RejectionRegion::TwoSidedAbs => self.statistic.abs() >= c,
                };
                r == self.reject_h0
            }
            _ => false,
        }
    }
}

/// Reference distribution of a statistic under the null hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum NullModel {
    StandardNormal,
    StudentT { df: f64 },
    F { df1: f64, df2: f64 },
    ChiSquare { df: f64 },
    /// Null draws of the statistic, e.g. from permutations.
    Empirical(Vec<f64>),
}

impl NullModel {
    /// Looks a reference distribution up by name; `params` carries degrees
    /// of freedom or, for `empirical`, the null draws.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |k: usize| -> Result<()> {
            if params.len() < k || params[..k].iter().any(|d| !(*d > 0.0)) {
                Err(Error::InvalidParameter(format!(
                    "null model `{name}` needs {k} positive degrees of freedom"
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "normal" | "standard_normal" | "z" => Ok(NullModel::StandardNormal),
            "t" | "student_t" => need(1).map(|_| NullModel::StudentT { df: params[0] }),
            "f" => need(2).map(|_| NullModel::F {
                df1: params[0],
                df2: params[1],
            }),
            "chi2" | "chi_square" => need(1).map(|_| NullModel::ChiSquare { df: params[0] }),
            "empirical" => Ok(NullModel::Empirical(params.to_vec())),
            other => Err(Error::UnknownNullModel(other.to_string())),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            NullModel::StandardNormal => special::normal_cdf(x),
            NullModel::StudentT { df } => special::t_cdf(x, *df),
            NullModel::F { df1, df2 } => special::f_cdf(x, *df1, *df2),
            NullModel::ChiSquare { df } => special::chi2_cdf(x, *df),
            NullModel::Empirical(_) => unreachable!("empirical handled separately"),
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match self {
            NullModel::StandardNormal => special::normal_sf(x),
            NullModel::StudentT { df } => special::t_sf(x, *df),
            NullModel::F { df1, df2 } => special::f_sf(x, *df1, *df2),
            NullModel::ChiSquare { df } => special::chi2_sf(x, *df),
            NullModel::Empirical(_) => unreachable!("empirical handled separately"),
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        match self {
            NullModel::StandardNormal => special::normal_quantile(p),
            NullModel::StudentT { df } => special::t_quantile(p, *df),
            NullModel::F { df1, df2 } => special::f_quantile(p, *df1, *df2),
            NullModel::ChiSquare { df } => special::chi2_quantile(p, *df),
            NullModel::Empirical(_) => unreachable!("empirical handled separately"),
        }
    }

    fn is_symmetric(&self) -> bool {
        matches!(self, NullModel::StandardNormal | NullModel::StudentT { .. })
    }

    fn degrees_of_freedom(&self) -> (Option<f64>, Option<f64>) {
        match self {
            NullModel::StudentT { df } | NullModel::ChiSquare { df } => (Some(*df), None),
            NullModel::F { df1, df2 } => (Some(*df1), Some(*df2)),
            _ => (None, None),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NullModel::StandardNormal => "normal",
            NullModel::StudentT { .. } => "t",
            NullModel::F { .. } => "f",
            NullModel::ChiSquare { .. } => "chi2",
            NullModel::Empirical(_) => "empirical",
        }
    }
}

/// Computes the tail probability of `statistic` under `null` in the
/// direction given by the hypothesis, and the matching critical value.
pub fn decide(statistic: f64, null: &NullModel, hyp: &Hypothesis) -> Result<TestResult> {
    hyp.validate()?;
    if statistic.is_nan() {
        return Err(Error::InvalidParameter("statistic is NaN".into()));
    }
    let alpha = hyp.alpha;
    let (p, crit, region) = match null {
        NullModel::Empirical(draws) => {
            if draws.is_empty() {
                return Err(Error::InvalidParameter("empirical null has no draws".into()));
            }
            let b = draws.len() as f64;
            let ge = draws.iter().filter(|&&t| t >= statistic).count() as f64;
            let le = draws.iter().filter(|&&t| t <= statistic).count() as f64;
            let upper = (1.0 + ge) / (1.0 + b);
            let lower = (1.0 + le) / (1.0 + b);
            let mut sorted = draws.clone();
            sorted.sort_by(f64::total_cmp);
            let q = |p: f64| {
                let idx = ((p * b).ceil() as usize).clamp(1, sorted.len()) - 1;
                sorted[idx]
            };
            match hyp.sidedness {
                Sidedness::Greater => (upper, q(1.0 - alpha), RejectionRegion::Upper),
                Sidedness::Less => (lower, q(alpha), RejectionRegion::Lower),
                Sidedness::TwoSided => (
                    (2.0 * upper.min(lower)).min(1.0),
                    q(1.0 - alpha / 2.0),
                    RejectionRegion::Upper,
                ),
            }
        }
        model => match hyp.sidedness {
            Sidedness::Greater => (model.sf(statistic), model.quantile(1.0 - alpha), RejectionRegion::Upper),
            Sidedness::Less => (model.cdf(statistic), model.quantile(alpha), RejectionRegion::Lower),
            Sidedness::TwoSided if model.is_symmetric() => (
                (2.0 * model.sf(statistic.abs())).min(1.0),
                model.quantile(1.0 - alpha / 2.0),
                RejectionRegion::TwoSidedAbs,
            ),
            Sidedness::TwoSided => (
                (2.0 * model.cdf(statistic).min(model.sf(statistic))).min(1.0),
                model.quantile(1.0 - alpha / 2.0),
                RejectionRegion::Upper,
            ),
        },
    };
    let (df, df2) = null.degrees_of_freedom();
    let mut res = TestResult::from_p_value(null.name(), statistic, p, hyp).with_critical(crit, region);
    res.df = df;
    res.df2 = df2;
    Ok(res)
}

/// Serializes non-finite floats as the strings `inf`, `-inf` and `nan`
/// so JSON reports stay lossless.
pub mod float_repr {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl<'de> Visitor<'de> for FloatVisitor {
        type Value = f64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::custom(format!("invalid float `{v}`"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}

pub mod opt_float_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::float_repr")] f64);

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema2() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("age", Role::InputFeature, Kind::Numeric),
            ColumnSpec::new("site", Role::ClinicalFeature, Kind::Categorical),
        ])
        .unwrap()
    }

    fn tag() -> WindowTag {
        WindowTag::new(Window::T0, "2024-01")
    }

    #[test]
    fn three_rows_pass_through() {
        let raw = RawTable {
            header: vec!["site".into(), "age".into()],
            rows: vec![
                vec![RawCell::Text("A".into()), RawCell::Number(40.0)],
                vec![RawCell::Text("B".into()), RawCell::Number(51.5)],
                vec![RawCell::Text("A".into()), RawCell::Number(33.0)],
            ],
        };
        let d = validate_dataset(&raw, &schema2(), tag()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.numeric("age").unwrap(), &[40.0, 51.5, 33.0]);
        assert_eq!(d.column("site").unwrap().level_at(2), Some("A"));
    }

    #[test]
    fn rejects_bad_rows() {
        let schema = Schema::new(vec![
            ColumnSpec::new("x", Role::InputFeature, Kind::Numeric),
            ColumnSpec::new("y", Role::Label, Kind::Numeric),
        ])
        .unwrap();
        let raw = |x: f64, y: f64| RawTable {
            header: vec!["x".into(), "y".into()],
            rows: vec![vec![RawCell::Number(x), RawCell::Number(y)]],
        };
        assert!(matches!(
            validate_dataset(&raw(1.0, 2.0), &schema, tag()),
            Err(Error::NonBinaryLabel { .. })
        ));
        assert!(matches!(
            validate_dataset(&raw(f64::NAN, 1.0), &schema, tag()),
            Err(Error::NonFiniteValue { .. })
        ));
        assert!(matches!(
            validate_dataset(&raw(f64::INFINITY, 1.0), &schema, tag()),
            Err(Error::NonFiniteValue { .. })
        ));
        let missing = RawTable {
            header: vec!["x".into()],
            rows: vec![vec![RawCell::Number(1.0)]],
        };
        assert!(matches!(
            validate_dataset(&missing, &schema, tag()),
            Err(Error::SchemaMismatch(_))
        ));
        let extra = RawTable {
            header: vec!["x".into(), "y".into(), "z".into()],
            rows: vec![vec![RawCell::Number(1.0), RawCell::Number(1.0), RawCell::Number(1.0)]],
        };
        assert!(matches!(
            validate_dataset(&extra, &schema, tag()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn schema_invariants() {
        let dup = Schema::new(vec![
            ColumnSpec::new("a", Role::InputFeature, Kind::Numeric),
            ColumnSpec::new("a", Role::ClinicalFeature, Kind::Numeric),
        ]);
        assert!(dup.is_err());
        let two_labels = Schema::new(vec![
            ColumnSpec::new("a", Role::Label, Kind::Numeric),
            ColumnSpec::new("b", Role::Label, Kind::Numeric),
        ]);
        assert!(two_labels.is_err());
    }

    #[test]
    fn decide_examples() {
        let h = Hypothesis::two_sided(0.05).unwrap();
        let r = decide(0.0, &NullModel::StandardNormal, &h).unwrap();
        assert_eq!(r.p_value, Some(1.0));
        assert!(!r.reject_h0);

        let r = decide(1.96, &NullModel::StandardNormal, &h).unwrap();
        assert!((r.p_value.unwrap() - 0.05).abs() < 1e-4);
        assert!((r.critical_value.unwrap() - 1.959_964).abs() < 1e-6);

        let g = Hypothesis::new(0.05, Sidedness::Greater).unwrap();
        let r = decide(3.0, &NullModel::StudentT { df: 10.0 }, &g).unwrap();
        // t(10) upper 0.05 critical value is 1.812 in standard tables
        assert!((r.critical_value.unwrap() - 1.812_461).abs() < 1e-5);
        assert!(r.reject_h0);
        assert!(r.is_consistent());
    }

    #[test]
    fn unknown_null_model() {
        assert!(matches!(
            NullModel::from_name("cauchy", &[]),
            Err(Error::UnknownNullModel(_))
        ));
        assert_eq!(
            NullModel::from_name("f", &[2.0, 3.0]).unwrap(),
            NullModel::F { df1: 2.0, df2: 3.0 }
        );
    }

    #[test]
    fn empirical_null_add_one() {
        let h = Hypothesis::new(0.05, Sidedness::Greater).unwrap();
        let draws: Vec<f64> = (0..99).map(|i| i as f64).collect();
        let r = decide(1000.0, &NullModel::Empirical(draws), &h).unwrap();
        assert_eq!(r.p_value, Some(0.01));
    }

    #[test]
    fn non_finite_statistic_json() {
        let h = Hypothesis::two_sided(0.05).unwrap();
        let r = TestResult::from_p_value("x", f64::NEG_INFINITY, 0.0, &h)
            .with_critical(f64::INFINITY, RejectionRegion::Upper);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: TestResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn decide_monotone_greater(a in -10.0f64..10.0, b in -10.0f64..10.0, df in 1.0f64..50.0) {
            let h = Hypothesis::new(0.05, Sidedness::Greater).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for null in [NullModel::StandardNormal, NullModel::StudentT { df }] {
                let p_lo = decide(lo, &null, &h).unwrap().p_value.unwrap();
                let p_hi = decide(hi, &null, &h).unwrap().p_value.unwrap();
                prop_assert!(p_hi <= p_lo + 1e-15);
            }
        }

        #[test]
        fn decide_symmetric_two_sided(s in -8.0f64..8.0, df in 1.0f64..80.0) {
            let h = Hypothesis::two_sided(0.05).unwrap();
            for null in [NullModel::StandardNormal, NullModel::StudentT { df }] {
                let a = decide(s, &null, &h).unwrap().p_value.unwrap();
                let b = decide(-s, &null, &h).unwrap().p_value.unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn raw_round_trip(
            nums in proptest::collection::vec(-1e6f64..1e6, 1..30),
            cats in proptest::collection::vec(0u8..4, 1..30),
            bits in proptest::collection::vec(0u8..2, 1..30),
        ) {
            let n = nums.len().min(cats.len()).min(bits.len());
            let schema = Schema::new(vec![
                ColumnSpec::new("x", Role::InputFeature, Kind::Numeric),
                ColumnSpec::new("c", Role::ClinicalFeature, Kind::Categorical),
                ColumnSpec::new("y", Role::Label, Kind::Numeric),
            ]).unwrap();
            let raw = RawTable {
                header: vec!["x".into(), "c".into(), "y".into()],
                rows: (0..n).map(|i| vec![
                    RawCell::Number(nums[i]),
                    RawCell::Text(format!("L{}", cats[i])),
                    RawCell::Number(bits[i] as f64),
                ]).collect(),
            };
            let d = validate_dataset(&raw, &schema, tag()).unwrap();
            let again = validate_dataset(&d.to_raw(), &schema, tag()).unwrap();
            prop_assert_eq!(d, again);
        }
    }
}
