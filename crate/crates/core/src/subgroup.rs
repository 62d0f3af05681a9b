//! Search for subgroups where performance degrades most or where the two
//! windows differ most.
//!
//! Subgroups are conjunctions of predicate atoms: one level of a
//! categorical feature, or one pooled-quantile interval of a numeric
//! feature. Conjunctions never use two atoms on the same feature. The
//! search is a beam search; [`exhaustive`] enumerates the same space.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::EnergyPrepared;
use crate::encode::{Append, Encoder};
use crate::error::{Error, Result};
use crate::geometry::Points;
use crate::nonparametric::mmd::{median_heuristic, KernelMatrix};
use crate::nonparametric::KernelSpec;
use crate::performance::{confusion_of, metric, MetricKind};
use crate::stats::quantile_sorted;
use crate::types::{ColumnData, Dataset, Kind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum AtomForm {
    CategoricalEquals { value: String },
    /// `lo < x <= hi`, or `lo <= x <= hi` for the first interval.
    NumericIn { lo: f64, hi: f64, closed_low: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateAtom {
    pub feature: String,
    #[serde(flatten)]
    pub form: AtomForm,
}

impl PredicateAtom {
    fn matches(&self, col: &ColumnData, row: usize) -> bool {
        match (&self.form, col) {
            (AtomForm::CategoricalEquals { value }, c @ ColumnData::Categorical { .. }) => {
                c.level_at(row) == Some(value.as_str())
            }
            (AtomForm::NumericIn { lo, hi, closed_low }, ColumnData::Numeric(v)) => {
                let x = v[row];
                (if *closed_low { x >= *lo } else { x > *lo }) && x <= *hi
            }
            _ => false,
        }
    }

    fn mask(&self, d: &Dataset) -> Vec<bool> {
        match d.column(&self.feature) {
            Some(col) => (0..d.len()).map(|r| self.matches(col, r)).collect(),
            None => vec![false; d.len()],
        }
    }
}

impl fmt::Display for PredicateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            AtomForm::CategoricalEquals { value } => write!(f, "{} = {}", self.feature, value),
            AtomForm::NumericIn { lo, hi, closed_low } => {
                let open = if *closed_low { '[' } else { '(' };
                write!(f, "{} in {open}{lo}, {hi}]", self.feature)
            }
        }
    }
}

/// Atoms for every feature column: one per categorical level seen in
/// either window and up to `bins` pooled-quantile intervals per numeric
/// feature. Repeated quantiles merge intervals; a constant feature yields a
/// single atom covering every row.
pub fn build_atoms(d0: &Dataset, d1: &Dataset, bins: usize) -> Result<Vec<PredicateAtom>> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins must be >= 2, got {bins}")));
    }
    if d0.schema() != d1.schema() {
        return Err(Error::SchemaMismatch("windows have different schemas".into()));
    }
    let mut atoms = Vec::new();
    for idx in d0.schema().feature_indices() {
        let spec = &d0.schema().columns()[idx];
        match (spec.kind, &d0.columns()[idx], &d1.columns()[idx]) {
            (Kind::Categorical, ColumnData::Categorical { levels: a, .. }, ColumnData::Categorical { levels: b, .. }) => {
                let levels: BTreeSet<&String> = a.iter().chain(b).collect();
                atoms.extend(levels.into_iter().map(|l| PredicateAtom {
                    feature: spec.name.clone(),
                    form: AtomForm::CategoricalEquals { value: l.clone() },
                }));
            }
            (Kind::Numeric, ColumnData::Numeric(a), ColumnData::Numeric(b)) => {
                let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
                pooled.sort_by(f64::total_cmp);
                let mut edges: Vec<f64> = (0..=bins)
                    .map(|k| quantile_sorted(&pooled, k as f64 / bins as f64))
                    .collect();
                edges.dedup();
                if edges.len() == 1 {
                    atoms.push(PredicateAtom {
                        feature: spec.name.clone(),
                        form: AtomForm::NumericIn {
                            lo: edges[0],
                            hi: edges[0],
                            closed_low: true,
                        },
                    });
                    continue;
                }
                atoms.extend(edges.windows(2).enumerate().map(|(k, w)| PredicateAtom {
                    feature: spec.name.clone(),
                    form: AtomForm::NumericIn {
                        lo: w[0],
                        hi: w[1],
                        closed_low: k == 0,
                    },
                }));
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "feature `{}` is stored inconsistently",
                    spec.name
                )))
            }
        }
    }
    Ok(atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanParams {
    /// Minimum support in each window.
    pub min_support: usize,
    pub depth: usize,
    pub beam: usize,
    pub top_k: usize,
    pub bins: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            min_support: 30,
            depth: 2,
            beam: 20,
            top_k: 5,
            bins: 4,
        }
    }
}

impl ScanParams {
    fn validate(&self, min_r: usize) -> Result<()> {
        if self.min_support < min_r {
            return Err(Error::InvalidParameter(format!(
                "minimum support must be >= {min_r}, got {}",
                self.min_support
            )));
        }
        if self.depth == 0 || self.beam == 0 || self.top_k == 0 {
            return Err(Error::InvalidParameter("depth, beam and top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupFinding {
    pub atoms: Vec<PredicateAtom>,
    pub support0: usize,
    pub support1: usize,
    pub objective: f64,
    pub metric0: Option<f64>,
    pub metric1: Option<f64>,
}

impl SubgroupFinding {
    pub fn describe(&self) -> String {
        self.atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(" AND ")
    }
}

/// Objective of one subgroup given its row indices in each window.
trait Objective: Sync {
    /// `None` when the objective is undefined on this subgroup.
    fn eval(&self, rows0: &[usize], rows1: &[usize]) -> Option<(f64, Option<f64>, Option<f64>)>;
}

struct Degradation<'a> {
    y0: &'a [u8],
    p0: &'a [u8],
    y1: &'a [u8],
    p1: &'a [u8],
    kind: MetricKind,
}

impl Objective for Degradation<'_> {
    fn eval(&self, rows0: &[usize], rows1: &[usize]) -> Option<(f64, Option<f64>, Option<f64>)> {
        let pick = |y: &[u8], p: &[u8], rows: &[usize]| {
            let ys: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
            let ps: Vec<u8> = rows.iter().map(|&i| p[i]).collect();
            metric(&confusion_of(&ys, &ps), self.kind).ok()
        };
        let m0 = pick(self.y0, self.p0, rows0)?;
        let m1 = pick(self.y1, self.p1, rows1)?;
        Some((m0 - m1, Some(m0), Some(m1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Discrepancy {
    #[default]
    Energy,
    Mmd,
}

struct Divergent {
    e0: Vec<Vec<f64>>,
    e1: Vec<Vec<f64>>,
    kind: Discrepancy,
    bandwidth: f64,
}

impl Objective for Divergent {
    fn eval(&self, rows0: &[usize], rows1: &[usize]) -> Option<(f64, Option<f64>, Option<f64>)> {
        let a: Vec<Vec<f64>> = rows0.iter().map(|&i| self.e0[i].clone()).collect();
        let b: Vec<Vec<f64>> = rows1.iter().map(|&i| self.e1[i].clone()).collect();
        let v = match self.kind {
            Discrepancy::Energy => EnergyPrepared::new(&a, &b).ok()?.observed(),
            Discrepancy::Mmd => {
                let k = KernelSpec::fixed(self.bandwidth).ok()?;
                KernelMatrix::new(&a, &b, &k).ok()?.mmd_b()
            }
        };
        v.is_finite().then_some((v, None, None))
    }
}

struct Space {
    atoms: Vec<PredicateAtom>,
    feature_of: Vec<usize>,
    masks0: Vec<Vec<bool>>,
    masks1: Vec<Vec<bool>>,
}

impl Space {
    fn new(d0: &Dataset, d1: &Dataset, atoms: Vec<PredicateAtom>) -> Self {
        let mut names: Vec<&str> = Vec::new();
        let feature_of = atoms
            .iter()
            .map(|a| match names.iter().position(|n| *n == a.feature) {
                Some(i) => i,
                None => {
                    names.push(&a.feature);
                    names.len() - 1
                }
            })
            .collect();
        Self {
            masks0: atoms.iter().map(|a| a.mask(d0)).collect(),
            masks1: atoms.iter().map(|a| a.mask(d1)).collect(),
            feature_of,
            atoms,
        }
    }

    fn rows(masks: &[Vec<bool>], conj: &[usize]) -> Vec<usize> {
        (0..masks[conj[0]].len())
            .filter(|&r| conj.iter().all(|&a| masks[a][r]))
            .collect()
    }

    fn can_extend(&self, conj: &[usize], atom: usize) -> bool {
        conj.iter().all(|&a| self.feature_of[a] != self.feature_of[atom])
    }
}

#[derive(Debug, Clone)]
struct Scored {
    conj: Vec<usize>,
    support0: usize,
    support1: usize,
    objective: f64,
    metric0: Option<f64>,
    metric1: Option<f64>,
}

/// Objective descending, then larger `min(support0, support1)`, then
/// lexicographic atom indices.
fn rank(a: &Scored, b: &Scored) -> Ordering {
    b.objective
        .total_cmp(&a.objective)
        .then(b.support0.min(b.support1).cmp(&a.support0.min(a.support1)))
        .then(a.conj.cmp(&b.conj))
}

fn score_all(space: &Space, cands: Vec<Vec<usize>>, r: usize, obj: &dyn Objective) -> Vec<Scored> {
    cands
        .into_par_iter()
        .filter_map(|conj| {
            let rows0 = Space::rows(&space.masks0, &conj);
            let rows1 = Space::rows(&space.masks1, &conj);
            if rows0.len() < r || rows1.len() < r {
                return None;
            }
            let (objective, metric0, metric1) = obj.eval(&rows0, &rows1)?;
            Some(Scored {
                conj,
                support0: rows0.len(),
                support1: rows1.len(),
                objective,
                metric0,
                metric1,
            })
        })
        .collect()
}

fn finish(space: &Space, mut found: Vec<Scored>, params: &ScanParams) -> Result<Vec<SubgroupFinding>> {
    if found.is_empty() {
        return Err(Error::NoFeasibleSubgroup {
            min_support: params.min_support,
        });
    }
    found.sort_by(rank);
    found.truncate(params.top_k);
    Ok(found
        .into_iter()
        .map(|s| SubgroupFinding {
            atoms: s.conj.iter().map(|&a| space.atoms[a].clone()).collect(),
            support0: s.support0,
            support1: s.support1,
            objective: s.objective,
            metric0: s.metric0,
            metric1: s.metric1,
        })
        .collect())
}

fn beam_search(space: &Space, params: &ScanParams, obj: &dyn Objective) -> Result<Vec<SubgroupFinding>> {
    let n_atoms = space.atoms.len();
    let mut all: Vec<Scored> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..params.depth {
        let mut cands: BTreeSet<Vec<usize>> = BTreeSet::new();
        for conj in &frontier {
            for atom in 0..n_atoms {
                if conj.contains(&atom) || !space.can_extend(conj, atom) {
                    continue;
                }
                let mut next = conj.clone();
                next.push(atom);
                next.sort_unstable();
                cands.insert(next);
            }
        }
        let mut scored = score_all(space, cands.into_iter().collect(), params.min_support, obj);
        if scored.is_empty() {
            break;
        }
        scored.sort_by(rank);
        frontier = scored.iter().take(params.beam).map(|s| s.conj.clone()).collect();
        all.extend(scored);
    }
    finish(space, all, params)
}

/// Every conjunction of at most `params.depth` atoms; `beam` is ignored.
fn exhaustive_search(space: &Space, params: &ScanParams, obj: &dyn Objective) -> Result<Vec<SubgroupFinding>> {
    fn grow(space: &Space, conj: &mut Vec<usize>, start: usize, depth: usize, out: &mut Vec<Vec<usize>>) {
        if !conj.is_empty() {
            out.push(conj.clone());
        }
        if conj.len() == depth {
            return;
        }
        for atom in start..space.atoms.len() {
            if space.can_extend(conj, atom) {
                conj.push(atom);
                grow(space, conj, atom + 1, depth, out);
                conj.pop();
            }
        }
    }
    let mut cands = Vec::new();
    grow(space, &mut Vec::new(), 0, params.depth, &mut cands);
    let scored = score_all(space, cands, params.min_support, obj);
    finish(space, scored, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    #[default]
    Beam,
    Exhaustive,
}

fn run(space: &Space, params: &ScanParams, obj: &dyn Objective, search: Search) -> Result<Vec<SubgroupFinding>> {
    match search {
        Search::Beam => beam_search(space, params, obj),
        Search::Exhaustive => exhaustive_search(space, params, obj),
    }
}

/// Subgroups maximizing `M_t0(G) - M_t1(G)`.
pub fn scan_degradation(
    d0: &Dataset,
    d1: &Dataset,
    kind: MetricKind,
    params: &ScanParams,
    search: Search,
) -> Result<Vec<SubgroupFinding>> {
    params.validate(1)?;
    let missing = |what: &str| Error::MissingColumn(what.into());
    let obj = Degradation {
        y0: d0.labels().ok_or_else(|| missing("label"))?,
        p0: d0.predictions().ok_or_else(|| missing("prediction"))?,
        y1: d1.labels().ok_or_else(|| missing("label"))?,
        p1: d1.predictions().ok_or_else(|| missing("prediction"))?,
        kind,
    };
    let space = Space::new(d0, d1, build_atoms(d0, d1, params.bins)?);
    run(&space, params, &obj, search)
}

/// Subgroups maximizing the divergence between the windows' encoded rows
/// inside the subgroup. `append` adds `y` or the correctness indicator as
/// a coordinate. Encoding and MMD bandwidth are fitted once on the full
/// windows.
pub fn scan_discrepancy(
    d0: &Dataset,
    d1: &Dataset,
    kind: Discrepancy,
    append: Append,
    params: &ScanParams,
    search: Search,
) -> Result<Vec<SubgroupFinding>> {
    params.validate(2)?;
    let enc = Encoder::features(d0, d1, append)?;
    let (e0, e1) = enc.encode_pair(d0, d1)?;
    let bandwidth = match kind {
        Discrepancy::Mmd => median_heuristic(&e0 as &Points, &e1)?,
        Discrepancy::Energy => 1.0,
    };
    let obj = Divergent { e0, e1, kind, bandwidth };
    let space = Space::new(d0, d1, build_atoms(d0, d1, params.bins)?);
    run(&space, params, &obj, search)
}
