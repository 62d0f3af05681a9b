//! Synthetic window pairs with planted shifts, for calibration and demos.
//!
//! Generative family for one row:
//! - `age ~ N(55, 12^2)`, `site` in {A, B, C} with weights 0.5/0.3/0.2,
//!   `x1 ~ N(0, 1)`, `x2` an equal mixture of `N(-1, 0.5^2)` and `N(1, 0.5^2)`;
//! - score `s = 1.5 x1 - x2 + 0.04 (age - 55) + b(site)`;
//! - the frozen stub model predicts `1[s > 0]`;
//! - the label is the same rule flipped with probability 0.05, so accuracy
//!   is 0.95 under any change of the inputs alone.

use postmon_core::permutation::stream_rng;
use postmon_core::special::normal_quantile;
use postmon_core::{
    validate_dataset, ColumnSpec, Dataset, Kind, RawCell, RawTable, Role, Schema, Window, WindowTag,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{ChartEntry, MonitorConfig, ScanConfig, SchemaRef, Stage, TestEntry, TestName};

pub const AGE_MEAN: f64 = 55.0;
pub const AGE_SD: f64 = 12.0;
pub const NOISE: f64 = 0.05;
const SITES: [(&str, f64, f64); 3] = [("A", 0.5, 0.0), ("B", 0.3, 0.3), ("C", 0.2, -0.3)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    None,
    MeanShift,
    VarianceShift,
    LabelFlipConceptDrift,
    SubgroupLocalDegradation,
    GradualDrift,
}

/// How the current window departs from the baseline.
///
/// - `mean_shift`: affected rows get `x1` and `age` moved by `magnitude`
///   standard deviations;
/// - `variance_shift`: affected rows get `x1` scaled by `1 + magnitude`;
/// - `label_flip_concept_drift`: affected rows have their label flipped
///   with probability `magnitude` (capped at 1);
/// - `subgroup_local_degradation`: rows with age above the `1 - fraction`
///   quantile of the age distribution have accuracy `0.95 - magnitude`;
/// - `gradual_drift`: `x1` ramps linearly from `+0` on the first row to
///   `+magnitude` on the last, on every row.
///
/// Rows are affected independently with probability `fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub kind: ScenarioKind,
    pub magnitude: f64,
    pub fraction: f64,
    pub seed: u64,
}

impl ShiftScenario {
    /// Clamps parameters into range: magnitude to `>= 0` (and to 0 for
    /// `none`), fraction to `(0, 1]`.
    pub fn new(kind: ScenarioKind, magnitude: f64, fraction: f64, seed: u64) -> Self {
        let magnitude = if kind == ScenarioKind::None || !magnitude.is_finite() {
            0.0
        } else {
            magnitude.max(0.0)
        };
        let fraction = if fraction.is_finite() && fraction > 0.0 {
            fraction.min(1.0)
        } else {
            1.0
        };
        Self {
            kind,
            magnitude,
            fraction,
            seed,
        }
    }
}

pub fn template_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::new("age", Role::ClinicalFeature, Kind::Numeric),
        ColumnSpec::new("site", Role::ClinicalFeature, Kind::Categorical),
        ColumnSpec::new("x1", Role::InputFeature, Kind::Numeric),
        ColumnSpec::new("x2", Role::InputFeature, Kind::Numeric),
        ColumnSpec::new("y", Role::Label, Kind::Numeric),
        ColumnSpec::new("yhat", Role::Prediction, Kind::Numeric),
    ])
    .expect("template schema is valid")
}

struct Row {
    age: f64,
    site: usize,
    x1: f64,
    x2: f64,
}

impl Row {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        let z = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        let age = AGE_MEAN + AGE_SD * z(rng);
        let u: f64 = rng.gen();
        let site = if u < SITES[0].1 {
            0
        } else if u < SITES[0].1 + SITES[1].1 {
            1
        } else {
            2
        };
        let x1 = z(rng);
        let centre = if coin(rng, 0.5) { -1.0 } else { 1.0 };
        let x2 = centre + 0.5 * z(rng);
        Row { age, site, x1, x2 }
    }

    fn prediction(&self) -> u8 {
        let s = 1.5 * self.x1 - self.x2 + 0.04 * (self.age - AGE_MEAN) + SITES[self.site].2;
        u8::from(s > 0.0)
    }
}

fn to_dataset(rows: &[(Row, u8)], window: Window) -> Dataset {
    let raw = RawTable {
        header: ["age", "site", "x1", "x2", "y", "yhat"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|(r, y)| {
                vec![
                    RawCell::Number(r.age),
                    RawCell::Text(SITES[r.site].0.into()),
                    RawCell::Number(r.x1),
                    RawCell::Number(r.x2),
                    RawCell::Number(*y as f64),
                    RawCell::Number(r.prediction() as f64),
                ]
            })
            .collect(),
    };
    validate_dataset(&raw, &template_schema(), WindowTag::new(window, "")).expect("simulated rows are valid")
}

/// Age above which a row belongs to the degraded subgroup.
pub fn subgroup_age_threshold(fraction: f64) -> f64 {
    if fraction >= 1.0 {
        f64::NEG_INFINITY
    } else {
        AGE_MEAN + AGE_SD * normal_quantile(1.0 - fraction)
    }
}

/// Always consumes one draw, so streams stay aligned across scenarios.
fn coin<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

fn flip<R: Rng>(rng: &mut R, yhat: u8, p: f64) -> u8 {
    if coin(rng, p) {
        1 - yhat
    } else {
        yhat
    }
}

/// Baseline and current windows of sizes `n0` and `n1` (each at least 1).
pub fn simulate(scenario: &ShiftScenario, n0: usize, n1: usize) -> (Dataset, Dataset) {
    let sc = ShiftScenario::new(scenario.kind, scenario.magnitude, scenario.fraction, scenario.seed);
    let (n0, n1) = (n0.max(1), n1.max(1));

    let mut rng = stream_rng(sc.seed, 0);
    let t0: Vec<(Row, u8)> = (0..n0)
        .map(|_| {
            let r = Row::draw(&mut rng);
            let y = flip(&mut rng, r.prediction(), NOISE);
            (r, y)
        })
        .collect();

    let mut rng = stream_rng(sc.seed, 1);
    let m = sc.magnitude;
    let cut = subgroup_age_threshold(sc.fraction);
    let t1: Vec<(Row, u8)> = (0..n1)
        .map(|i| {
            let mut r = Row::draw(&mut rng);
            let hit = coin(&mut rng, sc.fraction);
            let mut noise = NOISE;
            match sc.kind {
                ScenarioKind::MeanShift if hit => {
                    r.x1 += m;
                    r.age += m * AGE_SD;
                }
                ScenarioKind::VarianceShift if hit => r.x1 *= 1.0 + m,
                ScenarioKind::GradualDrift => {
                    r.x1 += if n1 > 1 { m * i as f64 / (n1 - 1) as f64 } else { m };
                }
                ScenarioKind::SubgroupLocalDegradation if r.age > cut => noise = NOISE + m,
                _ => {}
            }
            let mut y = flip(&mut rng, r.prediction(), noise);
            let concept = coin(&mut rng, m);
            if sc.kind == ScenarioKind::LabelFlipConceptDrift && hit && concept {
                y = 1 - y;
            }
            (r, y)
        })
        .collect();
    (to_dataset(&t0, Window::T0), to_dataset(&t1, Window::T1))
}

/// The monitoring suite written next to simulated files.
pub fn default_config(baseline: &str, current: &str, seed: u64) -> MonitorConfig {
    let mut ks = TestEntry::new(TestName::Ks);
    ks.features = vec!["age".into(), "x1".into(), "x2".into()];
    let mut mmd = TestEntry::new(TestName::Mmd);
    mmd.params.mmd_decision = Some(postmon_core::nonparametric::MmdDecision::Permutation);
    let mut concept = TestEntry::new(TestName::EnergyJoint);
    concept.stage = Some(Stage::ConceptDrift);
    let deviation = TestEntry::new(TestName::Deviation);
    let correctness = TestEntry::new(TestName::CorrectnessShift);
    MonitorConfig {
        schema: SchemaRef::Inline(template_schema()),
        baseline: baseline.into(),
        current: current.into(),
        tests: vec![ks, mmd, concept, deviation, correctness],
        charts: vec![ChartEntry {
            feature: "x1".into(),
            kind: postmon_core::ChartKind::Cusum,
            params: None,
        }],
        scan: ScanConfig::default(),
        seed,
        alpha: 0.05,
        permutations: 199,
        bonferroni: false,
        timestamps: false,
        output: None,
    }
}
