//! Two-sample hypothesis tests, divergence measures, control charts and
//! subgroup scans for monitoring deployed binary classifiers.
//!
//! Every detector compares a baseline window (`t0`) with a current window
//! (`t1`) and reports a [`TestResult`] carrying the statistic, a p-value
//! and/or critical value, and the decision at the configured level.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod special;
pub mod stats;
pub mod types;
pub mod parametric;
pub mod geometry;
pub mod permutation;
pub mod nonparametric;
pub mod divergence;
pub mod charts;
pub mod encode;
pub mod performance;
pub mod subgroup;

pub use error::{Error, Result};
pub use types::{
    decide, validate_dataset, ColumnData, ColumnSpec, Dataset, Hypothesis, Kind, NullModel, RawCell,
    RawTable, RejectionRegion, Role, Schema, Sidedness, TestResult, Window, WindowTag,
};
pub use charts::{run_chart, ChartKind, ChartParams, ChartState, Signal};
pub use divergence::{energy_distance, f_divergence, wasserstein_1d, DivergenceKind, FDivergence, HistogramPair};
pub use performance::{confusion, metric, ConfusionCounts, MetricKind};
pub use permutation::{permutation_test, PermutationPlan};
pub use subgroup::{PredicateAtom, ScanParams, SubgroupFinding};
