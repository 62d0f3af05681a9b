//! Distribution-free two-sample tests.

pub mod anderson;
pub mod ks;
pub mod levene;
pub mod mmd;
pub mod mst;
pub mod rank;

pub use anderson::{ad_statistic, anderson_darling_test};
pub use ks::{ks_statistic, ks_test};
pub use levene::{levene_statistic, levene_test, Center};
pub use mmd::{mmd_b, mmd_bound, mmd_test, Bandwidth, KernelSpec, MmdDecision};
pub use mst::{friedman_rafsky_test, FriedmanRafsky};
pub use rank::{mann_whitney_u, u_statistic};
