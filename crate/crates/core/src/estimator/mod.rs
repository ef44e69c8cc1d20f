//! Failure-probability estimators and sample allocation.

mod alloc;
mod mcs;
mod tss;

pub use alloc::{allocate, fractions, predicted_variance, AllocationStrategy};
pub use mcs::{importance_estimate, mcs_estimate};
pub use tss::{
    neyman_pilot_guesses, tss_empirical_estimate, tss_estimate, tss_from_samples, tss_full_with_a0, PILOT_FRACTION,
};

use serde::{Deserialize, Serialize};

/// Which estimator produced a [`FailureEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Tss,
    TssUnbiased,
    TssFullA0,
    TssEmpirical,
    Mcs,
    Importance,
    Sus,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Tss => "tss",
            EstimatorKind::TssUnbiased => "tss_unbiased",
            EstimatorKind::TssFullA0 => "tss_full_a0",
            EstimatorKind::TssEmpirical => "tss_empirical",
            EstimatorKind::Mcs => "mcs",
            EstimatorKind::Importance => "importance",
            EstimatorKind::Sus => "sus",
        }
    }
}

/// Sample count and conditional failure fraction of one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumStat {
    pub n: usize,
    pub pf_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEstimate {
    pub p_hat: f64,
    pub var_hat: f64,
    /// `sqrt(var_hat) / p_hat`; absent when `p_hat = 0`.
    pub cov: Option<f64>,
    /// Upper bound on the bias; zero for unbiased estimators.
    pub bias_bound: f64,
    pub per_stratum: Vec<StratumStat>,
    /// Every performance-function evaluation spent, pilots included.
    pub n_g_evals: u64,
    pub estimator_kind: EstimatorKind,
    /// Set on weight degeneracy (importance sampling) or non-convergence.
    #[serde(default)]
    pub degenerate: bool,
}

impl FailureEstimate {
    pub(crate) fn new(p_hat: f64, var_hat: f64, bias_bound: f64, n_g_evals: u64, kind: EstimatorKind) -> Self {
        let var_hat = var_hat.max(0.0);
        Self {
            p_hat,
            var_hat,
            cov: cov_of(p_hat, var_hat),
            bias_bound,
            per_stratum: Vec::new(),
            n_g_evals,
            estimator_kind: kind,
            degenerate: false,
        }
    }

    /// Flat record for CSV output.
    pub fn record(&self) -> EstimateRecord {
        EstimateRecord {
            estimator: self.estimator_kind.as_str().to_string(),
            p_hat: self.p_hat,
            var_hat: self.var_hat,
            cov: self.cov,
            bias_bound: self.bias_bound,
            n_g_evals: self.n_g_evals,
            strata_n: join(self.per_stratum.iter().map(|s| s.n.to_string())),
            strata_pf: join(self.per_stratum.iter().map(|s| format!("{:e}", s.pf_hat))),
            degenerate: self.degenerate,
        }
    }
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(";")
}

pub(crate) fn cov_of(p_hat: f64, var_hat: f64) -> Option<f64> {
    (p_hat > 0.0).then(|| var_hat.max(0.0).sqrt() / p_hat)
}

/// [`FailureEstimate`] flattened to one row; per-stratum lists are joined
/// with `;`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub estimator: String,
    pub p_hat: f64,
    pub var_hat: f64,
    pub cov: Option<f64>,
    pub bias_bound: f64,
    pub n_g_evals: u64,
    pub strata_n: String,
    pub strata_pf: String,
    pub degenerate: bool,
}
