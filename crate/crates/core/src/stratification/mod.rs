//! Tail strata `A_1..A_m` over the region `A_*` outside a null stratum `A_0`.
//!
//! Every scheme enforces the geometric law `P(A_i) = p0^(i-1) (1 - p0) P(A_*)`.
//! With `unbiased_tail` the last stratum absorbs the whole remaining tail and
//! has probability `p0^(m-1) P(A_*)`.

mod empirical;
mod gaussian;
mod safe;
mod uniform;

pub use empirical::{empirical_stratify, is_allocation_stratify, Cut, EmpiricalStrata, SortKey};
pub use gaussian::build_gaussian_radial;
pub use safe::{null_stratum_from_design_point, null_stratum_from_predicate, ProbMethod, SafeKind, SafePredicate, SafeRegion};
pub use uniform::{build_uniform_norm, uniform_tail_fraction, NormOrder, VolumeOptions};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Location of a point relative to a stratification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stratum {
    /// Inside the null stratum `A_0`.
    Null,
    /// Inside tail stratum `A_i`, `i` in `1..=m`.
    Tail(usize),
    /// Past the last stratum of a truncated stratification.
    Beyond,
}

/// Scheme-specific boundary parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// Radial shells. `radii` holds `r_0..r_m`; when the tail is unbiased the
    /// open outer radius of stratum `m` is omitted, leaving `r_0..r_(m-1)`.
    GaussianRadial { radii: Vec<f64> },
    /// Norm shells inside `[-1, 1]^d`, thresholds `λ_0..λ_m`.
    UniformNorm { norm: NormOrder, thresholds: Vec<f64> },
    /// Sample-sorted blocks.
    Empirical(EmpiricalStrata),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStratification {
    #[serde(flatten)]
    pub scheme: Scheme,
    pub d: usize,
    pub p0: f64,
    pub m: usize,
    pub prob_a_star: f64,
    pub strata_probs: Vec<f64>,
    pub unbiased_tail: bool,
}

/// Stratum probabilities under the geometric law.
pub fn geometric_probs(p0: f64, m: usize, prob_a_star: f64, unbiased_tail: bool) -> Vec<f64> {
    let mut probs = Vec::with_capacity(m);
    let mut mass = prob_a_star;
    for i in 0..m {
        if unbiased_tail && i + 1 == m {
            probs.push(mass);
        } else {
            probs.push(mass * (1.0 - p0));
        }
        mass *= p0;
    }
    probs
}

pub(crate) fn check_common(d: usize, p0: f64, m: usize) -> Result<()> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return domain(format!("p0 must lie in (0, 1), got {p0}"));
    }
    if m < 1 {
        return domain("at least one stratum is required");
    }
    Ok(())
}

impl TailStratification {
    /// Probability of the null stratum.
    pub fn prob_null(&self) -> f64 {
        1.0 - self.prob_a_star
    }

    /// Probability mass dropped by truncation, `p0^m P(A_*)`, or 0 when the
    /// tail is unbiased.
    pub fn prob_beyond(&self) -> f64 {
        if self.unbiased_tail {
            0.0
        } else {
            self.p0.powi(self.m as i32) * self.prob_a_star
        }
    }

    /// Upper bound on the truncation bias of the estimator.
    pub fn bias_bound(&self) -> f64 {
        self.prob_beyond()
    }

    /// Bounds `(lo, hi]` of tail stratum `i` (1-based) in the scheme's radial
    /// coordinate. Not defined for empirical strata.
    pub fn shell(&self, i: usize) -> Option<(f64, f64)> {
        if i == 0 || i > self.m {
            return None;
        }
        let b = match &self.scheme {
            Scheme::GaussianRadial { radii } => radii,
            Scheme::UniformNorm { thresholds, .. } => thresholds,
            Scheme::Empirical(_) => return None,
        };
        let hi = b.get(i).copied().unwrap_or(f64::INFINITY);
        Some((b[i - 1], hi))
    }

    /// Radial coordinate used by the geometric schemes.
    pub fn radial_coordinate(&self, x: &[f64]) -> Option<f64> {
        match &self.scheme {
            Scheme::GaussianRadial { .. } => Some(NormOrder::L2.norm(x)),
            Scheme::UniformNorm { norm, .. } => Some(norm.norm(x)),
            Scheme::Empirical(_) => None,
        }
    }

    /// Stratum containing `x`. Empirical strata are located by sort key
    /// instead; see [`classify_key`](Self::classify_key).
    pub fn classify(&self, x: &[f64]) -> Result<Stratum> {
        let bounds = match &self.scheme {
            Scheme::GaussianRadial { radii } => radii,
            Scheme::UniformNorm { thresholds, .. } => thresholds,
            Scheme::Empirical(_) => {
                return Err(Error::Unsupported(
                    "empirical strata are located by sort key, use classify_key".into(),
                ))
            }
        };
        let r = self.radial_coordinate(x).expect("geometric scheme");
        Ok(self.locate(r, bounds))
    }

    fn locate(&self, r: f64, bounds: &[f64]) -> Stratum {
        if r < bounds[0] {
            return Stratum::Null;
        }
        let outer = &bounds[1..];
        let below = outer.partition_point(|&b| b < r);
        if below < outer.len() {
            Stratum::Tail(below + 1)
        } else if self.unbiased_tail || outer.len() < self.m {
            Stratum::Tail(self.m)
        } else {
            Stratum::Beyond
        }
    }

    /// Stratum of a point with the given sort key under an empirical scheme.
    /// Keys are assumed to come from points inside `A_*`.
    pub fn classify_key(&self, key: SortKey) -> Result<Stratum> {
        match &self.scheme {
            Scheme::Empirical(e) => Ok(e.locate(key, self.m, self.unbiased_tail)),
            _ => Err(Error::Unsupported("classify_key applies to empirical strata only".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
