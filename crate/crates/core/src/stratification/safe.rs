use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::model::InputModel;
use crate::probmath::{chi_cdf, chi_sf, RngStream};

/// Membership test for a caller-certified safe set.
pub type SafePredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Shape of the null stratum `A_0`.
#[derive(Clone)]
pub enum SafeKind {
    Empty,
    /// `{x : |x|_2 < radius}` in standard normal space.
    GaussianBall { radius: f64 },
    /// Arbitrary set given by a membership test that never evaluates `g`.
    Predicate(SafePredicate),
}

impl fmt::Debug for SafeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafeKind::Empty => f.write_str("Empty"),
            SafeKind::GaussianBall { radius } => f.debug_struct("GaussianBall").field("radius", radius).finish(),
            SafeKind::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

/// How `P(A_0)` of a predicate region is obtained.
#[derive(Debug, Clone)]
pub enum ProbMethod {
    Analytic(f64),
    /// Predicate-only Monte Carlo with `n_probe` draws from `model`.
    Mcs { n_probe: usize, model: InputModel, stream: RngStream },
}

/// The null stratum together with its probability.
///
/// A predicate that admits failure points is not detected here; it yields a
/// biased estimate whose size [`tss_full_with_a0`](crate::estimator::tss_full_with_a0)
/// can reveal.
#[derive(Debug, Clone)]
pub struct SafeRegion {
    pub kind: SafeKind,
    /// `P(A_0)`.
    pub probability: f64,
    /// `P(A_*) = 1 - P(A_0)`, computed without cancellation where possible.
    pub prob_a_star: f64,
    /// Standard error of `probability`; zero when it is exact.
    pub std_error: f64,
    /// Set when a Monte Carlo probe saw only members or only non-members.
    pub degenerate: bool,
}

impl SafeRegion {
    pub fn empty() -> Self {
        Self { kind: SafeKind::Empty, probability: 0.0, prob_a_star: 1.0, std_error: 0.0, degenerate: false }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            SafeKind::Empty => false,
            SafeKind::GaussianBall { radius } => x.iter().map(|v| v * v).sum::<f64>() < radius * radius,
            SafeKind::Predicate(p) => p(x),
        }
    }
}

/// `A_0 = {|x|_2 < β}` for standard normal inputs.
pub fn null_stratum_from_design_point(beta: f64, d: usize) -> Result<SafeRegion> {
    if !(beta >= 0.0) || beta.is_infinite() {
        return domain(format!("β must be finite and non-negative, got {beta}"));
    }
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    Ok(SafeRegion {
        kind: SafeKind::GaussianBall { radius: beta },
        probability: chi_cdf(beta, d)?,
        prob_a_star: chi_sf(beta, d)?,
        std_error: 0.0,
        degenerate: false,
    })
}

/// Null stratum defined by a membership test. The caller guarantees that
/// `member(x)` implies `g(x) > 0`.
pub fn null_stratum_from_predicate(member: SafePredicate, method: ProbMethod) -> Result<SafeRegion> {
    match method {
        ProbMethod::Analytic(p) => {
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("P(A_0) must lie in [0, 1], got {p}"));
            }
            Ok(SafeRegion { kind: SafeKind::Predicate(member), probability: p, prob_a_star: 1.0 - p, std_error: 0.0, degenerate: false })
        }
        ProbMethod::Mcs { n_probe, model, stream } => {
            if n_probe == 0 {
                return domain("n_probe must be positive");
            }
            let mut rng = stream.rng();
            let mut x = vec![0.0; model.dim()];
            let mut hits = 0usize;
            for _ in 0..n_probe {
                model.sample_into(&mut rng, &mut x);
                if member(&x) {
                    hits += 1;
                }
            }
            let p = hits as f64 / n_probe as f64;
            Ok(SafeRegion {
                kind: SafeKind::Predicate(member),
                probability: p,
                prob_a_star: (n_probe - hits) as f64 / n_probe as f64,
                std_error: (p * (1.0 - p) / n_probe as f64).sqrt(),
                degenerate: hits == 0 || hits == n_probe,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_point_ball() {
        let s = null_stratum_from_design_point(3.0, 2).unwrap();
        assert!((s.probability - (1.0 - (-4.5f64).exp())).abs() < 1e-15);
        assert!((s.probability - 0.988891).abs() < 1e-6);
        assert!(s.contains(&[1.0, 1.0]) && !s.contains(&[3.0, 0.0]));
        let z = null_stratum_from_design_point(0.0, 5).unwrap();
        assert_eq!(z.probability, 0.0);
        assert_eq!(z.prob_a_star, 1.0);
        assert!(!z.contains(&[0.0; 5]));
    }

    #[test]
    fn high_dimension_ball_is_negligible() {
        let s = null_stratum_from_design_point(3.0, 1000).unwrap();
        assert!(s.probability < 1e-200);
        assert_eq!(s.prob_a_star, 1.0);
    }

    #[test]
    fn never_member_predicate() {
        let s = null_stratum_from_predicate(Arc::new(|_: &[f64]| false), ProbMethod::Analytic(0.0)).unwrap();
        assert_eq!(s.prob_a_star, 1.0);
        let probe = ProbMethod::Mcs { n_probe: 100, model: InputModel::StandardNormal { dim: 2 }, stream: RngStream::new(1, 0) };
        let s = null_stratum_from_predicate(Arc::new(|_: &[f64]| false), probe).unwrap();
        assert_eq!(s.probability, 0.0);
        assert!(s.degenerate);
    }

    #[test]
    fn ball_predicate_matches_closed_form() {
        let probe = ProbMethod::Mcs { n_probe: 200_000, model: InputModel::StandardNormal { dim: 3 }, stream: RngStream::new(5, 0) };
        let s = null_stratum_from_predicate(Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() < 4.0), probe).unwrap();
        let want = null_stratum_from_design_point(2.0, 3).unwrap().probability;
        assert!((s.probability - want).abs() < 4.0 * s.std_error);
        assert!(!s.degenerate);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(null_stratum_from_design_point(-1.0, 2).is_err());
        assert!(null_stratum_from_predicate(Arc::new(|_: &[f64]| true), ProbMethod::Analytic(1.5)).is_err());
    }
}
