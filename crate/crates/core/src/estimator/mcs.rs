use super::{EstimatorKind, FailureEstimate};
use crate::error::{domain, Result};
use crate::limit_state::{fails, PerformanceFunction};
use crate::model::InputModel;
use crate::probmath::{latin_hypercube_with, std_normal_cdf_inv, RngStream, StreamRng};
use crate::sampling::DesignScheme;

/// Substream label for latent randomness of stochastic performance functions.
pub(crate) const LATENT_LABEL: u64 = 0x001a_7e57;

/// Plain Monte Carlo: `p̂ = mean I(g <= 0)`, `var = p̂(1 - p̂)/N`.
///
/// Under LHS each coordinate is a Latin column mapped through the marginal
/// inverse CDF; the reported variance is still the i.i.d. formula.
pub fn mcs_estimate<G: PerformanceFunction + ?Sized>(
    g: &G,
    model: &InputModel,
    n: usize,
    stream: &RngStream,
    scheme: DesignScheme,
) -> Result<FailureEstimate> {
    if n == 0 {
        return domain("MCS needs at least one sample");
    }
    let d = model.dim();
    let mut rng = stream.rng();
    let mut latent = stream.substream(LATENT_LABEL).rng();
    let mut hits = 0u64;
    let mut x = vec![0.0; d];
    match scheme {
        DesignScheme::Mcs => {
            for _ in 0..n {
                model.sample_into(&mut rng, &mut x);
                hits += fails(g, &x, &mut latent)? as u64;
            }
        }
        DesignScheme::Lhs => {
            let design = latin_hypercube_with(n, d, &mut rng);
            for k in 0..n {
                for (xj, &u) in x.iter_mut().zip(design.row(k)) {
                    *xj = match model {
                        InputModel::StandardNormal { .. } => std_normal_cdf_inv(u.max(f64::MIN_POSITIVE))?,
                        InputModel::UniformCube { .. } => 2.0 * u - 1.0,
                    };
                }
                hits += fails(g, &x, &mut latent)? as u64;
            }
        }
    }
    let p = hits as f64 / n as f64;
    Ok(FailureEstimate::new(p, p * (1.0 - p) / n as f64, 0.0, n as u64, EstimatorKind::Mcs))
}

/// Importance sampling with weights `w = f/q`: `p̂ = mean(w I)` and the
/// sample variance of `w I` over `N`. The estimate is flagged degenerate when
/// the effective sample size of the nonzero terms, `(Σ wI)² / Σ (wI)²`, is
/// below 10.
pub fn importance_estimate<G: PerformanceFunction + ?Sized>(
    g: &G,
    log_f: impl Fn(&[f64]) -> f64,
    log_q: impl Fn(&[f64]) -> f64,
    mut q_sampler: impl FnMut(&mut StreamRng, &mut [f64]),
    n: usize,
    stream: &RngStream,
) -> Result<FailureEstimate> {
    if n < 2 {
        return domain("importance sampling needs at least two samples");
    }
    let mut rng = stream.rng();
    let mut latent = stream.substream(LATENT_LABEL).rng();
    let mut x = vec![0.0; g.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        q_sampler(&mut rng, &mut x);
        let lq = log_q(&x);
        if !lq.is_finite() {
            return domain("q sampler produced a point outside the support of q");
        }
        let t = if fails(g, &x, &mut latent)? { (log_f(&x) - lq).exp() } else { 0.0 };
        sum += t;
        sum_sq += t * t;
    }
    let nf = n as f64;
    let p = sum / nf;
    let var_terms = ((sum_sq - nf * p * p) / (nf - 1.0)).max(0.0);
    let mut est = FailureEstimate::new(p, var_terms / nf, 0.0, n as u64, EstimatorKind::Importance);
    let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
    est.degenerate = ess < 10.0;
    Ok(est)
}
