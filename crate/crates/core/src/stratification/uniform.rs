use serde::{Deserialize, Serialize};

use super::{check_common, geometric_probs, Scheme, TailStratification};
use crate::error::{domain, Error, Result};
use crate::probmath::qmc::Kronecker;
use crate::probmath::{unit_ball_volume, RngStream};

/// Order of the norm defining uniform strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormOrder {
    L1,
    L2,
    Linf,
}

impl NormOrder {
    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => x.iter().map(|v| v.abs()).sum(),
            NormOrder::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormOrder::Linf => x.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    /// Largest norm attained on `[-1, 1]^d`.
    pub fn lambda_max(&self, d: usize) -> f64 {
        match self {
            NormOrder::L1 => d as f64,
            NormOrder::L2 => (d as f64).sqrt(),
            NormOrder::Linf => 1.0,
        }
    }
}

impl std::str::FromStr for NormOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(NormOrder::L1),
            "2" | "l2" => Ok(NormOrder::L2),
            "inf" | "linf" => Ok(NormOrder::Linf),
            _ => Err(Error::Config(format!("unknown norm order '{s}'"))),
        }
    }
}

/// Settings for the volume computations behind uniform strata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VolumeOptions {
    /// Absolute tolerance on thresholds found by bisection.
    pub tolerance: f64,
    /// Number of quasi-random points when no closed form applies.
    pub qmc_points: usize,
    pub seed: u64,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, qmc_points: 10_000_000, seed: 0x7a11 }
    }
}

/// Largest dimension for which the Irwin-Hall sum is used directly.
const IRWIN_HALL_MAX_DIM: usize = 16;

fn has_closed_form(d: usize, norm: NormOrder, lambda: f64) -> bool {
    match norm {
        NormOrder::Linf => true,
        NormOrder::L1 => d <= IRWIN_HALL_MAX_DIM,
        NormOrder::L2 => d == 1 || lambda <= 1.0 || d == 2,
    }
}

/// `P(sum of d iid U(0,1) <= x)`.
fn irwin_hall_cdf(x: f64, d: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= d as f64 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut k = 0usize;
    while k as f64 <= x.floor() && k <= d {
        let term = binom * (x - k as f64).powi(d as i32);
        sum += if k.is_multiple_of(2) { term } else { -term };
        binom = binom * (d - k) as f64 / (k + 1) as f64;
        k += 1;
    }
    let fact: f64 = (1..=d).map(|v| v as f64).product();
    (sum / fact).clamp(0.0, 1.0)
}

/// Area of `{v in [0,1]^2 : |v| <= λ}`.
fn quarter_disk_in_square(lambda: f64) -> f64 {
    use std::f64::consts::FRAC_PI_4;
    if lambda <= 1.0 {
        return FRAC_PI_4 * lambda * lambda;
    }
    if lambda * lambda >= 2.0 {
        return 1.0;
    }
    let l2 = lambda * lambda;
    let a = (l2 - 1.0).sqrt();
    let upper = 0.5 * (a + l2 * (1.0 / lambda).asin());
    let lower = 0.5 * (a + l2 * (a / lambda).asin());
    a + upper - lower
}

fn closed_form_tail(d: usize, norm: NormOrder, lambda: f64) -> f64 {
    let lmax = norm.lambda_max(d);
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda >= lmax {
        return 0.0;
    }
    if d == 1 {
        return 1.0 - lambda;
    }
    match norm {
        NormOrder::Linf => -(d as f64 * lambda.ln()).exp_m1(),
        NormOrder::L1 => {
            let half = d as f64 / 2.0;
            if lambda > half {
                irwin_hall_cdf(d as f64 - lambda, d)
            } else {
                1.0 - irwin_hall_cdf(lambda, d)
            }
        }
        NormOrder::L2 => {
            if lambda <= 1.0 {
                let ln_frac = unit_ball_volume(d).ln() + d as f64 * (lambda / 2.0).ln();
                -ln_frac.exp_m1()
            } else {
                1.0 - quarter_disk_in_square(lambda)
            }
        }
    }
}

/// Sorted norms of a quasi-random point set on `[0,1]^d`.
fn qmc_sorted_norms(d: usize, norm: NormOrder, opts: &VolumeOptions) -> Vec<f64> {
    let mut seq = Kronecker::new(d, &RngStream::new(opts.seed, 0));
    let mut buf = vec![0.0; d];
    let mut norms: Vec<f64> = (0..opts.qmc_points)
        .map(|_| {
            seq.next_into(&mut buf);
            norm.norm(&buf)
        })
        .collect();
    norms.sort_by(f64::total_cmp);
    norms
}

fn sorted_tail(sorted: &[f64], lambda: f64) -> f64 {
    let above = sorted.len() - sorted.partition_point(|&v| v <= lambda);
    above as f64 / sorted.len() as f64
}

/// Fraction of `[-1, 1]^d` with norm strictly greater than `λ`.
///
/// Closed forms cover `ℓ∞`, `ℓ1` up to 16 dimensions, the `ℓ2` ball while it
/// stays inside the cube, and the square. Other cases use a seeded
/// quasi-Monte Carlo estimate.
pub fn uniform_tail_fraction(d: usize, norm: NormOrder, lambda: f64, opts: &VolumeOptions) -> Result<f64> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    if lambda.is_nan() {
        return domain("threshold is NaN");
    }
    if has_closed_form(d, norm, lambda) || lambda <= 0.0 || lambda >= norm.lambda_max(d) {
        return Ok(closed_form_tail(d, norm, lambda));
    }
    if opts.qmc_points == 0 {
        return domain("qmc_points must be positive");
    }
    Ok(sorted_tail(&qmc_sorted_norms(d, norm, opts), lambda))
}

fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    // f is non-increasing in λ; find λ with f(λ) = target.
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    let residual = (f(lam) - target).abs();
    if hi - lo > tol.max(4.0 * f64::EPSILON * hi) || residual > 1e-6 * target.max(1e-300) + 1e-13 {
        return Err(Error::NoConvergence { what: "uniform stratum volume", residual });
    }
    Ok(lam)
}

/// Norm shells `λ_(i-1) < |x|_p <= λ_i` on the cube `[-1, 1]^d` with
/// `A_0 = {|x|_p < λ_0}`.
pub fn build_uniform_norm(
    d: usize,
    norm: NormOrder,
    lambda0: f64,
    p0: f64,
    m: usize,
    unbiased_tail: bool,
    opts: &VolumeOptions,
) -> Result<TailStratification> {
    check_common(d, p0, m)?;
    let lmax = norm.lambda_max(d);
    if !(lambda0 >= 0.0 && lambda0 < lmax) {
        return domain(format!("λ0 must lie in [0, {lmax}), got {lambda0}"));
    }
    let n_outer = if unbiased_tail { m - 1 } else { m };
    let needs_qmc = !has_closed_form(d, norm, lmax * (1.0 - 1e-12));
    let mut thresholds = vec![lambda0];

    let tail0 = if needs_qmc {
        let sorted = qmc_sorted_norms(d, norm, opts);
        let tail0 = if has_closed_form(d, norm, lambda0) {
            closed_form_tail(d, norm, lambda0)
        } else {
            sorted_tail(&sorted, lambda0)
        };
        let n = sorted.len();
        let mut target = tail0;
        for _ in 0..n_outer {
            target *= p0;
            let above = (target * n as f64).round() as usize;
            if above < 1 || above >= n {
                return Err(Error::NoConvergence {
                    what: "uniform stratum volume (raise qmc_points)",
                    residual: target,
                });
            }
            let lam = 0.5 * (sorted[n - above - 1] + sorted[n - above]);
            thresholds.push(lam);
        }
        tail0
    } else {
        let tail0 = closed_form_tail(d, norm, lambda0);
        let mut target = tail0;
        for _ in 0..n_outer {
            target *= p0;
            let lo = *thresholds.last().unwrap();
            let lam = bisect(|l| closed_form_tail(d, norm, l), target, lo, lmax, opts.tolerance)?;
            thresholds.push(lam);
        }
        tail0
    };

    if unbiased_tail {
        thresholds.push(lmax);
    }
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("norm thresholds not strictly increasing; reduce m or raise p0");
    }
    if tail0 <= 0.0 {
        return domain("P(A_*) is zero");
    }
    Ok(TailStratification {
        scheme: Scheme::UniformNorm { norm, thresholds },
        d,
        p0,
        m,
        prob_a_star: tail0,
        strata_probs: geometric_probs(p0, m, tail0, unbiased_tail),
        unbiased_tail,
    })
}
