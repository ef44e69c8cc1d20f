//! Design point (most probable failure point) search in standard normal space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_state::{Counted, PerformanceFunction};
use crate::probmath::{RngStream, StreamRng};

/// Relative shrink applied to `β` before it defines the null stratum, so the
/// design point itself is not claimed safe.
pub const BETA_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignPointOptions {
    /// Tolerance on `|g(u)| / |g(0)|`.
    pub tol_g: f64,
    /// Tolerance on the distance of `u` from the gradient direction.
    pub tol_step: f64,
    pub max_iter: usize,
    /// Central finite-difference step.
    pub fd_step: f64,
    pub n_starts: usize,
    /// Cap on each step length, relative to `max(|u|, 1)`; `None` lets the
    /// full HL-RF step through.
    pub max_step: Option<f64>,
}

impl Default for DesignPointOptions {
    fn default() -> Self {
        Self { tol_g: 1e-6, tol_step: 1e-6, max_iter: 2000, fd_step: 1e-5, n_starts: 16, max_step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPointResult {
    pub x_star: Vec<f64>,
    pub beta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub g_evals: u64,
}

impl DesignPointResult {
    /// Radius of the null stratum ball, `β (1 - 1e-6)`.
    pub fn safe_radius(&self) -> f64 {
        self.beta * (1.0 - BETA_SHRINK)
    }
}

struct Probe<'a, G: ?Sized> {
    g: &'a G,
    latent: StreamRng,
    evals: u64,
}

impl<G: PerformanceFunction + ?Sized> Probe<'_, G> {
    fn value(&mut self, u: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = self.g.eval(u, &mut self.latent);
        if v.is_nan() {
            return Err(Error::NanResponse(u.to_vec()));
        }
        Ok(v)
    }

    fn gradient(&mut self, u: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut x = u.to_vec();
        let mut grad = vec![0.0; u.len()];
        for j in 0..u.len() {
            x[j] = u[j] + h;
            let up = self.value(&x)?;
            x[j] = u[j] - h;
            let dn = self.value(&x)?;
            x[j] = u[j];
            grad[j] = (up - dn) / (2.0 * h);
        }
        Ok(grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Improved HL-RF iteration with an Armijo line search on the merit
/// function `½|u|² + c|g(u)|`, `c = 2 max(|u|, |u_HL|)/|∇g|`, optionally
/// with capped step lengths. Returns the best iterate with `converged = false` when
/// `max_iter` is exhausted.
pub fn find_design_point<G: PerformanceFunction + ?Sized>(
    g: &G,
    x0: &[f64],
    opts: &DesignPointOptions,
) -> Result<DesignPointResult> {
    let d = g.dim();
    if x0.len() != d {
        return Err(Error::Domain(format!("start point has {} coordinates, expected {d}", x0.len())));
    }
    let mut probe = Probe { g, latent: RngStream::new(0, 0).rng(), evals: 0 };
    let origin = vec![0.0; d];
    let g_origin = probe.value(&origin)?;
    if g_origin <= 0.0 {
        return Ok(DesignPointResult { x_star: origin, beta: 0.0, converged: true, iterations: 0, g_evals: probe.evals });
    }
    let scale = g_origin.abs();
    let mut u = x0.to_vec();
    let mut gu = probe.value(&u)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for it in 1..=opts.max_iter {
        let grad = probe.gradient(&u, opts.fd_step)?;
        let gn = norm(&grad);
        if !(gn > 0.0) {
            break;
        }
        let alpha: Vec<f64> = grad.iter().map(|v| -v / gn).collect();
        let au = dot(&alpha, &u);
        let off_axis = u.iter().zip(&alpha).map(|(ui, ai)| (ui - au * ai).powi(2)).sum::<f64>().sqrt();
        if gu.abs() / scale <= 10.0 * opts.tol_g {
            let b = norm(&u);
            if best.as_ref().is_none_or(|(bb, _)| b < *bb) {
                best = Some((b, u.clone()));
            }
        }
        if gu.abs() / scale <= opts.tol_g && off_axis <= opts.tol_step * norm(&u).max(1.0) {
            return Ok(DesignPointResult { beta: norm(&u), x_star: u, converged: true, iterations: it, g_evals: probe.evals });
        }
        // HL-RF target and search direction.
        let t = (dot(&grad, &u) - gu) / (gn * gn);
        let target: Vec<f64> = grad.iter().map(|v| t * v).collect();
        let mut dir: Vec<f64> = target.iter().zip(&u).map(|(a, b)| a - b).collect();
        if let Some(k) = opts.max_step {
            let reach = k * norm(&u).max(1.0);
            let len = norm(&dir);
            if len > reach {
                dir.iter_mut().for_each(|v| *v *= reach / len);
            }
        }
        let c = 2.0 * norm(&u).max(norm(&target)) / gn + 1e-12;
        let merit = |x: &[f64], gx: f64| 0.5 * dot(x, x) + c * gx.abs();
        let m0 = merit(&u, gu);
        let slope = dot(&u, &dir) + c * gu.signum() * dot(&grad, &dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let gt = match probe.value(&trial) {
                Ok(v) => v,
                Err(Error::NanResponse(_)) => {
                    step *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if merit(&trial, gt) <= m0 + 1e-4 * step * slope.min(0.0) {
                accepted = Some((trial, gt));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, gt)) => {
                u = trial;
                gu = gt;
            }
            None => break,
        }
    }
    let (beta, x_star) = best.unwrap_or_else(|| (norm(&u), u.clone()));
    Ok(DesignPointResult { x_star, beta, converged: false, iterations: opts.max_iter, g_evals: probe.evals })
}

/// Runs [`find_design_point`] from `opts.n_starts` random directions at
/// radius one and keeps the smallest converged `β`. Each start is run with
/// the full HL-RF step and again with steps capped at `max(|u|, 1)`, which
/// keeps the iterate from being thrown far out along flat stretches of `g`.
/// When nothing converges
/// the smallest unconverged candidate is returned with `converged = false`.
/// Starts that run into a NaN response are dropped; the error is returned
/// only when every start fails.
pub fn multi_start_design_point<G: PerformanceFunction + ?Sized>(
    g: &G,
    stream: &RngStream,
    opts: &DesignPointOptions,
) -> Result<DesignPointResult> {
    let d = g.dim();
    let counted = Counted::new(g);
    let g = &counted;
    let mut rng = stream.rng();
    let mut best: Option<DesignPointResult> = None;
    let mut nan_error = None;
    for _ in 0..opts.n_starts.max(1) {
        let mut x0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&x0).max(f64::MIN_POSITIVE);
        x0.iter_mut().for_each(|v| *v /= n);
        for cap in [opts.max_step, Some(opts.max_step.unwrap_or(1.0))] {
            let o = DesignPointOptions { max_step: cap, ..*opts };
            let r = match find_design_point(g, &x0, &o) {
                Ok(r) => r,
                Err(e @ Error::NanResponse(_)) => {
                    nan_error.get_or_insert(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if r.beta == 0.0 && r.converged {
                return Ok(DesignPointResult { g_evals: counted.calls(), ..r });
            }
            let better = match &best {
                None => true,
                Some(b) => (r.converged && !b.converged) || (r.converged == b.converged && r.beta < b.beta),
            };
            if better {
                best = Some(r);
            }
            if opts.max_step.is_some() {
                break;
            }
        }
    }
    let Some(mut best) = best else {
        return Err(nan_error.expect("every start failed"));
    };
    best.g_evals = counted.calls();
    Ok(best)
}

/// Indices of failure samples lying strictly inside the ball of radius
/// `β - tol`, which contradicts `β` being the distance to the failure set.
pub fn safe_region_violations<'a>(beta: f64, tol: f64, failures: impl IntoIterator<Item = &'a [f64]>) -> Vec<usize> {
    failures
        .into_iter()
        .enumerate()
        .filter(|(_, x)| norm(x) < beta - tol)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_state::FnPerformance;

    #[test]
    fn linear_limit_state() {
        let g = FnPerformance::new(2, |x: &[f64]| 3.0 - x[0]);
        let r = find_design_point(&g, &[0.1, 0.2], &DesignPointOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.beta - 3.0).abs() < 1e-6);
        assert!((r.x_star[0] - 3.0).abs() < 1e-6 && r.x_star[1].abs() < 1e-6);
        assert!((r.safe_radius() - 3.0 * (1.0 - 1e-6)).abs() < 1e-5);
    }

    #[test]
    fn oblique_linear_and_scale_invariance() {
        let a = [1.0, 2.0, -2.0];
        let c = 6.0;
        let want_beta = c / 3.0;
        for k in [1.0, 1000.0] {
            let g = FnPerformance::new(3, move |x: &[f64]| k * (c - dot(&a, x)));
            let r = multi_start_design_point(&g, &RngStream::new(1, 0), &DesignPointOptions::default()).unwrap();
            assert!(r.converged);
            assert!((r.beta - want_beta).abs() < 1e-6);
            for j in 0..3 {
                assert!((r.x_star[j] - c * a[j] / 9.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn failing_origin() {
        let g = FnPerformance::new(2, |_: &[f64]| -1.0);
        let r = find_design_point(&g, &[1.0, 0.0], &DesignPointOptions::default()).unwrap();
        assert_eq!(r.beta, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn nan_is_error() {
        let g = FnPerformance::new(2, |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 1.0 - x[0] });
        assert!(matches!(find_design_point(&g, &[0.0, 0.0], &DesignPointOptions::default()), Err(Error::NanResponse(_))));
    }

    #[test]
    fn sphere_all_starts_agree() {
        let g = FnPerformance::new(3, |x: &[f64]| 2.5 - norm(x));
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..5 {
            let x0: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let r = find_design_point(&g, &x0, &DesignPointOptions::default()).unwrap();
            assert!(r.converged && (r.beta - 2.5).abs() < 1e-6);
        }
    }

    #[test]
    fn violations_detected() {
        let pts = [vec![1.0, 0.0], vec![3.0, 0.0]];
        assert_eq!(safe_region_violations(2.0, 1e-9, pts.iter().map(|p| p.as_slice())), vec![0]);
    }

    proptest::proptest! {
        #[test]
        fn random_linear(a0 in -3.0f64..3.0, a1 in -3.0f64..3.0, c in 0.1f64..5.0) {
            proptest::prop_assume!(a0.abs() + a1.abs() > 0.1);
            let g = FnPerformance::new(2, move |x: &[f64]| c - a0 * x[0] - a1 * x[1]);
            let r = find_design_point(&g, &[0.3, -0.2], &DesignPointOptions::default()).unwrap();
            let want = c / (a0 * a0 + a1 * a1).sqrt();
            proptest::prop_assert!(r.converged);
            proptest::prop_assert!((r.beta - want).abs() < 1e-5 * want.max(1.0));
        }
    }
}
