//! Two rigid bars on torsional springs coupled by a horizontal spring.

use crate::probmath::{beta_cdf_inv, std_normal_cdf};

const GRID: usize = 9;
const GRID_HALF_WIDTH: f64 = 0.5;
const DEDUP_TOL: f64 = 1e-6;
const MAX_ANGLE: f64 = 1.0;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ITERS: usize = 60;
/// Allowed tip rotation in radians.
pub const ROTATION_LIMIT: f64 = 0.2;
/// Rotation assumed when no stable equilibrium is found inside the search box.
pub const UNSTABLE_ROTATION: f64 = 0.5;

/// Loads, eccentricities and spring constants for one input realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarParams {
    pub p1: f64,
    pub p2: f64,
    pub e1: f64,
    pub e2: f64,
    pub k1: f64,
    pub k2: f64,
    pub kl: f64,
}

fn beta55(x: f64) -> f64 {
    let p = std_normal_cdf(x).clamp(0.0, 1.0);
    beta_cdf_inv(p, 5.0, 5.0).unwrap_or(if p < 0.5 { 0.0 } else { 1.0 })
}

impl BarParams {
    pub fn from_standard_normal(x: &[f64]) -> Self {
        Self {
            p1: 1.0 + 0.1 * (1.0 + 0.25 * x[0]).exp(),
            p2: 1.0 + 0.1 * (1.0 + 0.25 * x[1]).exp(),
            e1: 0.1 * (std_normal_cdf(x[2]) - 0.5),
            e2: 0.1 * (std_normal_cdf(x[3]) - 0.5),
            k1: 2.0 + 0.6 * (beta55(x[4]) - 0.5),
            k2: 2.0 + 0.6 * (beta55(x[5]) - 0.5),
            kl: 1.0 + 0.4 * (beta55(x[6]) - 0.5),
        }
    }

    /// Potential energy `V(θ1, θ2)`.
    pub fn potential(&self, t: [f64; 2]) -> f64 {
        let s = 0.5 * t[1].cos() * (t[1].tan() - t[0].tan());
        0.5 * self.k1 * t[0] * t[0] + 0.5 * self.k2 * t[1] * t[1] + 0.5 * self.kl * s * s
            - self.p1 * (1.0 - t[0].cos() + self.e1 * t[0].sin())
            - self.p2 * (1.0 - t[1].cos() + self.e2 * t[1].sin())
    }

    /// Gradient and Hessian of the potential.
    pub fn derivatives(&self, t: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (s1n, c1) = t[0].sin_cos();
        let (s2n, c2) = t[1].sin_cos();
        let tan1 = s1n / c1;
        let sec2 = 1.0 / (c1 * c1);
        let s = 0.5 * (s2n - c2 * tan1);
        let ds1 = -0.5 * c2 * sec2;
        let ds2 = 0.5 * (c2 + s2n * tan1);
        let ds11 = -c2 * sec2 * tan1;
        let ds12 = 0.5 * s2n * sec2;
        let ds22 = 0.5 * (c2 * tan1 - s2n);
        let grad = [
            self.k1 * t[0] + self.kl * s * ds1 - self.p1 * (s1n + self.e1 * c1),
            self.k2 * t[1] + self.kl * s * ds2 - self.p2 * (s2n + self.e2 * c2),
        ];
        let h11 = self.k1 + self.kl * (ds1 * ds1 + s * ds11) - self.p1 * (c1 - self.e1 * s1n);
        let h12 = self.kl * (ds1 * ds2 + s * ds12);
        let h22 = self.k2 + self.kl * (ds2 * ds2 + s * ds22) - self.p2 * (c2 - self.e2 * s2n);
        (grad, [[h11, h12], [h12, h22]])
    }

    fn newton(&self, start: [f64; 2]) -> Option<[f64; 2]> {
        let mut t = start;
        let (mut grad, mut h) = self.derivatives(t);
        let mut res = grad[0].hypot(grad[1]);
        for _ in 0..NEWTON_ITERS {
            if res < NEWTON_TOL {
                return Some(t);
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let step = [
                -(h[1][1] * grad[0] - h[0][1] * grad[1]) / det,
                -(h[0][0] * grad[1] - h[1][0] * grad[0]) / det,
            ];
            let mut lambda = 1.0;
            loop {
                let trial = [t[0] + lambda * step[0], t[1] + lambda * step[1]];
                if trial[0].abs() < 1.5 && trial[1].abs() < 1.5 {
                    let (g2, h2) = self.derivatives(trial);
                    let r2 = g2[0].hypot(g2[1]);
                    if r2 < res || lambda < 1e-3 {
                        t = trial;
                        grad = g2;
                        h = h2;
                        res = r2;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return None;
                }
            }
        }
        (res < NEWTON_TOL).then_some(t)
    }

    /// Every distinct stable equilibrium found by damped Newton started from
    /// a 9×9 grid on `[-0.5, 0.5]²`.
    pub fn stable_equilibria(&self) -> Vec<[f64; 2]> {
        let mut found: Vec<[f64; 2]> = Vec::new();
        for i in 0..GRID {
            for j in 0..GRID {
                let at = |k: usize| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * k as f64 / (GRID - 1) as f64;
                let Some(t) = self.newton([at(i), at(j)]) else { continue };
                if t[0].abs().max(t[1].abs()) > MAX_ANGLE {
                    continue;
                }
                let (_, h) = self.derivatives(t);
                let stable = h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0;
                if stable && !found.iter().any(|f| (f[0] - t[0]).abs().max((f[1] - t[1]).abs()) < DEDUP_TOL) {
                    found.push(t);
                }
            }
        }
        found
    }
}

/// Outcome of one buckling evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BucklingResponse {
    pub g: f64,
    pub equilibria: Vec<[f64; 2]>,
    /// No stable equilibrium was found; `g` then assumes a rotation of 0.5 rad.
    pub no_stable_solution: bool,
}

pub fn buckling_response(x: &[f64]) -> BucklingResponse {
    let eq = BarParams::from_standard_normal(x).stable_equilibria();
    let worst = eq.iter().map(|t| t[0].abs().max(t[1].abs())).fold(f64::NAN, f64::max);
    if eq.is_empty() {
        BucklingResponse { g: ROTATION_LIMIT - UNSTABLE_ROTATION, equilibria: eq, no_stable_solution: true }
    } else {
        BucklingResponse { g: ROTATION_LIMIT - worst, equilibria: eq, no_stable_solution: false }
    }
}

pub fn buckling(x: &[f64]) -> f64 {
    buckling_response(x).g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_parameters() {
        let p = BarParams::from_standard_normal(&[0.0; 7]);
        assert!((p.p1 - (1.0 + 0.1 * 1f64.exp())).abs() < 1e-15);
        assert_eq!(p.e1, 0.0);
        assert!((p.k1 - 2.0).abs() < 1e-12 && (p.kl - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = BarParams::from_standard_normal(&[0.3, -0.7, 1.1, -0.4, 0.2, 0.9, -1.3]);
        let t = [0.13, -0.21];
        let h = 1e-5;
        let (grad, hess) = p.derivatives(t);
        for k in 0..2 {
            let mut up = t;
            let mut dn = t;
            up[k] += h;
            dn[k] -= h;
            let fd = (p.potential(up) - p.potential(dn)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-8, "grad {k}");
            let (gu, _) = p.derivatives(up);
            let (gd, _) = p.derivatives(dn);
            for l in 0..2 {
                assert!(((gu[l] - gd[l]) / (2.0 * h) - hess[l][k]).abs() < 1e-7, "hess {l}{k}");
            }
        }
    }

    #[test]
    fn nominal_is_safe_with_a_near_zero_equilibrium() {
        let r = buckling_response(&[0.0; 7]);
        assert!(!r.no_stable_solution);
        assert!(r.equilibria.iter().any(|t| t[0].abs() < 1e-9 && t[1].abs() < 1e-9));
        assert!(r.g > 0.0);
    }

    #[test]
    fn heavy_load_fails() {
        let r = buckling_response(&[6.0, 6.0, 2.0, 2.0, -2.0, -2.0, 0.0]);
        assert!(r.g <= 0.0, "{r:?}");
    }

    #[test]
    fn pure() {
        let x = [1.2, -0.3, 0.5, 0.1, -1.0, 0.4, 2.0];
        assert_eq!(buckling(&x).to_bits(), buckling(&x).to_bits());
    }
}
