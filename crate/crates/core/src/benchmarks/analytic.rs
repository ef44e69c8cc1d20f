//! Two-dimensional analytical performance functions.

use std::f64::consts::{PI, SQRT_2};

use crate::probmath::std_normal_sf;

pub fn wavy_circle(x: &[f64]) -> f64 {
    let theta = if x[0] == 0.0 && x[1] == 0.0 { 0.0 } else { x[1].atan2(x[0]) };
    4.0 + (7.0 * theta).sin() - x[0].hypot(x[1])
}

pub fn wavy_line(x: &[f64]) -> f64 {
    5.5 + (5.0 * x[0]).sin() - 0.25 * x[0] - x[1]
}

pub fn alternating_domains(x: &[f64]) -> f64 {
    (x[0] * (-x[0] - 4.0).exp()).cos()
}

pub fn four_branch(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let q = 3.0 + 0.1 * (a - b).powi(2);
    let s = 0.5 * SQRT_2 * (a + b);
    (q - s).min(q + s).min(a - b + 3.5 * SQRT_2).min(b - a + 3.5 * SQRT_2)
}

pub fn metaball(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let e1 = 4.0 * (a + 2.0).powi(2) / 9.0 + b * b / 25.0;
    let e2 = (a - 2.5).powi(2) / 4.0 + (b - 0.5).powi(2) / 25.0;
    30.0 / (e1 * e1 + 1.0) + 20.0 / (e2 * e2 + 1.0) - 5.0
}

pub fn black_swan(x: &[f64]) -> f64 {
    if x[0] <= 2.0 {
        5.0 - x[0]
    } else {
        5.0 - x[1]
    }
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 - x[..2].iter().map(|v| v * v - 5.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

/// Exact Black Swan failure probability `P(X1 > 2) P(X2 >= 5)`.
pub fn black_swan_exact() -> f64 {
    std_normal_sf(2.0) * std_normal_sf(5.0)
}

/// Black Swan mass of the failure set lying beyond radius `r`, i.e. the part a
/// truncated stratification at `r` never sees. Computed by quadrature over
/// `x1 > 2` of `φ(x1) P(X2 >= max(5, sqrt(r² - x1²)))`.
pub fn black_swan_mass_beyond(r: f64) -> f64 {
    use crate::probmath::std_normal_pdf;
    let f = |x1: f64| {
        let lim = if r > x1 { (r * r - x1 * x1).sqrt().max(5.0) } else { 5.0 };
        std_normal_pdf(x1) * std_normal_sf(lim)
    };
    // Composite Simpson on [2, 2 + 14]; the integrand is below 1e-40 beyond.
    let (a, b, n) = (2.0, 16.0, 20_000);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}
