//! Linear single-degree-of-freedom oscillator under discretized white noise.

use serde::{Deserialize, Serialize};

pub const OMEGA: f64 = 7.85;
pub const ZETA: f64 = 0.02;
pub const DT: f64 = 0.1;
pub const DIM: usize = 100;

/// How the damping coefficient of `ü + c u̇ + ω² u = W` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingConvention {
    /// `c = 2ζ`.
    #[default]
    AsPrinted,
    /// `c = 2ζω`.
    Standard,
}

impl std::str::FromStr for DampingConvention {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "standard" => Ok(Self::Standard),
            _ => Err(crate::Error::Config(format!("unknown damping convention {s:?}"))),
        }
    }
}

/// Exceedance of `|u| > b` within `dim` steps of length `dt`.
///
/// The oscillator starts at rest at `t_1`; forcing `x_j` is held constant on
/// `[t_j, t_{j+1})` and the response is observed at `t_1, ..., t_d`, so the
/// last coordinate acts beyond the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sdof {
    pub b: f64,
    pub dim: usize,
    pub dt: f64,
    pub damping: DampingConvention,
}

impl Default for Sdof {
    fn default() -> Self {
        Self { b: 0.26, dim: DIM, dt: DT, damping: DampingConvention::AsPrinted }
    }
}

/// Exact state transition over one step of constant forcing.
#[derive(Debug, Clone, Copy)]
struct Transition {
    phi: [[f64; 2]; 2],
    inv_k: f64,
}

impl Transition {
    fn new(omega: f64, c: f64, dt: f64) -> Self {
        let a = 0.5 * c;
        let wd = (omega * omega - a * a).sqrt();
        let e = (-a * dt).exp();
        let (s, co) = (wd * dt).sin_cos();
        let phi = [
            [e * (co + a / wd * s), e * s / wd],
            [-e * omega * omega / wd * s, e * (co - a / wd * s)],
        ];
        Self { phi, inv_k: 1.0 / (omega * omega) }
    }

    fn step(&self, u: f64, v: f64, f: f64) -> (f64, f64) {
        let us = f * self.inv_k;
        let du = u - us;
        (us + self.phi[0][0] * du + self.phi[0][1] * v, self.phi[1][0] * du + self.phi[1][1] * v)
    }
}

impl Sdof {
    pub fn damping_coefficient(&self) -> f64 {
        match self.damping {
            DampingConvention::AsPrinted => 2.0 * ZETA,
            DampingConvention::Standard => 2.0 * ZETA * OMEGA,
        }
    }

    /// Displacements `u(t_1), ..., u(t_d)`.
    pub fn response(&self, x: &[f64]) -> Vec<f64> {
        let tr = Transition::new(OMEGA, self.damping_coefficient(), self.dt);
        let mut out = Vec::with_capacity(self.dim);
        let (mut u, mut v) = (0.0, 0.0);
        out.push(u);
        for &f in &x[..self.dim.saturating_sub(1)] {
            (u, v) = tr.step(u, v, f);
            out.push(u);
        }
        out
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        let tr = Transition::new(OMEGA, self.damping_coefficient(), self.dt);
        let (mut u, mut v) = (0.0f64, 0.0);
        let mut peak = 0.0f64;
        for &f in &x[..self.dim.saturating_sub(1)] {
            (u, v) = tr.step(u, v, f);
            peak = peak.max(u.abs());
        }
        self.b - peak
    }
}
