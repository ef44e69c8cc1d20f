//! Input probability models and a flat point container.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::probmath::LN_SQRT_2PI;

/// Row-major set of points in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self { dim, coords: Vec::with_capacity(dim * n) }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn extend(&mut self, other: &PointSet) {
        debug_assert_eq!(self.dim, other.dim);
        self.coords.extend_from_slice(&other.coords);
    }
}

/// Independent input distributions with closed-form densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputModel {
    /// `d` independent standard normals.
    StandardNormal { dim: usize },
    /// `d` independent uniforms on `[-1, 1]`.
    UniformCube { dim: usize },
}

impl InputModel {
    pub fn dim(&self) -> usize {
        match *self {
            InputModel::StandardNormal { dim } | InputModel::UniformCube { dim } => dim,
        }
    }

    /// Log of the joint density; `-inf` outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match *self {
            InputModel::StandardNormal { dim } => {
                -0.5 * x.iter().map(|v| v * v).sum::<f64>() - dim as f64 * LN_SQRT_2PI
            }
            InputModel::UniformCube { dim } => {
                if x.iter().all(|v| (-1.0..=1.0).contains(v)) {
                    -(dim as f64) * std::f64::consts::LN_2
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InputModel::StandardNormal { .. } => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            InputModel::UniformCube { .. } => {
                for v in out.iter_mut() {
                    *v = rng.random_range(-1.0..=1.0);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> PointSet {
        let d = self.dim();
        let mut pts = PointSet { dim: d, coords: vec![0.0; n * d] };
        for chunk in pts.coords.chunks_exact_mut(d) {
            self.sample_into(rng, chunk);
        }
        pts
    }
}
