//! Randomly shifted Kronecker (R_d) sequences on the unit cube.

use rand::Rng;

use super::rng::RngStream;

/// The unique positive root of `x^(d+1) = x + 1`.
fn generalized_golden(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// Low-discrepancy point generator with a Cranley-Patterson random shift.
#[derive(Debug, Clone)]
pub struct Kronecker {
    alpha: Vec<f64>,
    state: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize, stream: &RngStream) -> Self {
        let g = generalized_golden(dim);
        let alpha: Vec<f64> = (1..=dim).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
        let mut rng = stream.rng();
        let state = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { alpha, state }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Writes the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        for ((s, a), o) in self.state.iter_mut().zip(&self.alpha).zip(out.iter_mut()) {
            *o = *s;
            *s += a;
            if *s >= 1.0 {
                *s -= 1.0;
            }
        }
    }
}
