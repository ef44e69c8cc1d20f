use rand::seq::SliceRandom;
use rand::Rng;

use super::rng::RngStream;

/// `n × k` design on the unit hypercube, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitHypercubeDesign {
    pub n: usize,
    pub k: usize,
    pub points: Vec<f64>,
}

impl UnitHypercubeDesign {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.points[i * self.k + j])
    }
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Latin hypercube design: every column places exactly one point in each of
/// the `n` bins `[j/n, (j+1)/n)`, jittered uniformly within its bin.
pub fn latin_hypercube(n: usize, k: usize, stream: &RngStream) -> UnitHypercubeDesign {
    let mut rng = stream.rng();
    latin_hypercube_with(n, k, &mut rng)
}

pub fn latin_hypercube_with<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> UnitHypercubeDesign {
    let mut points = vec![0.0; n * k];
    let mut perm: Vec<usize> = (0..n).collect();
    let inv_n = 1.0 / n as f64;
    for j in 0..k {
        perm.shuffle(rng);
        for (i, &bin) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let v = ((bin as f64 + u) * inv_n).min(BELOW_ONE);
            // Rounding can nudge a point just below its bin's left edge.
            points[i * k + j] = v.max(bin as f64 * inv_n);
        }
    }
    UnitHypercubeDesign { n, k, points }
}
