//! Performance functions `g(x)`, where `g(x) <= 0` denotes failure.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::probmath::StreamRng;

/// A scalar system response. Stochastic responses draw their latent
/// randomness from the generator passed to [`eval`](Self::eval); deterministic
/// ones ignore it.
pub trait PerformanceFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64;

    fn is_stochastic(&self) -> bool {
        false
    }
}

impl<T: PerformanceFunction + ?Sized> PerformanceFunction for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64 {
        (**self).eval(x, latent)
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
}

impl<T: PerformanceFunction + ?Sized> PerformanceFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64 {
        (**self).eval(x, latent)
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
}

/// Deterministic performance function from a closure.
pub struct FnPerformance<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnPerformance<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> PerformanceFunction for FnPerformance<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], _latent: &mut StreamRng) -> f64 {
        (self.f)(x)
    }
}

/// Wrapper that counts every evaluation of the inner function.
pub struct Counted<G> {
    inner: G,
    calls: AtomicU64,
}

impl<G: PerformanceFunction> Counted<G> {
    pub fn new(inner: G) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> G {
        self.inner
    }
}

impl<G: PerformanceFunction> PerformanceFunction for Counted<G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x, latent)
    }
    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }
}

/// Failure indicator `I{g(x) <= 0}`; a NaN response is a hard error.
pub fn fails<G: PerformanceFunction + ?Sized>(g: &G, x: &[f64], latent: &mut StreamRng) -> Result<bool> {
    let v = g.eval(x, latent);
    if v.is_nan() {
        return Err(Error::NanResponse(x.to_vec()));
    }
    Ok(v <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmath::RngStream;

    #[test]
    fn counts_calls() {
        let g = Counted::new(FnPerformance::new(1, |x: &[f64]| 1.0 - x[0]));
        let mut r = RngStream::new(0, 0).rng();
        assert!(!fails(&g, &[0.0], &mut r).unwrap());
        assert!(fails(&g, &[2.0], &mut r).unwrap());
        assert_eq!(g.calls(), 2);
    }

    #[test]
    fn nan_is_error() {
        let g = FnPerformance::new(1, |_: &[f64]| f64::NAN);
        let mut r = RngStream::new(0, 0).rng();
        assert!(matches!(fails(&g, &[0.5], &mut r), Err(Error::NanResponse(_))));
    }
}
