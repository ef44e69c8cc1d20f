//! Browser bindings: strata geometry, a TSS sample scatter and a TSS vs
//! Monte Carlo comparison on the two-dimensional benchmarks.

use serde::Serialize;
use tailstrat::benchmarks::{by_name, Benchmark, ANALYTIC_2D};
use tailstrat::estimator::{allocate, AllocationStrategy};
use tailstrat::harness::{EstimatorSpec, Experiment, ExperimentConfig, Summary, TssSpec};
use tailstrat::limit_state::PerformanceFunction;
use tailstrat::probmath::RngStream;
use tailstrat::sampling::{allocated_samples, DesignScheme};
use tailstrat::stratification::build_gaussian_radial;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct StrataInfo {
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
    pub prob_a_star: f64,
    pub bias_bound: f64,
}

#[derive(Debug, Serialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub stratum: usize,
    pub failed: bool,
}

#[derive(Debug, Serialize)]
pub struct Scatter {
    pub beta: f64,
    pub radii: Vec<f64>,
    pub points: Vec<ScatterPoint>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub tss: Summary,
    pub mcs: Summary,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn planar(name: &str) -> Result<Benchmark, String> {
    if !ANALYTIC_2D.contains(&name) {
        return Err(format!("'{name}' is not one of {}", ANALYTIC_2D.join(", ")));
    }
    by_name(name).map_err(err)
}

fn tss_spec(p0: f64, m: usize, lhs: bool) -> TssSpec {
    TssSpec { p0, m, scheme: if lhs { DesignScheme::Lhs } else { DesignScheme::Mcs }, ..TssSpec::default() }
}

/// Radii and probabilities of Gaussian radial strata.
pub fn strata_info(d: usize, r0: f64, p0: f64, m: usize) -> Result<StrataInfo, String> {
    let s = build_gaussian_radial(d, r0, p0, m, false).map_err(err)?;
    let radii = (1..=m).map(|i| s.shell(i).map(|(_, hi)| hi).unwrap_or(f64::INFINITY)).collect();
    Ok(StrataInfo { radii, probs: s.strata_probs.clone(), prob_a_star: s.prob_a_star, bias_bound: s.bias_bound() })
}

/// One TSS draw of `n` proportionally allocated points on a 2-D benchmark.
pub fn tss_scatter(name: &str, p0: f64, m: usize, n: usize, seed: u64) -> Result<Scatter, String> {
    let bench = planar(name)?;
    let cfg = ExperimentConfig::new(bench, EstimatorSpec::Tss(tss_spec(p0, m, false)), n, 1, seed);
    let exp = Experiment::new(cfg).map_err(err)?;
    let strat = exp.stratification().expect("tss experiment");
    let counts = allocate(&AllocationStrategy::Proportional, strat, n).map_err(err)?;
    let samples = allocated_samples(strat, &counts, &RngStream::new(seed, 0), DesignScheme::Mcs).map_err(err)?;
    let mut latent = RngStream::new(seed, 1).rng();
    let mut points = Vec::with_capacity(n);
    for (i, group) in samples.groups.iter().enumerate() {
        for p in group.iter() {
            points.push(ScatterPoint { x: p[0], y: p[1], stratum: i + 1, failed: bench.eval(p, &mut latent) <= 0.0 });
        }
    }
    let radii = (0..=m).map(|i| if i == 0 { strat.shell(1).unwrap().0 } else { strat.shell(i).unwrap().1 }).collect();
    Ok(Scatter { beta: exp.beta.unwrap_or(0.0), radii, points })
}

/// TSS and plain Monte Carlo over `trials` trials at the same budget.
pub fn compare(name: &str, p0: f64, m: usize, n: usize, trials: usize, lhs: bool, seed: u64) -> Result<Comparison, String> {
    let bench = planar(name)?;
    let run = |est| -> Result<Summary, String> {
        let exp = Experiment::new(ExperimentConfig::new(bench, est, n, trials, seed)).map_err(err)?;
        Ok(exp.run_n(n).map_err(err)?.summary)
    };
    let scheme = if lhs { DesignScheme::Lhs } else { DesignScheme::Mcs };
    Ok(Comparison { tss: run(EstimatorSpec::Tss(tss_spec(p0, m, lhs)))?, mcs: run(EstimatorSpec::Mcs { scheme })? })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e)).and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

#[wasm_bindgen(js_name = strataInfo)]
pub fn strata_info_js(d: usize, r0: f64, p0: f64, m: usize) -> Result<String, JsError> {
    to_js(strata_info(d, r0, p0, m))
}

#[wasm_bindgen(js_name = tssScatter)]
pub fn tss_scatter_js(name: &str, p0: f64, m: usize, n: usize, seed: u32) -> Result<String, JsError> {
    to_js(tss_scatter(name, p0, m, n, seed as u64))
}

#[wasm_bindgen(js_name = compare)]
pub fn compare_js(name: &str, p0: f64, m: usize, n: usize, trials: usize, lhs: bool, seed: u32) -> Result<String, JsError> {
    to_js(compare(name, p0, m, n, trials, lhs, seed as u64))
}

#[wasm_bindgen(js_name = benchmarkNames)]
pub fn benchmark_names() -> Vec<String> {
    ANALYTIC_2D.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strata_radii_grow() {
        let s = strata_info(2, 3.0, 0.1, 4).unwrap();
        assert_eq!(s.radii.len(), 4);
        assert!(s.radii.windows(2).all(|w| w[0] < w[1]));
        assert!((s.probs.iter().sum::<f64>() + s.bias_bound - s.prob_a_star).abs() < 1e-15);
    }

    #[test]
    fn scatter_points_lie_in_their_shells() {
        let s = tss_scatter("four_branch", 0.1, 3, 300, 4).unwrap();
        assert_eq!(s.points.len(), 300);
        for p in &s.points {
            let r = p.x.hypot(p.y);
            assert!(r > s.radii[p.stratum - 1] && r <= s.radii[p.stratum]);
        }
        assert!(s.points.iter().any(|p| p.failed));
    }

    #[test]
    fn compare_runs_both_estimators() {
        let c = compare("rastrigin", 0.1, 4, 500, 5, true, 1).unwrap();
        assert_eq!(c.tss.trials, 5);
        assert_eq!(c.mcs.n, 500);
        assert!(compare("buckling", 0.1, 4, 500, 5, false, 1).is_err());
    }
}
