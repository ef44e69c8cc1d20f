//! Seeded multi-trial experiments, aggregate statistics and studies.

mod config;
mod studies;

pub use config::{Budget, EstimatorSpec, ExperimentConfig, NullSpec, TssSpec};
pub use studies::{
    bias_study, convergence_study, log_log_slope, matched_budget, tss_with, BiasRow, ConvergenceFit, ConvergenceRow, MatchedComparison,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{Benchmark, CableTailSampler};
use crate::designpoint::{multi_start_design_point, DesignPointResult};
use crate::error::{Error, Result};
use crate::estimator::{allocate, mcs_estimate, tss_estimate, tss_from_samples, FailureEstimate};
use crate::limit_state::PerformanceFunction;
use crate::probmath::RngStream;
use crate::sampling::allocated_by_key;
use crate::stratification::{
    build_gaussian_radial, empirical_stratify, null_stratum_from_design_point, SafeRegion, TailStratification,
};
use crate::sus::subset_simulation;

/// Environment variable capping the number of worker threads for trials.
pub const WORKERS_ENV: &str = "TSS_WORKERS";

const SETUP_STREAM: u64 = u64::MAX;
const DESIGN_POINT_LABEL: u64 = 0xd9;
const BUILD_LABEL: u64 = 0xb1;

/// Where the null-stratum radius came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    DesignPoint,
    /// The design-point search did not converge; the registry value was used.
    Registry,
    Config,
}

enum Plan {
    Radial { strat: TailStratification, safe: SafeRegion },
    CableArea { strat: TailStratification, sampler: CableTailSampler },
    Sus(crate::sus::SusOptions),
    Mcs(crate::sampling::DesignScheme),
}

/// A validated configuration with its one-off setup (design point, strata)
/// done.
pub struct Experiment {
    pub config: ExperimentConfig,
    plan: Plan,
    pub design_point: Option<DesignPointResult>,
    pub beta: Option<f64>,
    pub beta_source: Option<BetaSource>,
    /// Performance-function calls spent on setup, shared by all trials.
    pub setup_g_evals: u64,
}

/// One trial, as written to the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub p_hat: f64,
    pub var_hat: f64,
    pub cov: Option<f64>,
    pub bias_bound: f64,
    pub n_g_evals: u64,
    pub seed: u64,
    pub n: usize,
    pub degenerate: bool,
}

/// Aggregate over the trials of one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub estimator: String,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    /// Empirical CoV over trials, `std / mean`.
    pub cov: Option<f64>,
    pub p25: f64,
    pub p75: f64,
    pub mean_bias_bound: f64,
    pub mean_n_g_evals: f64,
    pub zero_trials: usize,
    pub degenerate_trials: usize,
    pub setup_g_evals: u64,
    /// Every performance-function call of the run, setup included.
    pub total_g_evals: u64,
    pub beta: Option<f64>,
    pub beta_source: Option<BetaSource>,
    pub reference_pf: Option<f64>,
    pub reference_source: Option<String>,
}

impl Summary {
    /// `(mean - reference) / (std / √R)`.
    pub fn z_score(&self) -> Option<f64> {
        let r = self.reference_pf?;
        let se = self.std / (self.trials as f64).sqrt();
        (se > 0.0).then(|| (self.mean - r) / se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&k| k > 0)
}

/// Maps `f` over `0..count`, in parallel when enabled, returning results in
/// index order.
pub(crate) fn map_trials<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || (0..count).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
        match worker_count() {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                .install(run),
            None => run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = worker_count();
        (0..count).map(f).collect()
    }
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let bench = config.benchmark;
        let d = bench.dim();
        let setup = RngStream::new(config.seed, SETUP_STREAM);
        let mut design_point = None;
        let mut beta = None;
        let mut beta_source = None;
        let mut setup_g_evals = 0;
        let plan = match &config.estimator {
            EstimatorSpec::Tss(t) | EstimatorSpec::TssUnbiased(t) => {
                let unbiased = matches!(config.estimator, EstimatorSpec::TssUnbiased(_));
                match t.null {
                    config::NullSpec::CableArea => {
                        let Benchmark::Cable(cable) = bench else { unreachable!("validated") };
                        let sampler = CableTailSampler::new(&cable)?;
                        let mut rng = setup.substream(BUILD_LABEL).rng();
                        let mut pool = crate::model::PointSet::with_capacity(d, t.n_build);
                        let mut x = vec![0.0; d];
                        for _ in 0..t.n_build {
                            sampler.draw(&mut rng, &mut x);
                            pool.push(&x);
                        }
                        let strat = empirical_stratify(
                            &pool,
                            |x| CableTailSampler::key(x).log_density,
                            |_| 0.0,
                            sampler.prob_a_star(),
                            t.p0,
                            t.m,
                            unbiased,
                        )?;
                        Plan::CableArea { strat, sampler }
                    }
                    null => {
                        let r0 = match null {
                            config::NullSpec::None => 0.0,
                            config::NullSpec::Radius { radius } => {
                                beta_source = Some(BetaSource::Config);
                                radius
                            }
                            _ => {
                                let dp = multi_start_design_point(
                                    &bench,
                                    &setup.substream(DESIGN_POINT_LABEL),
                                    &config.design_point,
                                )?;
                                setup_g_evals += dp.g_evals;
                                let r0 = if dp.converged {
                                    beta_source = Some(BetaSource::DesignPoint);
                                    dp.safe_radius()
                                } else if let Some(b) = bench.reference().and_then(|r| r.beta) {
                                    log::warn!(
                                        "design-point search on {} did not converge (best β = {:.4}); using registry β = {b}",
                                        bench.name(),
                                        dp.beta
                                    );
                                    beta_source = Some(BetaSource::Registry);
                                    b
                                } else {
                                    return Err(Error::NoConvergence { what: "design-point search", residual: dp.beta });
                                };
                                design_point = Some(dp);
                                r0
                            }
                        };
                        beta = Some(r0);
                        let safe = if r0 > 0.0 { null_stratum_from_design_point(r0, d)? } else { SafeRegion::empty() };
                        let strat = build_gaussian_radial(d, r0, t.p0, t.m, unbiased)?;
                        Plan::Radial { strat, safe }
                    }
                }
            }
            EstimatorSpec::Sus(o) => Plan::Sus(*o),
            EstimatorSpec::Mcs { scheme } => Plan::Mcs(*scheme),
        };
        Ok(Self { config, plan, design_point, beta, beta_source, setup_g_evals })
    }

    /// The tail stratification, for TSS experiments.
    pub fn stratification(&self) -> Option<&TailStratification> {
        match &self.plan {
            Plan::Radial { strat, .. } | Plan::CableArea { strat, .. } => Some(strat),
            _ => None,
        }
    }

    /// Runs a single trial with `n` samples on `RngStream::new(seed, trial)`.
    pub fn trial(&self, n: usize, trial: usize) -> Result<FailureEstimate> {
        let bench = &self.config.benchmark;
        let stream = RngStream::new(self.config.seed, trial as u64);
        match &self.plan {
            Plan::Radial { strat, safe } => {
                let t = self.config.estimator.tss().expect("tss plan");
                tss_estimate(strat, safe, bench, &t.allocation, n, &stream, t.scheme)
            }
            Plan::CableArea { strat, sampler } => {
                let t = self.config.estimator.tss().expect("tss plan");
                let counts = allocate(&t.allocation, strat, n)?;
                let samples = allocated_by_key(
                    strat,
                    &counts,
                    |r, x| sampler.draw(r, x),
                    CableTailSampler::key,
                    &stream,
                    1000 * n as u64 + 10_000,
                )?;
                tss_from_samples(strat, &samples.groups, bench, &stream, false)
            }
            Plan::Sus(o) => Ok(subset_simulation(bench, n, o, &stream)?.estimate),
            Plan::Mcs(scheme) => mcs_estimate(bench, &bench.model(), n, &stream, *scheme),
        }
    }

    /// All trials at sample size `n`.
    pub fn run_n(&self, n: usize) -> Result<TrialReport> {
        let seed = self.config.seed;
        let ests = map_trials(self.config.trials, |t| self.trial(n, t))?;
        let rows: Vec<TrialRow> = ests
            .iter()
            .enumerate()
            .map(|(t, e)| TrialRow {
                trial: t,
                p_hat: e.p_hat,
                var_hat: e.var_hat,
                cov: e.cov,
                bias_bound: e.bias_bound,
                n_g_evals: e.n_g_evals,
                seed,
                n,
                degenerate: e.degenerate,
            })
            .collect();
        let summary = self.summarize(n, &rows);
        Ok(TrialReport { rows, summary })
    }

    fn summarize(&self, n: usize, rows: &[TrialRow]) -> Summary {
        let ps: Vec<f64> = rows.iter().map(|r| r.p_hat).collect();
        let (mean, std) = mean_std(&ps);
        let mut sorted = ps.clone();
        sorted.sort_by(f64::total_cmp);
        let r = rows.len() as f64;
        let evals: u64 = rows.iter().map(|r| r.n_g_evals).sum();
        let reference = self.config.benchmark.reference();
        Summary {
            benchmark: self.config.benchmark.name(),
            estimator: self.config.estimator.label(),
            n,
            trials: rows.len(),
            mean,
            std,
            cov: (mean > 0.0).then(|| std / mean),
            p25: percentile(&sorted, 0.25),
            p75: percentile(&sorted, 0.75),
            mean_bias_bound: rows.iter().map(|r| r.bias_bound).sum::<f64>() / r,
            mean_n_g_evals: evals as f64 / r,
            zero_trials: ps.iter().filter(|&&p| p == 0.0).count(),
            degenerate_trials: rows.iter().filter(|r| r.degenerate).count(),
            setup_g_evals: self.setup_g_evals,
            total_g_evals: evals + self.setup_g_evals,
            beta: self.beta,
            beta_source: self.beta_source,
            reference_pf: reference.map(|r| r.pf),
            reference_source: reference.map(|r| r.source.as_str().to_string()),
        }
    }
}

/// Validates, sets up and runs every sample size of `config`, writing the
/// reports when `config.output` is set.
pub fn run(config: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    let exp = Experiment::new(config.clone())?;
    let mut reports = Vec::new();
    for n in config.n.values() {
        let rep = exp.run_n(n)?;
        if let Some(dir) = &config.output {
            write_report(&rep, dir)?;
        }
        reports.push(rep);
    }
    Ok(reports)
}

/// Writes `trials_n{N}.csv` and `summary_n{N}.json` into `dir`.
pub fn write_report(rep: &TrialReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = rep.summary.n;
    write_csv(&dir.join(format!("trials_n{n}.csv")), &rep.rows)?;
    let f = std::fs::File::create(dir.join(format!("summary_n{n}.json")))?;
    serde_json::to_writer_pretty(f, &rep.summary)?;
    Ok(())
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
