use serde::{Deserialize, Serialize};

use super::{mean_std, percentile, EstimatorSpec, Experiment, ExperimentConfig, TrialReport, TssSpec};
use crate::benchmarks::Benchmark;
use crate::error::{Error, Result};
use crate::estimator::AllocationStrategy;
use crate::sampling::DesignScheme;
use crate::sus::SusOptions;

/// Percentiles of the normalized error `(p̂ - P_F) / P_F` for one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub p2_5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p97_5: f64,
    pub mean_bias_bound: f64,
}

/// Truncation bias against `m`: equal allocation with `per_stratum_n`
/// samples in each stratum, `trials` trials per `m`.
pub fn bias_study(
    benchmark: Benchmark,
    m_list: &[usize],
    per_stratum_n: usize,
    trials: usize,
    seed: u64,
    base: &TssSpec,
) -> Result<Vec<BiasRow>> {
    let reference = benchmark
        .reference()
        .ok_or_else(|| Error::Config(format!("{} has no reference failure probability", benchmark.name())))?
        .pf;
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let spec = TssSpec { m, allocation: AllocationStrategy::Equal, ..base.clone() };
        let n = m * per_stratum_n;
        let exp = Experiment::new(ExperimentConfig::new(benchmark, EstimatorSpec::Tss(spec), n, trials, seed))?;
        let rep = exp.run_n(n)?;
        let mut errs: Vec<f64> = rep.rows.iter().map(|r| (r.p_hat - reference) / reference).collect();
        errs.sort_by(f64::total_cmp);
        let (mean, _) = mean_std(&errs);
        rows.push(BiasRow {
            m,
            n,
            trials,
            mean,
            p2_5: percentile(&errs, 0.025),
            p25: percentile(&errs, 0.25),
            p50: percentile(&errs, 0.5),
            p75: percentile(&errs, 0.75),
            p97_5: percentile(&errs, 0.975),
            mean_bias_bound: rep.summary.mean_bias_bound,
        });
    }
    Ok(rows)
}

/// Empirical CoV of one estimator at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub estimator: String,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub cov: Option<f64>,
    pub mean_n_g_evals: f64,
    pub degenerate_trials: usize,
}

/// Least-squares slope of `log CoV` on `log N` for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub estimator: String,
    pub slope: Option<f64>,
    pub points: usize,
}

/// Slope of the least-squares line through `(ln x, ln y)`; `None` with fewer
/// than two distinct points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// CoV against `N` for each estimator, with the fitted log-log slope.
/// Non-converged SuS trials are kept in the rows and counted in
/// `degenerate_trials`.
pub fn convergence_study(
    benchmark: Benchmark,
    estimators: &[EstimatorSpec],
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<(Vec<ConvergenceRow>, Vec<ConvergenceFit>)> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for est in estimators {
        let mut cfg = ExperimentConfig::new(benchmark, est.clone(), n_grid[0], trials, seed);
        cfg.n = super::Budget::Sweep(n_grid.to_vec());
        let exp = Experiment::new(cfg)?;
        let mut pts = Vec::new();
        for &n in n_grid {
            let s = exp.run_n(n)?.summary;
            if let Some(c) = s.cov {
                pts.push((n as f64, c));
            }
            rows.push(ConvergenceRow {
                estimator: s.estimator,
                n,
                trials,
                mean: s.mean,
                cov: s.cov,
                mean_n_g_evals: s.mean_n_g_evals,
                degenerate_trials: s.degenerate_trials,
            });
        }
        fits.push(ConvergenceFit { estimator: est.label(), slope: log_log_slope(&pts), points: pts.len() });
    }
    Ok((rows, fits))
}

/// SuS and TSS run at the same mean number of performance-function calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedComparison {
    pub sus: TrialReport,
    /// `None` when SuS did not converge in any trial.
    pub tss: Option<TrialReport>,
    /// TSS sample size: the mean SuS evaluation count, rounded.
    pub n_tss: usize,
}

impl MatchedComparison {
    /// `CoV_SuS / CoV_TSS`.
    pub fn cov_ratio(&self) -> Option<f64> {
        Some(self.sus.summary.cov? / self.tss.as_ref()?.summary.cov?)
    }

    pub fn sus_converged(&self) -> bool {
        self.sus.summary.degenerate_trials < self.sus.summary.trials
    }
}

/// Two passes: SuS with `n_sus` samples per level, then TSS with `N` equal to
/// SuS's mean evaluations over the trials. TSS is skipped when every SuS
/// trial fails to converge.
pub fn matched_budget(
    benchmark: Benchmark,
    n_sus: usize,
    sus: SusOptions,
    tss: TssSpec,
    trials: usize,
    seed: u64,
) -> Result<MatchedComparison> {
    let s_exp = Experiment::new(ExperimentConfig::new(benchmark, EstimatorSpec::Sus(sus), n_sus, trials, seed))?;
    let s_rep = s_exp.run_n(n_sus)?;
    let n_tss = s_rep.summary.mean_n_g_evals.round() as usize;
    let mut out = MatchedComparison { sus: s_rep, tss: None, n_tss };
    if out.sus_converged() {
        let t_exp = Experiment::new(ExperimentConfig::new(benchmark, EstimatorSpec::Tss(tss), n_tss, trials, seed))?;
        out.tss = Some(t_exp.run_n(n_tss)?);
    }
    Ok(out)
}

/// Default TSS settings with the given design scheme.
pub fn tss_with(scheme: DesignScheme) -> TssSpec {
    TssSpec { scheme, ..TssSpec::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::by_name;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [100.0, 1000.0, 10000.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.5))).collect();
        assert!((log_log_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&pts[..1]), None);
    }

    #[test]
    fn one_stratum_underestimates_a_deep_tail() {
        let rows = bias_study(by_name("black_swan").unwrap(), &[1, 3], 300, 20, 5, &TssSpec::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].mean < -0.1);
        assert!(rows[1].mean > rows[0].mean);
        assert!(rows[0].p2_5 <= rows[0].p50 && rows[0].p50 <= rows[0].p97_5);
    }

    #[test]
    fn convergence_rows_cover_the_grid() {
        let est = [EstimatorSpec::Tss(TssSpec::default())];
        let (rows, fits) = convergence_study(by_name("four_branch").unwrap(), &est, &[300, 1200], 10, 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(fits[0].points, 2);
        assert!(fits[0].slope.unwrap() < 0.0);
    }

    #[test]
    fn matched_budget_uses_sus_mean_evaluations() {
        let c = matched_budget(by_name("four_branch").unwrap(), 500, SusOptions::default(), TssSpec::default(), 4, 9)
            .unwrap();
        assert_eq!(c.n_tss, c.sus.summary.mean_n_g_evals.round() as usize);
        let t = c.tss.unwrap();
        assert!(t.rows.iter().all(|r| r.n_g_evals as usize == c.n_tss));
    }
}
