use super::alloc::{allocate, AllocationStrategy};
use super::mcs::LATENT_LABEL;
use super::{EstimatorKind, FailureEstimate, StratumStat};
use crate::error::{domain, Error, Result};
use crate::limit_state::{fails, PerformanceFunction};
use crate::model::{InputModel, PointSet};
use crate::probmath::RngStream;
use crate::sampling::{allocated_samples, sample_gaussian_shell, DesignScheme};
use crate::stratification::{SafeKind, SafeRegion, Scheme, TailStratification};

/// Share of the budget spent on the pilot run when Neyman guesses are
/// not supplied.
pub const PILOT_FRACTION: f64 = 0.1;

const PILOT_LABEL: u64 = 0x9117;
const A0_LABEL: u64 = 0xa0;

fn kind_of(strat: &TailStratification) -> EstimatorKind {
    if strat.unbiased_tail {
        EstimatorKind::TssUnbiased
    } else {
        EstimatorKind::Tss
    }
}

fn count_failures<G: PerformanceFunction + ?Sized>(g: &G, pts: &PointSet, latent: &RngStream) -> Result<usize> {
    let mut rng = latent.rng();
    let mut hits = 0;
    for x in pts.iter() {
        hits += fails(g, x, &mut rng)? as usize;
    }
    Ok(hits)
}

/// Combines per-stratum samples into the TSS estimate
/// `p̂ = Σ P(A_i) P̂(F_i)` with variance `Σ P(A_i)² P̂(F_i)(1 - P̂(F_i)) / N_i`.
///
/// An empty group is an error unless `allow_empty` is set, in which case the
/// stratum contributes nothing.
pub fn tss_from_samples<G: PerformanceFunction + ?Sized>(
    strat: &TailStratification,
    groups: &[PointSet],
    g: &G,
    latent: &RngStream,
    allow_empty: bool,
) -> Result<FailureEstimate> {
    if groups.len() != strat.m {
        return domain(format!("{} sample groups for {} strata", groups.len(), strat.m));
    }
    let mut p = 0.0;
    let mut var = 0.0;
    let mut evals = 0u64;
    let mut stats = Vec::with_capacity(strat.m);
    for (i, (pts, w)) in groups.iter().zip(&strat.strata_probs).enumerate() {
        let n = pts.len();
        if n == 0 {
            if !allow_empty {
                return Err(Error::EmptyStratum(i + 1));
            }
            stats.push(StratumStat { n: 0, pf_hat: 0.0 });
            continue;
        }
        let hits = count_failures(g, pts, &latent.substream(LATENT_LABEL + i as u64))?;
        let pf = hits as f64 / n as f64;
        p += w * pf;
        var += w * w * pf * (1.0 - pf) / n as f64;
        evals += n as u64;
        stats.push(StratumStat { n, pf_hat: pf });
    }
    let mut est = FailureEstimate::new(p, var, strat.bias_bound(), evals, kind_of(strat));
    est.per_stratum = stats;
    Ok(est)
}

/// Conditional failure-probability guesses from a proportional pilot of
/// `n_pilot` samples, with a continuity correction `(k + 1/2)/(n + 1)` so no
/// stratum is starved. Returns the guesses and the evaluations spent.
pub fn neyman_pilot_guesses<G: PerformanceFunction + ?Sized>(
    strat: &TailStratification,
    g: &G,
    n_pilot: usize,
    stream: &RngStream,
    scheme: DesignScheme,
) -> Result<(Vec<f64>, u64)> {
    let counts = allocate(&AllocationStrategy::Proportional, strat, n_pilot)?;
    let samples = allocated_samples(strat, &counts, stream, scheme)?;
    let mut guesses = Vec::with_capacity(strat.m);
    let mut evals = 0u64;
    for (i, pts) in samples.groups.iter().enumerate() {
        let hits = count_failures(g, pts, &stream.substream(LATENT_LABEL + i as u64))?;
        guesses.push((hits as f64 + 0.5) / (pts.len() as f64 + 1.0));
        evals += pts.len() as u64;
    }
    Ok((guesses, evals))
}

fn check_safe(strat: &TailStratification, safe: &SafeRegion) -> Result<()> {
    let tol = 1e-9 * strat.prob_a_star.max(safe.prob_a_star) + 3.0 * safe.std_error;
    if (strat.prob_a_star - safe.prob_a_star).abs() > tol {
        return domain(format!(
            "stratification P(A_*) = {} does not match the safe region's {}",
            strat.prob_a_star, safe.prob_a_star
        ));
    }
    Ok(())
}

/// Tail stratified sampling over a geometric stratification.
///
/// With `unbiased_tail` the last stratum covers the whole remaining tail and
/// the bias bound is zero; otherwise the bound is `p0^m P(A_*)`.
#[allow(clippy::too_many_arguments)]
pub fn tss_estimate<G: PerformanceFunction + ?Sized>(
    strat: &TailStratification,
    safe: &SafeRegion,
    g: &G,
    alloc: &AllocationStrategy,
    n: usize,
    stream: &RngStream,
    scheme: DesignScheme,
) -> Result<FailureEstimate> {
    if matches!(strat.scheme, Scheme::Empirical(_)) {
        return Err(Error::Unsupported("empirical strata are estimated with tss_empirical_estimate".into()));
    }
    check_safe(strat, safe)?;
    let mut pilot_evals = 0;
    let (alloc, budget) = match alloc {
        AllocationStrategy::Neyman { guesses: None } => {
            let n_pilot = ((PILOT_FRACTION * n as f64).round() as usize).max(strat.m);
            if n_pilot + strat.m > n {
                return Err(Error::InfeasibleAllocation(format!("N = {n} too small for a Neyman pilot")));
            }
            let (guesses, evals) = neyman_pilot_guesses(strat, g, n_pilot, &stream.substream(PILOT_LABEL), scheme)?;
            pilot_evals = evals;
            (AllocationStrategy::Neyman { guesses: Some(guesses) }, n - n_pilot)
        }
        other => (other.clone(), n),
    };
    let counts = allocate(&alloc, strat, budget)?;
    let samples = allocated_samples(strat, &counts, stream, scheme)?;
    let allow_empty = matches!(alloc, AllocationStrategy::Neyman { .. });
    let mut est = tss_from_samples(strat, &samples.groups, g, stream, allow_empty)?;
    est.n_g_evals += pilot_evals;
    Ok(est)
}

/// TSS that also samples the null stratum, adding `P(A_0) P̂(F_0)` to the
/// estimate and `P(A_0)² P̂(F_0)(1 - P̂(F_0))/N_0` to its variance.
///
/// The tail part reuses the draws of [`tss_estimate`] for the same stream, so
/// with a correct safe region the variance matches it exactly. The first
/// entry of `per_stratum` describes `A_0`.
#[allow(clippy::too_many_arguments)]
pub fn tss_full_with_a0<G: PerformanceFunction + ?Sized>(
    strat: &TailStratification,
    safe: &SafeRegion,
    g: &G,
    alloc: &AllocationStrategy,
    n: usize,
    n0: usize,
    model: &InputModel,
    stream: &RngStream,
    scheme: DesignScheme,
) -> Result<FailureEstimate> {
    let mut est = tss_estimate(strat, safe, g, alloc, n, stream, scheme)?;
    est.estimator_kind = EstimatorKind::TssFullA0;
    if n0 == 0 || safe.probability == 0.0 {
        est.per_stratum.insert(0, StratumStat { n: 0, pf_hat: 0.0 });
        return Ok(est);
    }
    let a0 = stream.substream(A0_LABEL);
    let mut rng = a0.rng();
    let pts = match &safe.kind {
        SafeKind::Empty => PointSet::new(model.dim()),
        SafeKind::GaussianBall { radius } => sample_gaussian_shell(model.dim(), 0.0, *radius, n0, &mut rng, scheme)?,
        SafeKind::Predicate(member) => {
            let mut pts = PointSet::with_capacity(model.dim(), n0);
            let mut x = vec![0.0; model.dim()];
            let cap = 10_000 * n0 as u64;
            let mut tries = 0u64;
            while pts.len() < n0 {
                if tries >= cap {
                    return Err(Error::LowAcceptance { rate: pts.len() as f64 / tries as f64 });
                }
                model.sample_into(&mut rng, &mut x);
                tries += 1;
                if member(&x) {
                    pts.push(&x);
                }
            }
            pts
        }
    };
    let hits = count_failures(g, &pts, &a0.substream(LATENT_LABEL))?;
    let pf0 = hits as f64 / n0 as f64;
    let w0 = safe.probability;
    est.p_hat += w0 * pf0;
    est.var_hat += w0 * w0 * pf0 * (1.0 - pf0) / n0 as f64;
    est.cov = super::cov_of(est.p_hat, est.var_hat);
    est.n_g_evals += n0 as u64;
    est.per_stratum.insert(0, StratumStat { n: n0, pf_hat: pf0 });
    Ok(est)
}

/// TSS over strata built from samples (proportional or importance-weighted
/// allocation). Every block member is evaluated. With importance weights the
/// conditional failure probability of a block is the self-normalized ratio
/// `Σ w I / Σ w` with delta-method variance `Σ w² (I - P̂)² / (Σ w)²`.
pub fn tss_empirical_estimate<G: PerformanceFunction + ?Sized>(
    strat: &TailStratification,
    samples: &PointSet,
    g: &G,
    latent: &RngStream,
) -> Result<FailureEstimate> {
    let Scheme::Empirical(e) = &strat.scheme else {
        return Err(Error::Unsupported("tss_empirical_estimate needs empirical strata".into()));
    };
    let mut p = 0.0;
    let mut var = 0.0;
    let mut evals = 0u64;
    let mut stats = Vec::with_capacity(strat.m);
    for (i, (block, w)) in e.members.iter().zip(&strat.strata_probs).enumerate() {
        if block.is_empty() {
            return Err(Error::EmptyStratum(i + 1));
        }
        let mut rng = latent.substream(LATENT_LABEL + i as u64).rng();
        let mut ind = Vec::with_capacity(block.len());
        for &k in block {
            ind.push(fails(g, samples.point(k), &mut rng)? as u8 as f64);
        }
        let (pf, v) = match &e.weights {
            None => {
                let pf = ind.iter().sum::<f64>() / block.len() as f64;
                (pf, pf * (1.0 - pf) / block.len() as f64)
            }
            Some(wts) => {
                let ws: Vec<f64> = block.iter().map(|&k| wts[k]).collect();
                let sw: f64 = ws.iter().sum();
                let pf = ws.iter().zip(&ind).map(|(a, b)| a * b).sum::<f64>() / sw;
                let v = ws.iter().zip(&ind).map(|(a, b)| (a * (b - pf)).powi(2)).sum::<f64>() / (sw * sw);
                (pf, v)
            }
        };
        p += w * pf;
        var += w * w * v;
        evals += block.len() as u64;
        stats.push(StratumStat { n: block.len(), pf_hat: pf });
    }
    let mut est = FailureEstimate::new(p, var, strat.bias_bound(), evals, EstimatorKind::TssEmpirical);
    est.per_stratum = stats;
    est.degenerate = e.degenerate_weights;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::estimator::mcs_estimate;
    use crate::limit_state::FnPerformance;
    use crate::stratification::{
        build_gaussian_radial, empirical_stratify, null_stratum_from_design_point, null_stratum_from_predicate,
        ProbMethod,
    };

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn safe_everywhere_gives_zero() {
        let strat = build_gaussian_radial(2, 3.0, 0.1, 4, false).unwrap();
        let safe = null_stratum_from_design_point(3.0, 2).unwrap();
        let g = FnPerformance::new(2, |_: &[f64]| 1.0);
        let e = tss_estimate(&strat, &safe, &g, &AllocationStrategy::Proportional, 4000, &RngStream::new(1, 0), DesignScheme::Lhs).unwrap();
        assert_eq!((e.p_hat, e.var_hat), (0.0, 0.0));
        assert_eq!(e.cov, None);
        assert!((e.bias_bound - 1.1109e-6).abs() < 1e-9);
        assert_eq!(e.n_g_evals, 4000);
    }

    #[test]
    fn single_whole_space_stratum_is_monte_carlo() {
        // m = 1, r0 = 0 and the unbiased tail: one stratum of probability one.
        let strat = build_gaussian_radial(2, 0.0, 0.5, 1, true).unwrap();
        assert_eq!(strat.strata_probs, vec![1.0]);
        let g = FnPerformance::new(2, |x: &[f64]| 1.5 - x[0]);
        let pts = sample_gaussian_shell(2, 0.0, f64::INFINITY, 5000, &mut RngStream::new(2, 0).rng(), DesignScheme::Mcs).unwrap();
        let e = tss_from_samples(&strat, std::slice::from_ref(&pts), &g, &RngStream::new(2, 1), false).unwrap();
        let hits = pts.iter().filter(|x| x[0] >= 1.5).count() as f64;
        assert_eq!(e.p_hat, hits / 5000.0);
        assert_eq!(e.var_hat, e.p_hat * (1.0 - e.p_hat) / 5000.0);
        assert_eq!(e.bias_bound, 0.0);
        assert_eq!(e.estimator_kind, EstimatorKind::TssUnbiased);
    }

    #[test]
    fn worst_case_bias_is_attained() {
        // Failure exactly beyond the last radius: the truncated estimator sees none of it.
        let strat = build_gaussian_radial(2, 2.0, 0.1, 3, false).unwrap();
        let r3 = strat.shell(3).unwrap().1;
        let safe = null_stratum_from_design_point(2.0, 2).unwrap();
        let g = FnPerformance::new(2, move |x: &[f64]| r3 - norm(x));
        let e = tss_estimate(&strat, &safe, &g, &AllocationStrategy::Proportional, 2000, &RngStream::new(3, 0), DesignScheme::Mcs).unwrap();
        let truth = (-0.5 * r3 * r3).exp();
        assert!(e.p_hat <= 1e-300);
        assert!(((truth - e.p_hat) - e.bias_bound).abs() < 1e-15);
    }

    #[test]
    fn rescaling_a_star_rescales_estimate() {
        let g = FnPerformance::new(2, |x: &[f64]| 3.5 - x[0]);
        let strat = build_gaussian_radial(2, 3.0, 0.1, 3, false).unwrap();
        let mut scaled = strat.clone();
        scaled.prob_a_star *= 0.5;
        scaled.strata_probs.iter_mut().for_each(|p| *p *= 0.5);
        let groups = allocated_samples(&strat, &[300, 30, 10], &RngStream::new(4, 0), DesignScheme::Mcs).unwrap().groups;
        let a = tss_from_samples(&strat, &groups, &g, &RngStream::new(4, 1), false).unwrap();
        let b = tss_from_samples(&scaled, &groups, &g, &RngStream::new(4, 1), false).unwrap();
        assert!((b.p_hat - 0.5 * a.p_hat).abs() < 1e-18);
        assert_eq!(a.per_stratum, b.per_stratum);
    }

    #[test]
    fn neyman_pilot_counts_evaluations() {
        let strat = build_gaussian_radial(2, 2.5, 0.1, 3, false).unwrap();
        let safe = null_stratum_from_design_point(2.5, 2).unwrap();
        let g = FnPerformance::new(2, |x: &[f64]| 2.8 - x[0]);
        let e = tss_estimate(&strat, &safe, &g, &AllocationStrategy::Neyman { guesses: None }, 2000, &RngStream::new(5, 0), DesignScheme::Mcs).unwrap();
        assert_eq!(e.n_g_evals, 2000);
        assert_eq!(e.per_stratum.iter().map(|s| s.n as u64).sum::<u64>(), 1800);
    }

    #[test]
    fn mismatched_safe_region_rejected() {
        let strat = build_gaussian_radial(2, 3.0, 0.1, 2, false).unwrap();
        let safe = null_stratum_from_design_point(2.0, 2).unwrap();
        let g = FnPerformance::new(2, |_: &[f64]| 1.0);
        assert!(tss_estimate(&strat, &safe, &g, &AllocationStrategy::Proportional, 100, &RngStream::new(6, 0), DesignScheme::Mcs).is_err());
    }

    #[test]
    fn a0_term_vanishes_for_correct_safe_region() {
        let strat = build_gaussian_radial(2, 3.0, 0.1, 4, false).unwrap();
        let safe = null_stratum_from_design_point(3.0, 2).unwrap();
        let g = FnPerformance::new(2, |x: &[f64]| 3.0 - x[0]);
        let model = InputModel::StandardNormal { dim: 2 };
        let s = RngStream::new(7, 0);
        let base = tss_estimate(&strat, &safe, &g, &AllocationStrategy::Proportional, 4000, &s, DesignScheme::Lhs).unwrap();
        let full = tss_full_with_a0(&strat, &safe, &g, &AllocationStrategy::Proportional, 4000, 500, &model, &s, DesignScheme::Lhs).unwrap();
        assert_eq!(full.per_stratum[0], StratumStat { n: 500, pf_hat: 0.0 });
        assert_eq!(full.var_hat, base.var_hat);
        assert_eq!(full.p_hat, base.p_hat);
        assert_eq!(full.n_g_evals, 4500);
        let none = tss_full_with_a0(&strat, &safe, &g, &AllocationStrategy::Proportional, 4000, 0, &model, &s, DesignScheme::Lhs).unwrap();
        assert_eq!((none.p_hat, none.var_hat, none.n_g_evals), (base.p_hat, base.var_hat, base.n_g_evals));
    }

    #[test]
    fn wrong_safe_region_shows_up() {
        let strat = build_gaussian_radial(2, 0.0, 0.1, 2, false).unwrap();
        let wrong = null_stratum_from_predicate(Arc::new(|x: &[f64]| x[0] < 0.0), ProbMethod::Analytic(0.5)).unwrap();
        // P(A_*) of the stratification does not match; build a matching one by hand.
        let mut s2 = strat.clone();
        s2.prob_a_star = 0.5;
        s2.strata_probs.iter_mut().for_each(|p| *p *= 0.5);
        let g = FnPerformance::new(2, |_: &[f64]| -1.0);
        let model = InputModel::StandardNormal { dim: 2 };
        let e = tss_full_with_a0(&s2, &wrong, &g, &AllocationStrategy::Proportional, 200, 100, &model, &RngStream::new(8, 0), DesignScheme::Mcs).unwrap();
        assert_eq!(e.per_stratum[0].pf_hat, 1.0);
        assert!(e.p_hat > 0.9);
    }

    #[test]
    fn empirical_matches_proportional_mcs() {
        let model = InputModel::StandardNormal { dim: 2 };
        let g = FnPerformance::new(2, |x: &[f64]| 2.0 - x[0]);
        let n = 20_000;
        let pts = model.sample(&mut RngStream::new(9, 0).rng(), n);
        let strat = empirical_stratify(&pts, |x| model.log_density(x), norm, 1.0, 0.1, 4, true).unwrap();
        let e = tss_empirical_estimate(&strat, &pts, &g, &RngStream::new(9, 1)).unwrap();
        let want = crate::probmath::std_normal_cdf(-2.0);
        assert!((e.p_hat - want).abs() < 4.0 * e.var_hat.sqrt());
        assert_eq!(e.n_g_evals, n as u64);
        let direct = mcs_estimate(&g, &model, n, &RngStream::new(9, 0), DesignScheme::Mcs).unwrap();
        assert!((direct.p_hat - want).abs() < 4.0 * direct.var_hat.sqrt());
    }
}
