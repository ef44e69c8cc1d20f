//! Subset Simulation baseline with component-wise modified Metropolis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::{EstimatorKind, FailureEstimate};
use crate::limit_state::PerformanceFunction;
use crate::probmath::{RngStream, StreamRng};

const STALL_MOVEMENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SusOptions {
    /// Conditional probability of each intermediate level.
    pub p0: f64,
    /// Width of the uniform component proposal.
    pub proposal_width: f64,
    pub max_levels: usize,
}

impl Default for SusOptions {
    fn default() -> Self {
        Self { p0: 0.1, proposal_width: 2.0, max_levels: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusLevel {
    pub threshold: f64,
    /// Acceptance rate of the chains that populated this level.
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusResult {
    pub estimate: FailureEstimate,
    /// Intermediate thresholds, in order; the last level has threshold 0.
    pub levels: Vec<SusLevel>,
    pub converged: bool,
    /// Some chain accepted moves yet travelled less than 1e-12.
    pub stalled: bool,
}

struct Chain {
    xs: Vec<Vec<f64>>,
    gs: Vec<f64>,
    accepted: usize,
    proposed: usize,
    movement: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_chain<G: PerformanceFunction + ?Sized>(
    g: &G,
    seed_x: &[f64],
    seed_g: f64,
    len: usize,
    threshold: f64,
    width: f64,
    rng: &mut StreamRng,
    latent: &mut StreamRng,
) -> Result<Chain> {
    let d = seed_x.len();
    let mut xs = Vec::with_capacity(len);
    let mut gs = Vec::with_capacity(len);
    xs.push(seed_x.to_vec());
    gs.push(seed_g);
    let (mut accepted, mut proposed, mut movement) = (0, 0, 0.0);
    let mut cand = vec![0.0; d];
    for _ in 1..len {
        let cur = xs.last().expect("seeded");
        for k in 0..d {
            let xi = cur[k] + width * (rng.random::<f64>() - 0.5);
            let ratio = (0.5 * (cur[k] * cur[k] - xi * xi)).exp();
            cand[k] = if rng.random::<f64>() < ratio { xi } else { cur[k] };
        }
        proposed += 1;
        let (next, gn) = if cand != *cur {
            let gc = g.eval(&cand, latent);
            if gc.is_nan() {
                return Err(Error::NanResponse(cand.clone()));
            }
            if gc <= threshold {
                accepted += 1;
                movement += cand.iter().zip(cur).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                (cand.clone(), gc)
            } else {
                (cur.clone(), *gs.last().expect("seeded"))
            }
        } else {
            (cur.clone(), *gs.last().expect("seeded"))
        };
        xs.push(next);
        gs.push(gn);
    }
    Ok(Chain { xs, gs, accepted, proposed, movement })
}

/// Correlation factor `γ` of the level indicator `I(g <= b)` over chains of
/// equal length (Au and Beck's estimator).
fn chain_gamma(indicators: &[Vec<bool>], p: f64) -> f64 {
    let nc = indicators.len();
    let ns = indicators.first().map_or(0, Vec::len);
    let n = (nc * ns) as f64;
    let r0 = p * (1.0 - p);
    if r0 <= 0.0 || ns < 2 {
        return 0.0;
    }
    let mut gamma = 0.0;
    for k in 1..ns {
        let mut acc = 0.0;
        for ch in indicators {
            for t in 0..ns - k {
                acc += (ch[t] && ch[t + k]) as u8 as f64;
            }
        }
        let rk = acc / (n - (k * nc) as f64) - p * p;
        gamma += 2.0 * (1.0 - (k * nc) as f64 / n) * rk / r0;
    }
    gamma.max(0.0)
}

/// Subset Simulation on a deterministic `g` in `d`-dimensional standard
/// normal space with `n` samples per level.
///
/// Each level threshold is the `p0` sample quantile of `g`; `p0 n` seeds each
/// start a chain of length `1/p0`. The estimate is
/// `p0^{L-1} × (fraction of the last level with g <= 0)` and its variance
/// follows from the summed squared level CoVs. Reaching `max_levels`, or a
/// threshold that fails to decrease, ends the run as non-converged with the
/// estimate flagged degenerate.
pub fn subset_simulation<G: PerformanceFunction + ?Sized>(
    g: &G,
    n: usize,
    opts: &SusOptions,
    stream: &RngStream,
) -> Result<SusResult> {
    if g.is_stochastic() {
        return Err(Error::Unsupported("subset simulation cannot be used with a stochastic performance function".into()));
    }
    if !(opts.p0 > 0.0 && opts.p0 < 1.0) {
        return domain(format!("level probability must lie in (0, 1), got {}", opts.p0));
    }
    let nc = (opts.p0 * n as f64).round() as usize;
    if nc == 0 || !n.is_multiple_of(nc) || n / nc < 1 {
        return domain(format!("{n} samples per level do not split into chains at p0 = {}", opts.p0));
    }
    let ns = n / nc;
    let d = g.dim();
    let mut rng = stream.rng();
    let mut latent = stream.substream(0x001a_7e57).rng();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut gs: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let v = g.eval(&x, &mut latent);
        if v.is_nan() {
            return Err(Error::NanResponse(x));
        }
        xs.push(x);
        gs.push(v);
    }
    let mut evals = n as u64;
    let mut levels = Vec::new();
    let mut delta2 = 0.0;
    let mut prev_threshold = f64::INFINITY;
    let mut last_acceptance = 1.0;
    // Chain-membership of the current population, for the correlation factor.
    let mut chains_of: Option<Vec<Vec<usize>>> = None;
    let mut stalled = false;
    let mut scale = 1.0;
    loop {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| gs[a].total_cmp(&gs[b]));
        let q = 0.5 * (gs[order[nc - 1]] + gs[order[nc]]);
        let level_no = levels.len() + 1;
        let level_cov2 = |p: f64, thr: f64, chains: &Option<Vec<Vec<usize>>>| {
            let gamma = chains.as_ref().map_or(0.0, |cs| {
                let ind: Vec<Vec<bool>> = cs.iter().map(|c| c.iter().map(|&i| gs[i] <= thr).collect()).collect();
                chain_gamma(&ind, p)
            });
            if p > 0.0 {
                (1.0 - p) / (n as f64 * p) * (1.0 + gamma)
            } else {
                0.0
            }
        };
        if q <= 0.0 {
            let hits = gs.iter().filter(|&&v| v <= 0.0).count();
            let pf = hits as f64 / n as f64;
            delta2 += level_cov2(pf, 0.0, &chains_of);
            levels.push(SusLevel { threshold: 0.0, acceptance: last_acceptance });
            let p = scale * pf;
            let mut est = FailureEstimate::new(p, delta2 * p * p, 0.0, evals, EstimatorKind::Sus);
            est.degenerate = stalled;
            return Ok(SusResult { estimate: est, levels, converged: true, stalled });
        }
        if level_no >= opts.max_levels || q >= prev_threshold {
            let hits = gs.iter().filter(|&&v| v <= 0.0).count();
            let p = scale * hits as f64 / n as f64;
            let mut est = FailureEstimate::new(p, 0.0, 0.0, evals, EstimatorKind::Sus);
            est.cov = None;
            est.degenerate = true;
            levels.push(SusLevel { threshold: q, acceptance: last_acceptance });
            return Ok(SusResult { estimate: est, levels, converged: false, stalled });
        }
        delta2 += level_cov2(opts.p0, q, &chains_of);
        levels.push(SusLevel { threshold: q, acceptance: last_acceptance });
        scale *= opts.p0;
        prev_threshold = q;

        let seeds: Vec<usize> = order[..nc].to_vec();
        let level_stream = stream.substream(level_no as u64);
        let run = |c: usize| -> Result<Chain> {
            let s = level_stream.substream(c as u64);
            let mut r = s.rng();
            let mut lat = s.substream(0x001a_7e57).rng();
            let i = seeds[c];
            run_chain(g, &xs[i], gs[i], ns, q, opts.proposal_width, &mut r, &mut lat)
        };
        #[cfg(feature = "parallel")]
        let chains: Vec<Chain> = {
            use rayon::prelude::*;
            (0..nc).into_par_iter().map(run).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let chains: Vec<Chain> = (0..nc).map(run).collect::<Result<_>>()?;

        let (mut acc, mut prop) = (0usize, 0usize);
        let mut new_xs = Vec::with_capacity(n);
        let mut new_gs = Vec::with_capacity(n);
        let mut members = Vec::with_capacity(nc);
        for ch in chains {
            acc += ch.accepted;
            prop += ch.proposed;
            if ch.accepted > 0 && ch.movement < STALL_MOVEMENT {
                stalled = true;
            }
            let start = new_xs.len();
            members.push((start..start + ch.xs.len()).collect());
            new_xs.extend(ch.xs);
            new_gs.extend(ch.gs);
        }
        evals += (n - nc) as u64;
        last_acceptance = if prop > 0 { acc as f64 / prop as f64 } else { 0.0 };
        xs = new_xs;
        gs = new_gs;
        chains_of = Some(members);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_state::FnPerformance;
    use crate::probmath::std_normal_sf;

    #[test]
    fn large_probability_is_one_level_of_monte_carlo() {
        let g = FnPerformance::new(2, |x: &[f64]| 0.5 - x[0]);
        let r = subset_simulation(&g, 1000, &SusOptions::default(), &RngStream::new(1, 0)).unwrap();
        assert!(r.converged);
        assert_eq!(r.levels.len(), 1);
        assert_eq!(r.estimate.n_g_evals, 1000);
        // Same first-level draws as a hand-rolled Monte Carlo.
        let mut rng = RngStream::new(1, 0).rng();
        let hits = (0..1000)
            .filter(|_| {
                let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
                0.5 - x[0] <= 0.0
            })
            .count();
        assert_eq!(r.estimate.p_hat, hits as f64 / 1000.0);
    }

    #[test]
    fn half_space_unbiased_enough() {
        let g = FnPerformance::new(2, |x: &[f64]| 3.5 - x[1]);
        let want = std_normal_sf(3.5);
        let trials = 40;
        let mut sum = 0.0;
        for t in 0..trials {
            let r = subset_simulation(&g, 1000, &SusOptions::default(), &RngStream::new(2, t)).unwrap();
            assert!(r.converged);
            assert_eq!(r.estimate.n_g_evals, 1000 + (r.levels.len() as u64 - 1) * 900);
            sum += r.estimate.p_hat;
        }
        let mean = sum / trials as f64;
        assert!((mean / want - 1.0).abs() < 0.25, "{mean:e} vs {want:e}");
    }

    #[test]
    fn thresholds_decrease() {
        let g = FnPerformance::new(3, |x: &[f64]| 4.0 - x.iter().sum::<f64>() / 3f64.sqrt());
        let r = subset_simulation(&g, 500, &SusOptions::default(), &RngStream::new(3, 0)).unwrap();
        for w in r.levels.windows(2) {
            assert!(w[1].threshold < w[0].threshold);
        }
        assert!(r.converged);
    }

    #[test]
    fn stochastic_rejected() {
        struct Noisy;
        impl PerformanceFunction for Noisy {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64 {
                1.0 - x[0] + latent.random::<f64>()
            }
            fn is_stochastic(&self) -> bool {
                true
            }
        }
        assert!(matches!(
            subset_simulation(&Noisy, 100, &SusOptions::default(), &RngStream::new(0, 0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn unreachable_failure_does_not_converge() {
        let g = FnPerformance::new(2, |x: &[f64]| 1.0 + x[0].abs().min(1.0));
        let r = subset_simulation(&g, 200, &SusOptions::default(), &RngStream::new(4, 0)).unwrap();
        assert!(!r.converged);
        assert!(r.estimate.degenerate);
    }

    #[test]
    fn tiny_proposals_stall() {
        let g = FnPerformance::new(2, |x: &[f64]| 3.0 - x[0]);
        let opts = SusOptions { proposal_width: 1e-16, max_levels: 3, ..SusOptions::default() };
        let r = subset_simulation(&g, 200, &opts, &RngStream::new(5, 0)).unwrap();
        assert!(r.stalled);
    }

    #[test]
    fn seeds_meet_threshold() {
        let g = FnPerformance::new(2, |x: &[f64]| 3.0 - x[0]);
        let r = subset_simulation(&g, 1000, &SusOptions::default(), &RngStream::new(6, 0)).unwrap();
        // Every chain state satisfies its level threshold by construction; the
        // thresholds themselves bracket the known quantiles.
        let q1 = crate::probmath::std_normal_cdf_inv(0.9).unwrap();
        assert!((r.levels[0].threshold - (3.0 - q1)).abs() < 0.2);
    }
}
