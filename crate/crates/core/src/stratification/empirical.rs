use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_common, geometric_probs, Scheme, Stratum, TailStratification};
use crate::error::{domain, Error, Result};
use crate::model::PointSet;

/// Relative slack on block targets so that exact products such as
/// `1000 * 0.9 * 0.1` are not rounded up to an extra sample.
const TARGET_SLACK: f64 = 1e-12;
/// Offset below the last member's log-density that closes the final stratum.
const OUTER_EPS: f64 = 1e-12;

/// Ordering key of a sample: higher density first, then smaller spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortKey {
    pub log_density: f64,
    pub spread: f64,
}

impl SortKey {
    fn order(&self, other: &SortKey) -> Ordering {
        other.log_density.total_cmp(&self.log_density).then(self.spread.total_cmp(&other.spread))
    }
}

/// Outer bound of a stratum in key space. A key is inside when its density is
/// above `log_density`, or equal to it with spread below `spread`. A missing
/// spread admits every key at that density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub log_density: f64,
    pub spread: Option<f64>,
}

impl Cut {
    pub fn admits(&self, key: SortKey) -> bool {
        key.log_density > self.log_density
            || (key.log_density == self.log_density && key.spread < self.spread.unwrap_or(f64::INFINITY))
    }

    fn between(last: SortKey, first: SortKey) -> Cut {
        if last.log_density != first.log_density {
            Cut { log_density: 0.5 * (last.log_density + first.log_density), spread: None }
        } else {
            Cut { log_density: last.log_density, spread: Some(0.5 * (last.spread + first.spread)) }
        }
    }
}

/// Strata discovered from a sample of `A_*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStrata {
    /// Sample indices of each block, in sort order.
    pub members: Vec<Vec<usize>>,
    /// Samples left after the last block.
    pub remainder: Vec<usize>,
    /// Outer bound of each stratum; the final stratum has none when it
    /// absorbs the whole tail.
    pub cuts: Vec<Cut>,
    /// Normalized importance weights in the original sample order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub degenerate_weights: bool,
}

impl EmpiricalStrata {
    pub fn locate(&self, key: SortKey, m: usize, unbiased_tail: bool) -> Stratum {
        match self.cuts.iter().position(|c| c.admits(key)) {
            Some(i) => Stratum::Tail(i + 1),
            None if unbiased_tail => Stratum::Tail(m),
            None => Stratum::Beyond,
        }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

fn build(
    keys: &[SortKey],
    weights: Option<Vec<f64>>,
    prob_a_star: f64,
    p0: f64,
    m: usize,
    unbiased_tail: bool,
) -> Result<(EmpiricalStrata, TailStratification)> {
    let n = keys.len();
    check_common(1, p0, m)?;
    if !(0.0..=1.0).contains(&prob_a_star) {
        return domain(format!("P(A_*) must lie in [0, 1], got {prob_a_star}"));
    }
    if (n as f64) * (1.0 - p0) * p0.powi(m as i32 - 1) < 1.0 {
        return Err(Error::InsufficientSamples(format!(
            "{n} samples cannot fill {m} strata at p0 = {p0}"
        )));
    }
    if keys.iter().any(|k| k.log_density.is_nan() || k.spread.is_nan()) {
        return domain("NaN density or spread in sort keys");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].order(&keys[b]).then(a.cmp(&b)));

    let weight = |i: usize| weights.as_ref().map_or(1.0, |w| w[i]);
    let mut members = Vec::with_capacity(m);
    let mut pos = 0;
    let mut target = n as f64 * (1.0 - p0);
    for i in 0..m {
        let mut block = Vec::new();
        if unbiased_tail && i + 1 == m {
            block.extend_from_slice(&order[pos..]);
            pos = n;
        } else {
            let mut acc = 0.0;
            while pos < n && acc < target * (1.0 - TARGET_SLACK) {
                acc += weight(order[pos]);
                block.push(order[pos]);
                pos += 1;
            }
        }
        if block.is_empty() {
            return Err(Error::EmptyStratum(i + 1));
        }
        members.push(block);
        target *= p0;
    }
    let remainder = order[pos..].to_vec();

    let mut cuts = Vec::with_capacity(m);
    for i in 0..m {
        let last = keys[*members[i].last().unwrap()];
        if i + 1 < m {
            cuts.push(Cut::between(last, keys[members[i + 1][0]]));
        } else if !unbiased_tail {
            cuts.push(Cut { log_density: last.log_density - OUTER_EPS, spread: None });
        }
    }

    let degenerate_weights = weights.as_ref().is_some_and(|w| {
        let total: f64 = w.iter().sum();
        w.iter().any(|&v| v > 0.5 * total)
    });
    let strata = EmpiricalStrata { members, remainder, cuts, weights, degenerate_weights };
    let strat = TailStratification {
        scheme: Scheme::Empirical(strata.clone()),
        d: 0,
        p0,
        m,
        prob_a_star,
        strata_probs: geometric_probs(p0, m, prob_a_star, unbiased_tail),
        unbiased_tail,
    };
    Ok((strata, strat))
}

/// Adaptive strata with proportional allocation from samples of `f | A_*`.
///
/// Samples are ordered by descending density, then ascending distance, then
/// index, and stratum `i` receives the next `⌈N (1 - p0) p0^(i-1)⌉` of them.
pub fn empirical_stratify(
    samples: &PointSet,
    log_density: impl Fn(&[f64]) -> f64,
    distance: impl Fn(&[f64]) -> f64,
    prob_a_star: f64,
    p0: f64,
    m: usize,
    unbiased_tail: bool,
) -> Result<TailStratification> {
    let keys: Vec<SortKey> =
        samples.iter().map(|x| SortKey { log_density: log_density(x), spread: distance(x) }).collect();
    let (_, mut strat) = build(&keys, None, prob_a_star, p0, m, unbiased_tail)?;
    strat.d = samples.dim;
    Ok(strat)
}

/// Adaptive strata from samples of `q | A_*` with importance weights `f / q`.
///
/// Weights are scaled by `P_q(A_*) / P(A_*)` so that they average one. Without
/// `prob_q_a_star` they are self-normalized to sum to `N`. Stratum `i` is
/// filled until its weight reaches `N (1 - p0) p0^(i-1)`. Ties in density are
/// broken by the weighted spread `spread(x) f(x) / q(x)`.
#[allow(clippy::too_many_arguments)]
pub fn is_allocation_stratify(
    samples: &PointSet,
    log_f: impl Fn(&[f64]) -> f64,
    log_q: impl Fn(&[f64]) -> f64,
    prob_q_a_star: Option<f64>,
    spread: impl Fn(&[f64]) -> f64,
    prob_a_star: f64,
    p0: f64,
    m: usize,
    unbiased_tail: bool,
) -> Result<TailStratification> {
    let n = samples.len();
    let mut keys = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for x in samples.iter() {
        let lf = log_f(x);
        let lq = log_q(x);
        if !lq.is_finite() {
            return domain("sample drawn where q has no mass");
        }
        let w = (lf - lq).exp();
        keys.push(SortKey { log_density: lf, spread: spread(x) * w });
        raw.push(w);
    }
    let scale = match prob_q_a_star {
        Some(pq) => {
            if !(pq > 0.0 && pq <= 1.0) || !(prob_a_star > 0.0) {
                return domain("P_q(A_*) and P(A_*) must be positive");
            }
            pq / prob_a_star
        }
        None => {
            let total: f64 = raw.iter().sum();
            if !(total > 0.0) {
                return domain("importance weights sum to zero");
            }
            n as f64 / total
        }
    };
    let weights: Vec<f64> = raw.iter().map(|w| w * scale).collect();
    let (_, mut strat) = build(&keys, Some(weights), prob_a_star, p0, m, unbiased_tail)?;
    strat.d = samples.dim;
    Ok(strat)
}
