//! Conditional sampling inside strata.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::PointSet;
use crate::probmath::{chi_cdf, chi_cdf_inv, chi_sf, chi_sf_inv, latin_hypercube_with, RngStream, StreamRng};
use crate::stratification::{NormOrder, Scheme, SortKey, Stratum, TailStratification};

/// How the uniform variates behind each stratum's samples are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignScheme {
    #[default]
    Mcs,
    Lhs,
}

impl std::str::FromStr for DesignScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcs" => Ok(DesignScheme::Mcs),
            "lhs" => Ok(DesignScheme::Lhs),
            _ => Err(Error::Config(format!("unknown sampling scheme '{s}'"))),
        }
    }
}

/// Samples grouped by tail stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataSamples {
    /// `groups[i]` holds the samples of stratum `i + 1`.
    pub groups: Vec<PointSet>,
    /// Pool samples that fell past a truncated last stratum.
    pub beyond: usize,
    /// Candidate points generated, including rejected ones.
    pub proposals: u64,
}

impl StrataSamples {
    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(PointSet::len).collect()
    }
}

/// Radius sampler for the chi law truncated to `(r_lo, r_hi]`.
struct RadialShell {
    d: usize,
    r_lo: f64,
    r_hi: f64,
    /// Work in CDF space when the shell sits in the lower half of the law,
    /// survival space otherwise.
    lower: bool,
    a: f64,
    b: f64,
}

impl RadialShell {
    fn new(d: usize, r_lo: f64, r_hi: f64) -> Result<Self> {
        if !(r_lo >= 0.0 && r_hi > r_lo) {
            return domain(format!("shell needs 0 <= r_lo < r_hi, got ({r_lo}, {r_hi}]"));
        }
        let cdf_hi = if r_hi.is_infinite() { 1.0 } else { chi_cdf(r_hi, d)? };
        if cdf_hi <= 0.5 {
            Ok(Self { d, r_lo, r_hi, lower: true, a: chi_cdf(r_lo, d)?, b: cdf_hi })
        } else {
            let sf_hi = if r_hi.is_infinite() { 0.0 } else { chi_sf(r_hi, d)? };
            let sf_lo = chi_sf(r_lo, d)?;
            if !(sf_lo > sf_hi) {
                return domain(format!("shell ({r_lo}, {r_hi}] has no probability mass in {d} dimensions"));
            }
            Ok(Self { d, r_lo, r_hi, lower: false, a: sf_lo, b: sf_hi })
        }
    }

    /// Radius for a uniform variate `u` in `(0, 1]`.
    fn radius(&self, u: f64) -> Result<f64> {
        let r = if self.lower {
            chi_cdf_inv(self.a + u * (self.b - self.a), self.d)?
        } else {
            let q = self.a - u * (self.a - self.b);
            if q <= 0.0 {
                self.r_hi
            } else {
                chi_sf_inv(q.min(1.0), self.d)?
            }
        };
        Ok(r.max(self.r_lo.next_up()).min(self.r_hi))
    }
}

fn unit_direction(rng: &mut StreamRng, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 0.0 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Points of `d` independent standard normals conditioned on
/// `r_lo < |x| <= r_hi`. Directions are uniform on the sphere; the radius
/// inverts the truncated chi law. Under LHS the radius probability is a Latin
/// column, and for `d = 2` so is the angle.
pub fn sample_gaussian_shell(
    d: usize,
    r_lo: f64,
    r_hi: f64,
    n: usize,
    rng: &mut StreamRng,
    scheme: DesignScheme,
) -> Result<PointSet> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    let shell = RadialShell::new(d, r_lo, r_hi)?;
    let mut pts = PointSet { dim: d, coords: vec![0.0; n * d] };
    if n == 0 {
        return Ok(pts);
    }
    let design = match scheme {
        DesignScheme::Lhs => Some(latin_hypercube_with(n, if d == 2 { 2 } else { 1 }, rng)),
        DesignScheme::Mcs => None,
    };
    for (k, x) in pts.coords.chunks_exact_mut(d).enumerate() {
        let (u, angle) = match &design {
            Some(des) => {
                let row = des.row(k);
                (1.0 - row[0], row.get(1).map(|v| v * std::f64::consts::TAU))
            }
            None => (1.0 - rng.random::<f64>(), None),
        };
        let r = shell.radius(u)?;
        match angle {
            Some(t) => {
                x[0] = t.cos();
                x[1] = t.sin();
            }
            None => unit_direction(rng, x),
        }
        x.iter_mut().for_each(|v| *v *= r);
    }
    Ok(pts)
}

/// Uniform draws from a norm shell inside the cube, with the rejection rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSample {
    pub points: PointSet,
    pub acceptance: f64,
}

const SWITCH_ACCEPTANCE: f64 = 1e-3;
const MIN_ACCEPTANCE: f64 = 1e-6;
const PROPOSAL_CAP: u64 = 10_000;
const PILOT_PROPOSALS: u64 = 10_000;

/// Direction on the unit sphere of `norm`, distributed by cone measure.
fn norm_direction(norm: NormOrder, rng: &mut StreamRng, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = match norm {
                NormOrder::L1 => {
                    let e: f64 = rng.sample(Exp1);
                    if rng.random::<bool>() {
                        e
                    } else {
                        -e
                    }
                }
                NormOrder::L2 => rng.sample(StandardNormal),
                NormOrder::Linf => rng.random_range(-1.0..=1.0),
            };
        }
        let s = norm.norm(out);
        if s > 0.0 {
            out.iter_mut().for_each(|v| *v /= s);
            return;
        }
    }
}

/// Uniform points of `[-1, 1]^d` with `λ_lo < |x|_p <= λ_hi`.
///
/// Proposals come from the cube while that accepts at least one in a
/// thousand, and otherwise from the full norm shell (radius with density
/// `∝ s^(d-1)`, cone-measure direction) filtered to the cube.
pub fn sample_uniform_shell(
    d: usize,
    norm: NormOrder,
    lambda_lo: f64,
    lambda_hi: f64,
    n: usize,
    rng: &mut StreamRng,
) -> Result<ShellSample> {
    if d < 1 {
        return domain("dimension must be at least 1");
    }
    if !(lambda_lo >= 0.0 && lambda_hi > lambda_lo) {
        return domain(format!("shell needs 0 <= λ_lo < λ_hi, got ({lambda_lo}, {lambda_hi}]"));
    }
    let inside = |x: &[f64]| {
        let r = norm.norm(x);
        r > lambda_lo && r <= lambda_hi && x.iter().all(|v| v.abs() <= 1.0)
    };
    let mut pts = PointSet::with_capacity(d, n);
    if n == 0 {
        return Ok(ShellSample { points: pts, acceptance: 1.0 });
    }
    let mut x = vec![0.0; d];
    let cap = PROPOSAL_CAP * n as u64;
    let mut proposals = 0u64;

    // Cube proposals first; fall back to shell proposals on low acceptance.
    let mut use_cube = true;
    while pts.len() < n && use_cube {
        for v in x.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        proposals += 1;
        if inside(&x) {
            pts.push(&x);
        }
        if proposals == PILOT_PROPOSALS && (pts.len() as f64) < SWITCH_ACCEPTANCE * proposals as f64 {
            use_cube = false;
        }
        if proposals >= cap {
            break;
        }
    }
    if pts.len() < n && !use_cube {
        let (lo_d, hi_d) = (lambda_lo.powi(d as i32), lambda_hi.powi(d as i32));
        let mut shell_props = 0u64;
        let mut shell_hits = 0u64;
        while pts.len() < n && proposals < cap {
            let s = (lo_d + rng.random::<f64>() * (hi_d - lo_d)).powf(1.0 / d as f64);
            norm_direction(norm, rng, &mut x);
            x.iter_mut().for_each(|v| *v *= s);
            proposals += 1;
            shell_props += 1;
            if inside(&x) {
                pts.push(&x);
                shell_hits += 1;
            }
            if shell_props == PILOT_PROPOSALS && (shell_hits as f64) < MIN_ACCEPTANCE * shell_props as f64 {
                break;
            }
        }
        if shell_props > 0 && (shell_hits as f64) < MIN_ACCEPTANCE * shell_props as f64 {
            return Err(Error::LowAcceptance { rate: shell_hits as f64 / shell_props as f64 });
        }
    }
    let acceptance = pts.len() as f64 / proposals as f64;
    if pts.len() < n {
        return Err(Error::LowAcceptance { rate: acceptance });
    }
    Ok(ShellSample { points: pts, acceptance })
}

/// Draws `n` points from `f | A_*` for a geometric stratification.
pub fn sample_a_star(strat: &TailStratification, n: usize, rng: &mut StreamRng, scheme: DesignScheme) -> Result<PointSet> {
    match &strat.scheme {
        Scheme::GaussianRadial { radii } => sample_gaussian_shell(strat.d, radii[0], f64::INFINITY, n, rng, scheme),
        Scheme::UniformNorm { norm, thresholds } => {
            let top = norm.lambda_max(strat.d);
            Ok(sample_uniform_shell(strat.d, *norm, thresholds[0], top, n, rng)?.points)
        }
        Scheme::Empirical(_) => Err(Error::Unsupported("empirical strata need a caller-supplied A_* sampler".into())),
    }
}

/// Sorts a pool of `f | A_*` samples into strata.
pub fn proportional_pool(strat: &TailStratification, pool: &PointSet) -> Result<StrataSamples> {
    let mut groups = vec![PointSet::new(pool.dim); strat.m];
    let mut beyond = 0;
    for x in pool.iter() {
        match strat.classify(x)? {
            Stratum::Tail(i) => groups[i - 1].push(x),
            Stratum::Beyond => beyond += 1,
            Stratum::Null => return domain("pool sample lies inside the null stratum"),
        }
    }
    Ok(StrataSamples { groups, beyond, proposals: pool.len() as u64 })
}

/// Exactly `counts[i]` samples from stratum `i + 1` of a geometric
/// stratification. Each stratum draws from its own substream of `stream`.
pub fn allocated_samples(
    strat: &TailStratification,
    counts: &[usize],
    stream: &RngStream,
    scheme: DesignScheme,
) -> Result<StrataSamples> {
    if counts.len() != strat.m {
        return domain(format!("{} counts given for {} strata", counts.len(), strat.m));
    }
    let mut groups = Vec::with_capacity(strat.m);
    let mut proposals = 0u64;
    for (i, &n) in counts.iter().enumerate() {
        let mut rng = stream.substream(i as u64 + 1).rng();
        let (lo, hi) = strat.shell(i + 1).expect("geometric scheme");
        let pts = match &strat.scheme {
            Scheme::GaussianRadial { .. } => {
                proposals += n as u64;
                sample_gaussian_shell(strat.d, lo, hi, n, &mut rng, scheme)?
            }
            Scheme::UniformNorm { norm, .. } => {
                let hi = hi.min(norm.lambda_max(strat.d));
                // Stratum 1 is closed at λ_0; the shell sampler treats its
                // lower edge as open, which differs only on a null set.
                let s = sample_uniform_shell(strat.d, *norm, lo, hi, n, &mut rng)?;
                proposals += (n as f64 / s.acceptance.max(f64::MIN_POSITIVE)).round() as u64;
                s.points
            }
            Scheme::Empirical(_) => {
                return Err(Error::Unsupported("use allocated_by_key for empirical strata".into()));
            }
        };
        for x in pts.iter() {
            if strat.classify(x)? != Stratum::Tail(i + 1) {
                return domain(format!("sample {x:?} escaped stratum {}", i + 1));
            }
        }
        groups.push(pts);
    }
    Ok(StrataSamples { groups, beyond: 0, proposals })
}

/// Exactly `counts[i]` samples per stratum of an empirical stratification by
/// rejection: `draw` produces points of `f | A_*`, and `key` maps a point to
/// the sort key used to build the strata. Only keys are computed for
/// candidates, never the performance function.
pub fn allocated_by_key(
    strat: &TailStratification,
    counts: &[usize],
    mut draw: impl FnMut(&mut StreamRng, &mut [f64]),
    key: impl Fn(&[f64]) -> SortKey,
    stream: &RngStream,
    max_proposals: u64,
) -> Result<StrataSamples> {
    if counts.len() != strat.m {
        return domain(format!("{} counts given for {} strata", counts.len(), strat.m));
    }
    let d = strat.d;
    let mut groups = vec![PointSet::new(d); strat.m];
    let mut need: usize = counts.iter().sum();
    let mut rng = stream.rng();
    let mut x = vec![0.0; d];
    let mut proposals = 0u64;
    while need > 0 {
        if proposals >= max_proposals {
            let filled: usize = groups.iter().map(PointSet::len).sum();
            return Err(Error::LowAcceptance { rate: filled as f64 / proposals as f64 });
        }
        draw(&mut rng, &mut x);
        proposals += 1;
        if let Stratum::Tail(i) = strat.classify_key(key(&x))? {
            if groups[i - 1].len() < counts[i - 1] {
                groups[i - 1].push(&x);
                need -= 1;
            }
        }
    }
    Ok(StrataSamples { groups, beyond: 0, proposals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stratification::{build_gaussian_radial, build_uniform_norm, VolumeOptions};

    fn norms(p: &PointSet) -> Vec<f64> {
        p.iter().map(|x| NormOrder::L2.norm(x)).collect()
    }

    #[test]
    fn shell_bounds_hold() {
        let r1 = (9.0 + 2.0 * 10f64.ln()).sqrt();
        for scheme in [DesignScheme::Mcs, DesignScheme::Lhs] {
            let p = sample_gaussian_shell(2, 3.0, r1, 5000, &mut RngStream::new(1, 0).rng(), scheme).unwrap();
            assert!(norms(&p).iter().all(|&r| r > 3.0 && r <= r1));
        }
    }

    #[test]
    fn open_shell_tail_fraction() {
        let r1 = (9.0 + 2.0 * 10f64.ln()).sqrt();
        let n = 100_000;
        let p = sample_gaussian_shell(2, 3.0, f64::INFINITY, n, &mut RngStream::new(2, 0).rng(), DesignScheme::Mcs).unwrap();
        let frac = norms(&p).iter().filter(|&&r| r > r1).count() as f64 / n as f64;
        assert!((frac - 0.1).abs() < 3.0 * (0.09 / n as f64).sqrt());
    }

    #[test]
    fn high_dimension_second_moment() {
        let n = 2000;
        let p = sample_gaussian_shell(1000, 0.0, f64::INFINITY, n, &mut RngStream::new(3, 0).rng(), DesignScheme::Mcs).unwrap();
        let mean = p.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
        assert!((mean - 1000.0).abs() < 3.0 * (2000.0 / n as f64).sqrt());
    }

    #[test]
    fn radius_ks_against_truncated_chi() {
        let (d, lo, hi) = (5, 1.5, 3.5);
        let n = 100_000;
        let p = sample_gaussian_shell(d, lo, hi, n, &mut RngStream::new(4, 0).rng(), DesignScheme::Mcs).unwrap();
        let mut r = norms(&p);
        r.sort_by(f64::total_cmp);
        let (f_lo, f_hi) = (chi_cdf(lo, d).unwrap(), chi_cdf(hi, d).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &v) in r.iter().enumerate() {
            let f = (chi_cdf(v, d).unwrap() - f_lo) / (f_hi - f_lo);
            ks = ks.max((f - i as f64 / n as f64).abs()).max((f - (i + 1) as f64 / n as f64).abs());
        }
        // Kolmogorov critical value at the 0.1% level.
        assert!(ks < 1.949 / (n as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn lhs_radius_stratifies_probability() {
        let n = 100;
        let p = sample_gaussian_shell(3, 0.0, 2.0, n, &mut RngStream::new(5, 0).rng(), DesignScheme::Lhs).unwrap();
        let f_hi = chi_cdf(2.0, 3).unwrap();
        let mut bins = vec![0usize; n];
        for r in norms(&p) {
            let u = chi_cdf(r, 3).unwrap() / f_hi;
            bins[((u * n as f64) as usize).min(n - 1)] += 1;
        }
        assert!(bins.iter().all(|&b| b == 1));
    }

    #[test]
    fn uniform_linf_shell() {
        let s = sample_uniform_shell(2, NormOrder::Linf, 0.9, 1.0, 1000, &mut RngStream::new(6, 0).rng()).unwrap();
        assert!(s.points.iter().all(|x| {
            let r = NormOrder::Linf.norm(x);
            r > 0.9 && r <= 1.0
        }));
        assert!((s.acceptance - 0.19).abs() < 0.03);
    }

    #[test]
    fn uniform_l1_shell_probability() {
        let lam = 2.0 - 0.2f64.sqrt();
        let n = 100_000;
        let mut rng = RngStream::new(7, 0).rng();
        let s = sample_uniform_shell(2, NormOrder::L1, 0.0, 2.0, n, &mut rng).unwrap();
        let frac = s.points.iter().filter(|x| NormOrder::L1.norm(x) > lam).count() as f64 / n as f64;
        assert!((frac - 0.1).abs() < 3.0 * (0.09 / n as f64).sqrt());
    }

    #[test]
    fn uniform_l2_mean_norm_matches_grid() {
        let lam = 1.11501;
        let n = 50_000;
        let s = sample_uniform_shell(2, NormOrder::L2, 0.0, lam, n, &mut RngStream::new(8, 0).rng()).unwrap();
        let r = norms(&s.points);
        let mean = r.iter().sum::<f64>() / n as f64;
        let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let g = 1000;
        let h = 1.0 / g as f64;
        let (mut sum, mut cnt) = (0.0, 0usize);
        for i in 0..g {
            for j in 0..g {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                let rr = (x * x + y * y).sqrt();
                if rr <= lam {
                    sum += rr;
                    cnt += 1;
                }
            }
        }
        let oracle = sum / cnt as f64;
        assert!((mean - oracle).abs() < 3.0 * sd / (n as f64).sqrt() + 1e-4);
    }

    #[test]
    fn narrow_shell_switches_proposal() {
        // The outer l2 shell of a 10-cube is far too thin for cube rejection.
        let s = sample_uniform_shell(10, NormOrder::L2, 0.2, 0.25, 200, &mut RngStream::new(9, 0).rng()).unwrap();
        assert!(s.points.iter().all(|x| {
            let r = NormOrder::L2.norm(x);
            r > 0.2 && r <= 0.25
        }));
        assert!(s.acceptance < 0.5);
    }

    #[test]
    fn unreachable_shell_errors() {
        let r = sample_uniform_shell(30, NormOrder::L2, 5.4, 5.45, 10, &mut RngStream::new(10, 0).rng());
        assert!(matches!(r, Err(Error::LowAcceptance { .. })));
    }

    #[test]
    fn pool_counts_chi_square() {
        let strat = build_gaussian_radial(2, 3.0, 0.1, 3, true).unwrap();
        let n = 100_000;
        let pool = sample_a_star(&strat, n, &mut RngStream::new(11, 0).rng(), DesignScheme::Mcs).unwrap();
        let s = proportional_pool(&strat, &pool).unwrap();
        let counts = s.counts();
        assert_eq!(counts.iter().sum::<usize>(), n);
        let chi2: f64 = counts
            .iter()
            .zip(&strat.strata_probs)
            .map(|(&c, &p)| {
                let e = n as f64 * p / strat.prob_a_star;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // Two degrees of freedom, 0.1% level.
        assert!(chi2 < 13.816, "chi2 {chi2}");
    }

    #[test]
    fn allocated_counts_and_membership() {
        let strat = build_gaussian_radial(3, 2.0, 0.1, 4, false).unwrap();
        let s = allocated_samples(&strat, &[10, 0, 7, 3], &RngStream::new(12, 0), DesignScheme::Lhs).unwrap();
        assert_eq!(s.counts(), vec![10, 0, 7, 3]);
        let u = build_uniform_norm(2, NormOrder::L1, 0.3, 0.2, 3, true, &VolumeOptions::default()).unwrap();
        let s = allocated_samples(&u, &[50, 50, 50], &RngStream::new(13, 0), DesignScheme::Mcs).unwrap();
        assert_eq!(s.counts(), vec![50, 50, 50]);
    }

    #[test]
    fn deterministic_given_stream() {
        let strat = build_gaussian_radial(2, 1.0, 0.2, 3, false).unwrap();
        let a = allocated_samples(&strat, &[5, 5, 5], &RngStream::new(14, 2), DesignScheme::Lhs).unwrap();
        let b = allocated_samples(&strat, &[5, 5, 5], &RngStream::new(14, 2), DesignScheme::Lhs).unwrap();
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #[test]
        fn shells_respect_bounds(d in 1usize..40, lo in 0.0f64..6.0, width in 0.01f64..3.0, seed: u64, lhs: bool) {
            let scheme = if lhs { DesignScheme::Lhs } else { DesignScheme::Mcs };
            let hi = lo + width;
            if let Ok(p) = sample_gaussian_shell(d, lo, hi, 20, &mut RngStream::new(seed, 0).rng(), scheme) {
                for r in norms(&p) {
                    proptest::prop_assert!(r > lo && r <= hi * (1.0 + 1e-12));
                }
            }
        }
    }
}
