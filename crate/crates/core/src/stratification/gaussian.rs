use super::{check_common, geometric_probs, Scheme, TailStratification};
use crate::error::{domain, Result};
use crate::probmath::{chi_sf, chi_sf_inv};

/// Radial shells for `d` independent standard normals.
///
/// Boundaries are placed in survival space, `1 - F_χ(r_i) = p0^i (1 - F_χ(r_0))`,
/// which is the same condition as `F_χ(r_i) = F_χ(r_0) + (1 - p0^i)(1 - F_χ(r_0))`
/// without the cancellation near 1.
pub fn build_gaussian_radial(d: usize, r0: f64, p0: f64, m: usize, unbiased_tail: bool) -> Result<TailStratification> {
    check_common(d, p0, m)?;
    if !(r0 >= 0.0) || r0.is_infinite() {
        return domain(format!("r0 must be finite and non-negative, got {r0}"));
    }
    let tail0 = chi_sf(r0, d)?;
    if tail0 <= 0.0 {
        return domain(format!("P(A_*) underflows for r0 = {r0} in {d} dimensions"));
    }
    let n_outer = if unbiased_tail { m - 1 } else { m };
    let mut radii = Vec::with_capacity(n_outer + 1);
    radii.push(r0);
    let mut q = tail0;
    for _ in 0..n_outer {
        q *= p0;
        if q <= 0.0 {
            return domain("stratum boundary probability underflows; reduce m or raise p0");
        }
        let r = chi_sf_inv(q, d)?;
        if !(r > *radii.last().unwrap()) {
            return domain(format!("radii not strictly increasing at r = {r}"));
        }
        radii.push(r);
    }
    Ok(TailStratification {
        scheme: Scheme::GaussianRadial { radii },
        d,
        p0,
        m,
        prob_a_star: tail0,
        strata_probs: geometric_probs(p0, m, tail0, unbiased_tail),
        unbiased_tail,
    })
}
