use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stratification::TailStratification;

/// Rule for splitting a budget of `N` samples over the tail strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllocationStrategy {
    /// `N_i ∝ P(A_i) sqrt(P(F_i)(1 - P(F_i)))`. Without guesses a pilot run
    /// supplies them.
    Neyman {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        guesses: Option<Vec<f64>>,
    },
    /// `N_i ∝ P(A_i)`.
    Proportional,
    /// `N_i = N / m`.
    Equal,
    /// `N_i = γ_i N`.
    General { gamma: Vec<f64> },
}

impl AllocationStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AllocationStrategy::Neyman { .. } => "neyman",
            AllocationStrategy::Proportional => "proportional",
            AllocationStrategy::Equal => "equal",
            AllocationStrategy::General { .. } => "general",
        }
    }
}

impl std::str::FromStr for AllocationStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neyman" => Ok(AllocationStrategy::Neyman { guesses: None }),
            "proportional" | "prop" => Ok(AllocationStrategy::Proportional),
            "equal" | "eq" => Ok(AllocationStrategy::Equal),
            _ => Err(Error::Config(format!("unknown allocation '{s}' (general allocations need explicit γ)"))),
        }
    }
}

fn check_pf(pf: &[f64], m: usize) -> Result<()> {
    if pf.len() != m {
        return Err(Error::InfeasibleAllocation(format!("{} failure-probability guesses for {m} strata", pf.len())));
    }
    if pf.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InfeasibleAllocation("failure-probability guesses must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Allocation fractions `γ_i` (summing to one).
pub fn fractions(alloc: &AllocationStrategy, strat: &TailStratification) -> Result<Vec<f64>> {
    let m = strat.m;
    let raw: Vec<f64> = match alloc {
        AllocationStrategy::Proportional => strat.strata_probs.clone(),
        AllocationStrategy::Equal => vec![1.0; m],
        AllocationStrategy::General { gamma } => {
            if gamma.len() != m {
                return Err(Error::InfeasibleAllocation(format!("{} fractions for {m} strata", gamma.len())));
            }
            if gamma.iter().any(|g| !(*g > 0.0)) {
                return Err(Error::InfeasibleAllocation("general fractions must be positive".into()));
            }
            let s: f64 = gamma.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InfeasibleAllocation(format!("general fractions sum to {s}, not 1")));
            }
            gamma.clone()
        }
        AllocationStrategy::Neyman { guesses } => {
            let pf = guesses
                .as_ref()
                .ok_or_else(|| Error::InfeasibleAllocation("Neyman allocation needs failure-probability guesses".into()))?;
            check_pf(pf, m)?;
            strat.strata_probs.iter().zip(pf).map(|(w, p)| w * (p * (1.0 - p)).sqrt()).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InfeasibleAllocation("no stratum has positive allocation weight".into()));
    }
    Ok(raw.iter().map(|r| r / total).collect())
}

/// Integer counts summing to `N` by largest-remainder rounding.
///
/// Every stratum with a positive fraction receives at least one sample,
/// taken from the largest count. Neyman strata whose guess is 0 or 1 get none.
pub fn allocate(alloc: &AllocationStrategy, strat: &TailStratification, n: usize) -> Result<Vec<usize>> {
    let gamma = fractions(alloc, strat)?;
    let active = gamma.iter().filter(|&&g| g > 0.0).count();
    if n < active {
        return Err(Error::InfeasibleAllocation(format!("N = {n} cannot cover {active} strata")));
    }
    let exact: Vec<f64> = gamma.iter().map(|g| g * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if gamma[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    for i in 0..counts.len() {
        if gamma[i] > 0.0 && counts[i] == 0 {
            let big = (0..counts.len()).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            counts[big] -= 1;
            counts[i] = 1;
        }
    }
    Ok(counts)
}

/// Closed-form estimator variance for allocation fractions `γ` and true
/// conditional failure probabilities `pf`:
/// `(1/N) Σ P(A_i)² P(F_i)(1 - P(F_i)) / γ_i`.
///
/// A stratum with `γ_i = 0` contributes nothing when its `P(F_i)(1 - P(F_i))`
/// is zero and makes the variance infinite otherwise.
pub fn predicted_variance(alloc: &AllocationStrategy, strat: &TailStratification, pf: &[f64], n: usize) -> Result<f64> {
    check_pf(pf, strat.m)?;
    if n == 0 {
        return Err(Error::InfeasibleAllocation("N must be positive".into()));
    }
    let alloc = match alloc {
        AllocationStrategy::Neyman { guesses: None } => AllocationStrategy::Neyman { guesses: Some(pf.to_vec()) },
        other => other.clone(),
    };
    let gamma = match fractions(&alloc, strat) {
        Ok(g) => g,
        Err(_) if pf.iter().all(|p| p * (1.0 - p) == 0.0) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let mut v = 0.0;
    for ((w, p), g) in strat.strata_probs.iter().zip(pf).zip(&gamma) {
        let s2 = p * (1.0 - p);
        if s2 == 0.0 {
            continue;
        }
        if *g == 0.0 {
            return Ok(f64::INFINITY);
        }
        v += w * w * s2 / g;
    }
    Ok(v / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stratification::build_gaussian_radial;
    use proptest::prelude::*;

    fn strat(m: usize) -> TailStratification {
        build_gaussian_radial(2, 3.0, 0.1, m, false).unwrap()
    }

    #[test]
    fn proportional_4000() {
        let s = strat(4);
        let exact: Vec<f64> = fractions(&AllocationStrategy::Proportional, &s).unwrap().iter().map(|g| g * 4000.0).collect();
        for (e, w) in exact.iter().zip([3600.36, 360.036, 36.0036, 3.60036]) {
            assert!((e - w).abs() < 1e-3);
        }
        assert_eq!(allocate(&AllocationStrategy::Proportional, &s, 4000).unwrap(), vec![3600, 360, 36, 4]);
    }

    #[test]
    fn equal_4000() {
        assert_eq!(allocate(&AllocationStrategy::Equal, &strat(4), 4000).unwrap(), vec![1000; 4]);
    }

    #[test]
    fn neyman_two_strata() {
        let a = AllocationStrategy::Neyman { guesses: Some(vec![0.5, 0.5]) };
        // Weights 1 : 0.1 give 3636.36 / 363.64.
        assert_eq!(allocate(&a, &strat(2), 4000).unwrap(), vec![3636, 364]);
    }

    #[test]
    fn neyman_zero_guess_gets_no_samples() {
        let a = AllocationStrategy::Neyman { guesses: Some(vec![0.0, 0.2, 0.5]) };
        let c = allocate(&a, &strat(3), 1000).unwrap();
        assert_eq!(c[0], 0);
        assert_eq!(c.iter().sum::<usize>(), 1000);
        let z = AllocationStrategy::Neyman { guesses: Some(vec![0.0, 0.0, 1.0]) };
        assert!(matches!(allocate(&z, &strat(3), 1000), Err(Error::InfeasibleAllocation(_))));
    }

    #[test]
    fn minimum_one_per_stratum() {
        let c = allocate(&AllocationStrategy::Proportional, &strat(5), 100).unwrap();
        assert!(c.iter().all(|&v| v >= 1));
        assert_eq!(c.iter().sum::<usize>(), 100);
    }

    #[test]
    fn general_validation() {
        let s = strat(2);
        assert!(allocate(&AllocationStrategy::General { gamma: vec![0.5, 0.6] }, &s, 100).is_err());
        assert!(allocate(&AllocationStrategy::General { gamma: vec![1.0, 0.0] }, &s, 100).is_err());
        assert_eq!(allocate(&AllocationStrategy::General { gamma: vec![0.25, 0.75] }, &s, 100).unwrap(), vec![25, 75]);
    }

    #[test]
    fn zero_pf_zero_variance() {
        let s = strat(4);
        for a in [AllocationStrategy::Proportional, AllocationStrategy::Equal, AllocationStrategy::Neyman { guesses: None }] {
            assert_eq!(predicted_variance(&a, &s, &[0.0; 4], 1000).unwrap(), 0.0);
        }
    }

    #[test]
    fn equal_vs_proportional_sign() {
        let s = strat(4);
        let pf = [1e-4, 1e-3, 1e-2, 0.3];
        let n = 4000;
        let veq = predicted_variance(&AllocationStrategy::Equal, &s, &pf, n).unwrap();
        let vprop = predicted_variance(&AllocationStrategy::Proportional, &s, &pf, n).unwrap();
        // Direct evaluation of the two closed forms with P(A_*) factored out.
        let (p0, m) = (0.1f64, 4usize);
        let pa = s.prob_a_star;
        let mut eq = 0.0;
        let mut prop = 0.0;
        for i in 0..m {
            let a = p0.powi(i as i32) * (1.0 - p0) * pa;
            let var = pf[i] * (1.0 - pf[i]);
            eq += m as f64 * a * a * var / n as f64;
            prop += a * var * (1.0 - p0.powi(m as i32)) * pa / n as f64;
        }
        assert!((veq / eq - 1.0).abs() < 1e-12);
        assert!((vprop / prop - 1.0).abs() < 1e-12);
        let cond: f64 = (0..m)
            .map(|i| {
                let q = p0.powi(i as i32);
                q * pf[i] * (1.0 - pf[i]) * (m as f64 * q * (1.0 - p0) - 1.0)
            })
            .sum();
        // Condition written for the untruncated normalization; with the weights
        // here the sign of (equal - proportional) agrees.
        assert_eq!(veq < vprop, cond < 0.0);
    }

    proptest! {
        #[test]
        fn neyman_is_optimal(pf in proptest::collection::vec(0.0f64..1.0, 4), g in proptest::collection::vec(0.01f64..1.0, 4)) {
            let s = strat(4);
            let total: f64 = g.iter().sum();
            let gamma: Vec<f64> = g.iter().map(|v| v / total).collect();
            let vn = predicted_variance(&AllocationStrategy::Neyman { guesses: None }, &s, &pf, 1000).unwrap();
            let vp = predicted_variance(&AllocationStrategy::Proportional, &s, &pf, 1000).unwrap();
            let ve = predicted_variance(&AllocationStrategy::Equal, &s, &pf, 1000).unwrap();
            let vg = predicted_variance(&AllocationStrategy::General { gamma }, &s, &pf, 1000).unwrap();
            prop_assert!(vn <= vp * (1.0 + 1e-12));
            prop_assert!(vn <= ve * (1.0 + 1e-12));
            prop_assert!(vn <= vg * (1.0 + 1e-12));
        }

        #[test]
        fn counts_sum_to_budget(n in 10usize..100_000, m in 1usize..6, which in 0usize..3) {
            let s = strat(m);
            let a = [AllocationStrategy::Proportional, AllocationStrategy::Equal, AllocationStrategy::Neyman { guesses: Some(vec![0.3; m]) }][which].clone();
            let c = allocate(&a, &s, n).unwrap();
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            prop_assert!(c.iter().all(|&v| v >= 1));
        }
    }
}
