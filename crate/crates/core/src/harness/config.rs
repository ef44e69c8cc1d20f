use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::designpoint::DesignPointOptions;
use crate::error::{Error, Result};
use crate::estimator::AllocationStrategy;
use crate::limit_state::PerformanceFunction;
use crate::sampling::DesignScheme;
use crate::sus::SusOptions;

/// How the null stratum `A_0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullSpec {
    /// Ball of radius `β` from a multi-start design-point search; falls back
    /// to the registry `β` when the search does not converge.
    #[default]
    DesignPoint,
    /// Ball of a given radius.
    Radius { radius: f64 },
    /// Cable only: total area of the guaranteed strands above `1.05 P0/σ_y`.
    CableArea,
    /// No null stratum; the strata cover the whole space.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TssSpec {
    pub p0: f64,
    pub m: usize,
    pub allocation: AllocationStrategy,
    pub scheme: DesignScheme,
    pub null: NullSpec,
    /// Tail samples used to build empirical strata (cable area null only).
    pub n_build: usize,
}

impl Default for TssSpec {
    fn default() -> Self {
        Self {
            p0: 0.1,
            m: 4,
            allocation: AllocationStrategy::Proportional,
            scheme: DesignScheme::Mcs,
            null: NullSpec::DesignPoint,
            n_build: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Tss(TssSpec),
    /// TSS whose last stratum covers the whole remaining tail.
    TssUnbiased(TssSpec),
    Sus(SusOptions),
    Mcs {
        #[serde(default)]
        scheme: DesignScheme,
    },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Tss(t) | EstimatorSpec::TssUnbiased(t) => {
                let base = if matches!(self, EstimatorSpec::Tss(_)) { "tss" } else { "tss_unbiased" };
                let null = match t.null {
                    NullSpec::DesignPoint => "dp",
                    NullSpec::Radius { .. } => "radius",
                    NullSpec::CableArea => "ml",
                    NullSpec::None => "none",
                };
                format!("{base}_{null}_{}_{}", t.allocation.name(), scheme_name(t.scheme))
            }
            EstimatorSpec::Sus(_) => "sus".into(),
            EstimatorSpec::Mcs { scheme } => format!("mcs_{}", scheme_name(*scheme)),
        }
    }

    pub fn tss(&self) -> Option<&TssSpec> {
        match self {
            EstimatorSpec::Tss(t) | EstimatorSpec::TssUnbiased(t) => Some(t),
            _ => None,
        }
    }
}

fn scheme_name(s: DesignScheme) -> &'static str {
    match s {
        DesignScheme::Mcs => "mcs",
        DesignScheme::Lhs => "lhs",
    }
}

/// A single sample size or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budget {
    One(usize),
    Sweep(Vec<usize>),
}

impl Budget {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Budget::One(n) => vec![*n],
            Budget::Sweep(v) => v.clone(),
        }
    }
}

/// One experiment: an estimator on a benchmark over `trials` seeded trials
/// for each sample size. Trial `t` draws from `RngStream::new(seed, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub estimator: EstimatorSpec,
    pub n: Budget,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub design_point: DesignPointOptions,
}

fn default_trials() -> usize {
    100
}

impl ExperimentConfig {
    pub fn new(benchmark: Benchmark, estimator: EstimatorSpec, n: usize, trials: usize, seed: u64) -> Self {
        Self {
            benchmark,
            estimator,
            n: Budget::One(n),
            trials,
            seed,
            output: None,
            design_point: DesignPointOptions::default(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every parameter; runs before any performance-function call.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let ns = self.n.values();
        if ns.is_empty() || ns.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        let stochastic = self.benchmark.is_stochastic();
        match &self.estimator {
            EstimatorSpec::Tss(t) | EstimatorSpec::TssUnbiased(t) => {
                if !(t.p0 > 0.0 && t.p0 < 1.0) {
                    return bad(format!("p0 must lie in (0, 1), got {}", t.p0));
                }
                if t.m == 0 {
                    return bad("m must be at least 1".into());
                }
                if let Some(&n) = ns.iter().find(|&&n| n < t.m) {
                    return bad(format!("N = {n} is smaller than m = {}", t.m));
                }
                if let AllocationStrategy::General { gamma } = &t.allocation {
                    if gamma.len() != t.m {
                        return bad(format!("{} allocation fractions for {} strata", gamma.len(), t.m));
                    }
                }
                match t.null {
                    NullSpec::Radius { radius } if !(radius >= 0.0 && radius.is_finite()) => {
                        return bad(format!("null radius must be finite and non-negative, got {radius}"));
                    }
                    NullSpec::CableArea => {
                        if !matches!(self.benchmark, Benchmark::Cable(_)) {
                            return bad("the cable area null stratum needs a cable benchmark".into());
                        }
                        if matches!(t.allocation, AllocationStrategy::Neyman { guesses: None }) {
                            return bad("Neyman allocation on empirical strata needs explicit guesses".into());
                        }
                        if t.scheme == DesignScheme::Lhs {
                            return bad("empirical strata are sampled by rejection; use scheme = \"mcs\"".into());
                        }
                    }
                    NullSpec::DesignPoint if stochastic => {
                        return bad("a design-point search needs a deterministic benchmark; give a radius".into());
                    }
                    _ => {}
                }
            }
            EstimatorSpec::Sus(o) => {
                if stochastic {
                    return Err(Error::Unsupported("subset simulation cannot run on a stochastic benchmark".into()));
                }
                if !(o.p0 > 0.0 && o.p0 < 1.0) || o.max_levels == 0 {
                    return bad("SuS needs p0 in (0, 1) and at least one level".into());
                }
                for &n in &ns {
                    let nc = (o.p0 * n as f64).round() as usize;
                    if nc == 0 || n % nc != 0 {
                        return bad(format!("{n} samples per level do not split into chains at p0 = {}", o.p0));
                    }
                }
            }
            EstimatorSpec::Mcs { .. } => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::by_name;

    const EXAMPLE: &str = r#"
trials = 100
seed = 7
n = 4000

[benchmark]
name = "four_branch"

[estimator]
kind = "tss"
p0 = 0.1
m = 4
scheme = "lhs"
allocation = { kind = "proportional" }
null = { kind = "design_point" }
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(c.benchmark, by_name("four_branch").unwrap());
        assert_eq!(c.estimator.tss().unwrap().scheme, DesignScheme::Lhs);
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn sweep_and_parametrized_benchmark() {
        let s = r#"
n = [1000, 2500]
[benchmark]
name = "sdof"
b = 0.2
[estimator]
kind = "sus"
"#;
        let c = ExperimentConfig::from_toml(s).unwrap();
        assert_eq!(c.n.values(), vec![1000, 2500]);
        assert_eq!(c.trials, 100);
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = EXAMPLE.replace("p0 = 0.1", "p0 = 1.5");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = EXAMPLE.replace("four_branch", "no_such");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let sus_on_noise = r#"
n = 1000
[benchmark]
name = "cable"
n_wires = 1000
n_wires_min = 990
load = 192250.0
stochastic = true
[estimator]
kind = "sus"
"#;
        assert!(matches!(ExperimentConfig::from_toml(sus_on_noise), Err(Error::Unsupported(_))));
        let area_on_2d = EXAMPLE.replace("null = { kind = \"design_point\" }", "null = { kind = \"cable_area\" }");
        assert!(matches!(ExperimentConfig::from_toml(&area_on_2d), Err(Error::Config(_))));
    }
}
