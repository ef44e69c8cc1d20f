//! Benchmark performance functions with reference failure probabilities.

pub mod analytic;
pub mod buckling;
pub mod cable;
pub mod cantilever;
pub mod sdof;

use serde::{Deserialize, Serialize};

pub use analytic::{black_swan_exact, black_swan_mass_beyond};
pub use buckling::{buckling_response, BarParams, BucklingResponse};
pub use cable::{calibrate_load, cable_oracle, Cable, CableTailSampler};
pub use cantilever::{calibrate_limit, Cantilever};
pub use sdof::{DampingConvention, Sdof};

use crate::error::{Error, Result};
use crate::estimator::{mcs_estimate, FailureEstimate};
use crate::limit_state::PerformanceFunction;
use crate::model::InputModel;
use crate::probmath::{RngStream, StreamRng};
use crate::sampling::DesignScheme;

/// A performance function in standard normal space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Benchmark {
    WavyCircle,
    WavyLine,
    AlternatingDomains,
    FourBranch,
    Metaball,
    BlackSwan,
    Rastrigin,
    Buckling,
    Cantilever(Cantilever),
    Sdof(Sdof),
    Cable(Cable),
}

/// Where a reference failure probability comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefSource {
    /// Published brute-force Monte Carlo value.
    Published,
    /// Closed form.
    Analytic,
    /// Computed here by a cheap exact-law oracle.
    Oracle,
}

impl RefSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            RefSource::Published => "published",
            RefSource::Analytic => "analytic",
            RefSource::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub pf: f64,
    pub source: RefSource,
    pub beta: Option<f64>,
}

/// One row of [`registry`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub dim: usize,
    pub reference_pf: f64,
    pub source: RefSource,
    pub reference_beta: Option<f64>,
}

const NAMES: [&str; 16] = [
    "wavy_circle",
    "wavy_line",
    "alternating_domains",
    "four_branch",
    "metaball",
    "black_swan",
    "rastrigin",
    "buckling",
    "cantilever",
    "cantilever_desk",
    "sdof_b020",
    "sdof_b026",
    "sdof_b032",
    "cable",
    "cable_stochastic",
    "cable_desk",
];

/// The seven two-dimensional problems.
pub const ANALYTIC_2D: [&str; 7] =
    ["wavy_circle", "wavy_line", "alternating_domains", "four_branch", "metaball", "black_swan", "rastrigin"];

/// Looks a benchmark up by its registry name.
pub fn by_name(name: &str) -> Result<Benchmark> {
    Ok(match name {
        "wavy_circle" => Benchmark::WavyCircle,
        "wavy_line" => Benchmark::WavyLine,
        "alternating_domains" => Benchmark::AlternatingDomains,
        "four_branch" => Benchmark::FourBranch,
        "metaball" => Benchmark::Metaball,
        "black_swan" => Benchmark::BlackSwan,
        "rastrigin" => Benchmark::Rastrigin,
        "buckling" => Benchmark::Buckling,
        "cantilever" => Benchmark::Cantilever(Cantilever::new(1000)),
        "cantilever_desk" => Benchmark::Cantilever(Cantilever::with_limit(cantilever::DESK_DIM, cantilever::DESK_LIMIT)),
        "sdof_b020" => Benchmark::Sdof(Sdof { b: 0.20, ..Sdof::default() }),
        "sdof_b026" => Benchmark::Sdof(Sdof { b: 0.26, ..Sdof::default() }),
        "sdof_b032" => Benchmark::Sdof(Sdof { b: 0.32, ..Sdof::default() }),
        "cable" => Benchmark::Cable(Cable::deterministic(cable::WIRES, cable::LOAD)),
        "cable_stochastic" => Benchmark::Cable(Cable::stochastic(cable::MIN_WIRES, cable::WIRES, cable::STOCHASTIC_LOAD)),
        "cable_desk" => Benchmark::Cable(Cable::deterministic(cable::DESK_WIRES, cable::DESK_LOAD)),
        _ => return Err(Error::UnknownBenchmark(name.to_string())),
    })
}

/// Every named benchmark with its reference values.
pub fn registry() -> Vec<RegistryEntry> {
    NAMES
        .iter()
        .map(|&name| {
            let b = by_name(name).expect("registered name");
            let r = b.reference().expect("registered benchmarks carry a reference");
            RegistryEntry { name, dim: b.dim(), reference_pf: r.pf, source: r.source, reference_beta: r.beta }
        })
        .collect()
}

fn published(pf: f64, beta: Option<f64>) -> Option<Reference> {
    Some(Reference { pf, source: RefSource::Published, beta })
}

impl Benchmark {
    pub fn name(&self) -> String {
        match self {
            Benchmark::WavyCircle => "wavy_circle".into(),
            Benchmark::WavyLine => "wavy_line".into(),
            Benchmark::AlternatingDomains => "alternating_domains".into(),
            Benchmark::FourBranch => "four_branch".into(),
            Benchmark::Metaball => "metaball".into(),
            Benchmark::BlackSwan => "black_swan".into(),
            Benchmark::Rastrigin => "rastrigin".into(),
            Benchmark::Buckling => "buckling".into(),
            Benchmark::Cantilever(c) if c.limit == cantilever::DEFLECTION_LIMIT => format!("cantilever_d{}", c.dim),
            Benchmark::Cantilever(c) => format!("cantilever_d{}_limit{}", c.dim, c.limit),
            Benchmark::Sdof(s) => format!("sdof_b{:03}", (s.b * 100.0).round() as i64),
            Benchmark::Cable(c) if c.stochastic => format!("cable_stochastic_n{}", c.n_wires),
            Benchmark::Cable(c) => format!("cable_n{}", c.n_wires),
        }
    }

    /// Reference failure probability, when one is known for these parameters.
    pub fn reference(&self) -> Option<Reference> {
        match self {
            Benchmark::WavyCircle => published(2.582e-3, Some(3.0)),
            Benchmark::WavyLine => published(1.217e-6, Some(4.36)),
            Benchmark::AlternatingDomains => published(5.266e-4, Some(3.26)),
            Benchmark::FourBranch => published(2.222e-3, Some(3.0)),
            Benchmark::Metaball => published(1.129e-5, Some(4.26)),
            Benchmark::BlackSwan => {
                Some(Reference { pf: black_swan_exact(), source: RefSource::Analytic, beta: Some(5.38) })
            }
            Benchmark::Rastrigin => published(7.299e-2, Some(0.64)),
            Benchmark::Buckling => published(2.424e-5, None),
            Benchmark::Cantilever(c) if c.dim == 1000 && c.limit == cantilever::DEFLECTION_LIMIT => {
                published(1.782e-3, None)
            }
            Benchmark::Cantilever(c) if c.dim == cantilever::DESK_DIM && c.limit == cantilever::DESK_LIMIT => {
                Some(Reference { pf: 1.782e-3, source: RefSource::Oracle, beta: None })
            }
            Benchmark::Cantilever(_) => None,
            Benchmark::Sdof(s) if s.dim == sdof::DIM && s.dt == sdof::DT && s.damping == DampingConvention::AsPrinted => {
                [(0.20, 5.569e-2), (0.26, 5.283e-3), (0.32, 2.727e-4)]
                    .iter()
                    .find(|(b, _)| (s.b - b).abs() < 1e-12)
                    .and_then(|&(_, pf)| published(pf, None))
            }
            Benchmark::Sdof(_) => None,
            Benchmark::Cable(c) if !c.stochastic && c.n_wires == cable::WIRES && c.load == cable::LOAD => {
                published(1.709e-4, None)
            }
            Benchmark::Cable(c)
                if c.stochastic
                    && c.n_wires == cable::WIRES
                    && c.n_wires_min == cable::MIN_WIRES
                    && c.load == cable::STOCHASTIC_LOAD =>
            {
                published(2.587e-4, None)
            }
            Benchmark::Cable(c) if !c.stochastic && c.n_wires == cable::DESK_WIRES && c.load == cable::DESK_LOAD => {
                Some(Reference { pf: 1e-4, source: RefSource::Oracle, beta: None })
            }
            Benchmark::Cable(_) => None,
        }
    }

    pub fn model(&self) -> InputModel {
        InputModel::StandardNormal { dim: self.dim() }
    }

    /// Evaluates `g` with a deterministic latent stream; stochastic
    /// benchmarks should go through [`PerformanceFunction::eval`].
    pub fn g(&self, x: &[f64]) -> f64 {
        self.eval(x, &mut RngStream::new(0, 0).rng())
    }
}

impl PerformanceFunction for Benchmark {
    fn dim(&self) -> usize {
        match self {
            Benchmark::Buckling => 7,
            Benchmark::Cantilever(c) => c.dim,
            Benchmark::Sdof(s) => s.dim,
            Benchmark::Cable(c) => c.dim(),
            _ => 2,
        }
    }

    fn eval(&self, x: &[f64], latent: &mut StreamRng) -> f64 {
        match self {
            Benchmark::WavyCircle => analytic::wavy_circle(x),
            Benchmark::WavyLine => analytic::wavy_line(x),
            Benchmark::AlternatingDomains => analytic::alternating_domains(x),
            Benchmark::FourBranch => analytic::four_branch(x),
            Benchmark::Metaball => analytic::metaball(x),
            Benchmark::BlackSwan => analytic::black_swan(x),
            Benchmark::Rastrigin => analytic::rastrigin(x),
            Benchmark::Buckling => buckling::buckling(x),
            Benchmark::Cantilever(c) => c.g(x),
            Benchmark::Sdof(s) => s.g(x),
            Benchmark::Cable(c) => c.g(x, latent),
        }
    }

    fn is_stochastic(&self) -> bool {
        matches!(self, Benchmark::Cable(c) if c.stochastic)
    }
}

/// Brute-force reference: plain Monte Carlo with `n` samples on `stream`.
/// Cables use the reduced exact-law oracle, which draws the same failure
/// indicator law at a fraction of the cost.
pub fn reference_oracle(bench: &Benchmark, n: usize, stream: &RngStream) -> Result<FailureEstimate> {
    match bench {
        Benchmark::Cable(c) => cable_oracle(c, n, stream),
        _ => mcs_estimate(bench, &bench.model(), n, stream, DesignScheme::Mcs),
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        by_name(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let reg = registry();
        assert_eq!(reg.len(), NAMES.len());
        let bs = reg.iter().find(|e| e.name == "black_swan").unwrap();
        assert_eq!(bs.dim, 2);
        assert_eq!(bs.source, RefSource::Analytic);
        assert!(matches!(by_name("nope"), Err(Error::UnknownBenchmark(_))));
        assert_eq!(by_name("cable_stochastic").unwrap().dim(), 1001);
        assert_eq!(by_name("buckling").unwrap().dim(), 7);
    }

    #[test]
    fn serde_round_trip() {
        for name in NAMES {
            let b = by_name(name).unwrap();
            let s = serde_json::to_string(&b).unwrap();
            assert_eq!(serde_json::from_str::<Benchmark>(&s).unwrap(), b, "{s}");
        }
        let b: Benchmark = serde_json::from_str(r#"{"name":"sdof","b":0.2}"#).unwrap();
        assert_eq!(b.reference().unwrap().pf, 5.569e-2);
    }

    #[test]
    fn only_stochastic_cable_is_stochastic() {
        for name in NAMES {
            assert_eq!(by_name(name).unwrap().is_stochastic(), name == "cable_stochastic");
        }
    }

    #[test]
    fn black_swan_identity() {
        let want = crate::probmath::std_normal_sf(2.0) * crate::probmath::std_normal_sf(5.0);
        assert_eq!(by_name("black_swan").unwrap().reference().unwrap().pf, want);
        assert!((want / 6.521e-9 - 1.0).abs() < 5e-4);
    }

    #[test]
    fn wavy_circle_oracle() {
        let b = Benchmark::WavyCircle;
        let e = reference_oracle(&b, 400_000, &RngStream::new(1, 0)).unwrap();
        assert!((e.p_hat - 2.582e-3).abs() < 3.0 * e.var_hat.sqrt());
    }
}
