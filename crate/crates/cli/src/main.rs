use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tailstrat::benchmarks::{by_name, registry, Benchmark};
use tailstrat::designpoint::{multi_start_design_point, DesignPointOptions};
use tailstrat::estimator::AllocationStrategy;
use tailstrat::harness::{
    self, bias_study, convergence_study, matched_budget, write_csv, Budget, EstimatorSpec, ExperimentConfig,
    NullSpec, TssSpec, WORKERS_ENV,
};
use tailstrat::probmath::RngStream;
use tailstrat::sampling::DesignScheme;
use tailstrat::sus::SusOptions;

#[derive(Parser)]
#[command(name = "tailstrat", version, about = "Rare-event failure probabilities by tail stratified sampling")]
struct Cli {
    /// Worker threads for trials (defaults to all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Sample size or comma-separated sweep.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        /// neyman, proportional or equal.
        #[arg(long)]
        allocation: Option<String>,
        /// mcs or lhs.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Normalized-error percentiles of TSS against the number of strata.
    BiasStudy {
        benchmark: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 3000)]
        per_stratum_n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// CoV against N for a set of estimators, with log-log slopes.
    Convergence {
        benchmark: String,
        /// Any of tss, tss_lhs, tss_unbiased, sus, mcs.
        #[arg(long, value_delimiter = ',', default_value = "tss,sus")]
        estimators: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "300,1000,3000,10000")]
        n: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// SuS, then TSS at SuS's mean evaluation count.
    Compare {
        benchmark: String,
        /// SuS samples per level.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the benchmark registry as CSV.
    ListBenchmarks,
    /// Multi-start design-point search.
    DesignPoint {
        benchmark: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        starts: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (directory for `compare`); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn estimator_from(name: &str) -> Result<EstimatorSpec> {
    Ok(match name {
        "tss" => EstimatorSpec::Tss(TssSpec::default()),
        "tss_lhs" => EstimatorSpec::Tss(TssSpec { scheme: DesignScheme::Lhs, ..TssSpec::default() }),
        "tss_unbiased" => EstimatorSpec::TssUnbiased(TssSpec::default()),
        "tss_ml" => EstimatorSpec::Tss(TssSpec { null: NullSpec::CableArea, ..TssSpec::default() }),
        "sus" => EstimatorSpec::Sus(SusOptions::default()),
        "mcs" => EstimatorSpec::Mcs { scheme: DesignScheme::Mcs },
        "mcs_lhs" => EstimatorSpec::Mcs { scheme: DesignScheme::Lhs },
        _ => bail!("unknown estimator '{name}'"),
    })
}

fn parse_scheme(s: &str) -> Result<DesignScheme> {
    match s {
        "mcs" => Ok(DesignScheme::Mcs),
        "lhs" => Ok(DesignScheme::Lhs),
        _ => bail!("unknown sampling scheme '{s}'"),
    }
}

fn emit<T: serde::Serialize>(rows: &[T], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => write_csv(p, rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn benchmark(name: &str) -> Result<Benchmark> {
    Ok(by_name(name)?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, trials, n, output, p0, m, allocation, scheme } => {
            let mut c = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(t) = trials {
                c.trials = t;
            }
            if let Some(n) = n {
                c.n = if n.len() == 1 { Budget::One(n[0]) } else { Budget::Sweep(n) };
            }
            if output.is_some() {
                c.output = output;
            }
            match &mut c.estimator {
                EstimatorSpec::Tss(t) | EstimatorSpec::TssUnbiased(t) => {
                    if let Some(v) = p0 {
                        t.p0 = v;
                    }
                    if let Some(v) = m {
                        t.m = v;
                    }
                    if let Some(a) = allocation {
                        t.allocation = a.parse::<AllocationStrategy>()?;
                    }
                    if let Some(s) = scheme {
                        t.scheme = parse_scheme(&s)?;
                    }
                }
                EstimatorSpec::Sus(o) => {
                    if let Some(v) = p0 {
                        o.p0 = v;
                    }
                }
                EstimatorSpec::Mcs { scheme: s } => {
                    if let Some(v) = scheme {
                        *s = parse_scheme(&v)?;
                    }
                }
            }
            let reports = harness::run(&c)?;
            let summaries: Vec<_> = reports.into_iter().map(|r| r.summary).collect();
            println!("{}", serde_json::to_string_pretty(&summaries)?);
        }
        Command::BiasStudy { benchmark: b, m, per_stratum_n, common } => {
            let rows = bias_study(benchmark(&b)?, &m, per_stratum_n, common.trials, common.seed, &TssSpec::default())?;
            emit(&rows, common.output.as_deref())?;
        }
        Command::Convergence { benchmark: b, estimators, n, common } => {
            let specs = estimators.iter().map(|e| estimator_from(e)).collect::<Result<Vec<_>>>()?;
            let (rows, fits) = convergence_study(benchmark(&b)?, &specs, &n, common.trials, common.seed)?;
            emit(&rows, common.output.as_deref())?;
            for f in fits {
                match f.slope {
                    Some(s) => eprintln!("{}: slope {s:.3} over {} points", f.estimator, f.points),
                    None => eprintln!("{}: no slope ({} points with a finite CoV)", f.estimator, f.points),
                }
            }
        }
        Command::Compare { benchmark: b, n, common } => {
            let bench = benchmark(&b)?;
            let cmp = matched_budget(bench, n, SusOptions::default(), TssSpec::default(), common.trials, common.seed)?;
            if let Some(dir) = &common.output {
                harness::write_report(&cmp.sus, &dir.join("sus"))?;
                if let Some(t) = &cmp.tss {
                    harness::write_report(t, &dir.join("tss"))?;
                }
            }
            println!("{}", serde_json::to_string_pretty(&cmp_summary(&cmp))?);
        }
        Command::ListBenchmarks => emit(&registry(), None)?,
        Command::DesignPoint { benchmark: b, seed, starts } => {
            let bench = benchmark(&b)?;
            let mut opts = DesignPointOptions::default();
            if let Some(s) = starts {
                opts.n_starts = s;
            }
            let r = multi_start_design_point(&bench, &RngStream::new(seed, 0), &opts)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}

fn cmp_summary(c: &harness::MatchedComparison) -> serde_json::Value {
    serde_json::json!({
        "sus": c.sus.summary,
        "tss": c.tss.as_ref().map(|t| &t.summary),
        "n_tss": c.n_tss,
        "sus_converged": c.sus_converged(),
        "cov_ratio": c.cov_ratio(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        std::env::set_var(WORKERS_ENV, w.to_string());
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
