//! Command-line front end.
//!
//! Every capability is exposed as a subcommand emitting plot-ready CSV or
//! JSON, to a file via `--out` or to stdout. Exit codes: 0 success, 1 usage
//! error, 2 domain error (guard violations, bad files).
//!
//! Distribution specs are shell-friendly strings:
//! `exp:mu=2`, `sexp:delta=0.05,mu=1`, `pareto:sigma=1,alpha=3`,
//! `empirical:file=PATH`.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assignment::{balanced_plan, covering_probability, BatchingPlan};
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::optimizer::{
    pareto_alpha_star, pareto_regime_cov, sexp_fast_b, sexp_regime_cov, sexp_regime_mean, sweep,
    Method, Metric, Regime,
};
use crate::sim_engine::{compare_schemes, simulate, SimConfig};
use crate::traces::{durations_by_job, empirical_ccdf_points, load_trace, resample_experiment};

#[derive(Debug, Parser)]
#[command(name = "redsim", version, about = "Replication planning for straggler mitigation")]
pub struct Cli {
    #[command(subcommand)]
    command: CliCommand,

    /// Master seed; every run with the same seed is bit-reproducible.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Monte Carlo replications.
    #[arg(long, global = true, default_value_t = 100_000)]
    reps: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Mean,
    Cov,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mean => Metric::Mean,
            MetricArg::Cov => Metric::Cov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Analytic,
    Simulate,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Closed-form mean and CoV of the job compute time.
    Analyze {
        /// Distribution spec, e.g. sexp:delta=0.05,mu=1
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: usize,
    },
    /// Monte Carlo estimate for a balanced plan (or a plan file).
    Simulate {
        dist: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        /// JSON plan file (1-based task/batch indices); overrides --n/--b.
        #[arg(long, conflicts_with_all = ["n", "b"])]
        plan: Option<PathBuf>,
        /// Keep raw samples in the output (JSON only).
        #[arg(long)]
        samples: bool,
    },
    /// Evaluate the metric at every feasible B.
    Sweep {
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Mean)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
    },
    /// Argmin over the spectrum plus the regime classification.
    Optimize {
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::Mean)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
    },
    /// Probability that a uniformly random assignment covers all batches.
    Covering {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: usize,
    },
    /// Empirical CCDF of task durations from a trace file.
    TraceCcdf {
        #[arg(long)]
        file: PathBuf,
        /// Restrict to one job id (default: pool all jobs).
        #[arg(long)]
        job: Option<String>,
    },
    /// Bootstrap the batching experiment from a trace file.
    TraceExperiment {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        job: Option<String>,
    },
}

/// Parses the `kind:key=value,...` distribution mini-grammar.
pub fn parse_dist_spec(spec: &str) -> Result<ServiceDistribution> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut pairs = Vec::new();
    if !rest.is_empty() {
        for part in rest.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("bad distribution spec field {part:?}"))
            })?;
            pairs.push((k.trim(), v.trim()));
        }
    }
    let get = |key: &str| -> Result<f64> {
        pairs
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::InvalidParameter(format!("{kind} spec needs {key}=...")))?
            .1
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{key} is not a number")))
    };
    match kind {
        "exp" => ServiceDistribution::exp(get("mu")?),
        "sexp" => ServiceDistribution::sexp(get("delta")?, get("mu")?),
        "pareto" => ServiceDistribution::pareto(get("sigma")?, get("alpha")?),
        "empirical" => {
            let path = pairs
                .iter()
                .find(|(k, _)| *k == "file")
                .ok_or_else(|| Error::InvalidParameter("empirical spec needs file=PATH".into()))?
                .1;
            let load = load_trace(fs::File::open(path)?)?;
            let samples: Vec<f64> = durations_by_job(&load.records)
                .into_values()
                .flat_map(|j| j.samples)
                .collect();
            ServiceDistribution::empirical(samples)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown distribution kind {other:?} (exp, sexp, pareto, empirical)"
        ))),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Serialize)]
struct AnalyzeReport {
    n: usize,
    b: usize,
    mean: f64,
    cov: Option<f64>,
}

fn run_analyze(dist: &ServiceDistribution, n: usize, b: usize, format: Format) -> Result<String> {
    let (mean, cov) = match dist {
        ServiceDistribution::Exp { mu } => (
            crate::analytics::sexp_mean_t(n, b, 0.0, *mu)?,
            Some(crate::analytics::sexp_cov_t(n, b, 0.0, *mu)?),
        ),
        ServiceDistribution::SExp { delta, mu } => (
            crate::analytics::sexp_mean_t(n, b, *delta, *mu)?,
            Some(crate::analytics::sexp_cov_t(n, b, *delta, *mu)?),
        ),
        ServiceDistribution::Pareto { sigma, alpha } => {
            let mean = crate::analytics::pareto_mean_t(n, b, *sigma, *alpha)?;
            // a finite mean with infinite variance is reportable
            let cov = match crate::analytics::pareto_cov_t(n, b, *alpha) {
                Ok(c) => Some(c),
                Err(Error::InfiniteMoment { .. }) => None,
                Err(e) => return Err(e),
            };
            (mean, cov)
        }
        ServiceDistribution::Empirical { .. } => {
            return Err(Error::NoClosedForm(
                "empirical distribution; use the simulate subcommand".into(),
            ))
        }
    };
    let report = AnalyzeReport { n, b, mean, cov };
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let cov = report.cov.map(|c| c.to_string()).unwrap_or_default();
            format!("n,b,mean,cov\n{n},{b},{mean},{cov}\n")
        }
    })
}

fn run_simulate(
    dist: &ServiceDistribution,
    plan: &BatchingPlan,
    config: &SimConfig,
    format: Format,
) -> Result<String> {
    let result = simulate(plan, dist, config)?;
    Ok(match format {
        Format::Json => result.to_json_string()? + "\n",
        Format::Csv => format!(
            "mean,std,cov,q50,q90,q99,replications\n{},{},{},{},{},{},{}\n",
            result.mean,
            result.std,
            result.cov.map(|c| c.to_string()).unwrap_or_default(),
            result.q50,
            result.q90,
            result.q99,
            result.replications
        ),
    })
}

#[derive(Serialize)]
struct OptimizeReport {
    n: usize,
    metric: Metric,
    argmin_b: usize,
    redundancy: f64,
    value: f64,
    regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    sexp_regime_mean: Option<crate::optimizer::MeanRegimeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sexp_fast_b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sexp_regime_cov: Option<crate::optimizer::CovRegimeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pareto_alpha_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pareto_regime_cov: Option<crate::optimizer::ParetoCovReport>,
}

fn run_optimize(
    dist: &ServiceDistribution,
    n: usize,
    metric: Metric,
    method: &Method,
    format: Format,
) -> Result<String> {
    let sw = sweep(n, dist, metric, method)?;
    let mut report = OptimizeReport {
        n,
        metric,
        argmin_b: sw.argmin_b,
        redundancy: n as f64 / sw.argmin_b as f64,
        value: sw.argmin_value(),
        regime: sw.regime,
        sexp_regime_mean: None,
        sexp_fast_b: None,
        sexp_regime_cov: None,
        pareto_alpha_star: None,
        pareto_regime_cov: None,
    };
    let (delta, mu) = match dist {
        ServiceDistribution::Exp { mu } => (Some(0.0), Some(*mu)),
        ServiceDistribution::SExp { delta, mu } => (Some(*delta), Some(*mu)),
        _ => (None, None),
    };
    if let (Some(delta), Some(mu)) = (delta, mu) {
        match metric {
            Metric::Mean => {
                let regime = sexp_regime_mean(n, delta, mu)?;
                if regime.label == Regime::Interior {
                    report.sexp_fast_b = Some(sexp_fast_b(n, delta, mu)?);
                }
                report.sexp_regime_mean = Some(regime);
            }
            Metric::Cov => report.sexp_regime_cov = Some(sexp_regime_cov(n, delta, mu)?),
        }
    }
    if let ServiceDistribution::Pareto { sigma, alpha } = dist {
        match metric {
            Metric::Mean => report.pareto_alpha_star = Some(pareto_alpha_star(n)?),
            Metric::Cov => report.pareto_regime_cov = Some(pareto_regime_cov(n, *sigma, *alpha)?),
        }
    }
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let regime = serde_json::to_value(report.regime)?;
            format!(
                "n,metric,argmin_b,redundancy,value,regime\n{},{},{},{},{},{}\n",
                report.n,
                serde_json::to_value(report.metric)?.as_str().unwrap(),
                report.argmin_b,
                report.redundancy,
                report.value,
                regime.as_str().unwrap()
            )
        }
    })
}

fn pooled_durations(file: &PathBuf, job: &Option<String>) -> Result<(Vec<f64>, usize)> {
    let load = load_trace(fs::File::open(file)?)?;
    let by_job = durations_by_job(&load.records);
    let samples = match job {
        Some(id) => by_job
            .get(id)
            .ok_or_else(|| Error::Mismatch(format!("job {id:?} not present in trace")))?
            .samples
            .clone(),
        None => by_job.into_values().flat_map(|j| j.samples).collect(),
    };
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok((samples, load.dropped))
}

fn run_trace_ccdf(samples: &[f64], format: Format) -> Result<String> {
    let points = empirical_ccdf_points(samples)?;
    Ok(match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Point {
                x: f64,
                ccdf: f64,
            }
            let rows: Vec<Point> = points.into_iter().map(|(x, ccdf)| Point { x, ccdf }).collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
        Format::Csv => {
            let mut out = String::from("x,ccdf\n");
            for (x, ccdf) in points {
                out.push_str(&format!("{},{}\n", sig9(x), sig9(ccdf)));
            }
            out
        }
    })
}

/// Parses arguments and runs one invocation; `Ok` carries nothing, errors
/// map to exit code 2 in `main`.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // ignore the error if a pool already exists (tests call run() twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config = SimConfig::new(cli.reps, cli.seed)?;
    let output = match &cli.command {
        CliCommand::Analyze { dist, n, b } => {
            run_analyze(&parse_dist_spec(dist)?, *n, *b, cli.format)?
        }
        CliCommand::Simulate { dist, n, b, plan, samples } => {
            let plan = match plan {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => {
                    let (n, b) = n.zip(*b).ok_or_else(|| {
                        Error::InvalidParameter("simulate needs --plan or both --n and --b".into())
                    })?;
                    balanced_plan(n, b)?
                }
            };
            let config = config.retain_samples(*samples && cli.format == Format::Json);
            run_simulate(&parse_dist_spec(dist)?, &plan, &config, cli.format)?
        }
        CliCommand::Sweep { dist, n, metric, method } => {
            let method = match method {
                MethodArg::Analytic => Method::Analytic,
                MethodArg::Simulate => Method::Simulate(config),
            };
            let sw = sweep(*n, &parse_dist_spec(dist)?, (*metric).into(), &method)?;
            match cli.format {
                Format::Csv => sw.to_csv_string(),
                Format::Json => sw.to_json_string()? + "\n",
            }
        }
        CliCommand::Optimize { dist, n, metric, method } => {
            let method = match method {
                MethodArg::Analytic => Method::Analytic,
                MethodArg::Simulate => Method::Simulate(config),
            };
            run_optimize(&parse_dist_spec(dist)?, *n, (*metric).into(), &method, cli.format)?
        }
        CliCommand::Covering { n, b } => {
            let p = covering_probability(*n, *b)?;
            match cli.format {
                Format::Csv => format!("{} ({})\n", p.exact, p.value),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Report {
                        n: usize,
                        b: usize,
                        exact: String,
                        value: f64,
                    }
                    serde_json::to_string_pretty(&Report {
                        n: *n,
                        b: *b,
                        exact: p.exact.to_string(),
                        value: p.value,
                    })? + "\n"
                }
            }
        }
        CliCommand::TraceCcdf { file, job } => {
            let (samples, _) = pooled_durations(file, job)?;
            run_trace_ccdf(&samples, cli.format)?
        }
        CliCommand::TraceExperiment { file, n, job } => {
            let (samples, _) = pooled_durations(file, job)?;
            let table = resample_experiment(&samples, *n, &config)?;
            match cli.format {
                Format::Csv => table.to_csv_string(),
                Format::Json => table.to_json_string()? + "\n",
            }
        }
    };
    emit(&cli.out, &output)
}

/// Scheme comparison entry used by integration tests; kept here so the CLI
/// and tests share one plumbing path for coupled runs.
pub fn run_compare(
    plans: &[BatchingPlan],
    dist: &ServiceDistribution,
    config: &SimConfig,
) -> Result<String> {
    let cmp = compare_schemes(plans, dist, config)?;
    Ok(serde_json::to_string_pretty(&cmp)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_spec_grammar() {
        assert!(matches!(
            parse_dist_spec("exp:mu=2").unwrap(),
            ServiceDistribution::Exp { mu } if mu == 2.0
        ));
        assert!(matches!(
            parse_dist_spec("sexp:delta=0.05,mu=1").unwrap(),
            ServiceDistribution::SExp { delta, mu } if delta == 0.05 && mu == 1.0
        ));
        assert!(matches!(
            parse_dist_spec("pareto:sigma=1,alpha=3").unwrap(),
            ServiceDistribution::Pareto { sigma, alpha } if sigma == 1.0 && alpha == 3.0
        ));
        assert!(parse_dist_spec("weibull:k=2").is_err());
        assert!(parse_dist_spec("sexp:delta=0.05").is_err());
        assert!(parse_dist_spec("sexp:delta=abc,mu=1").is_err());
    }

    #[test]
    fn analyze_matches_closed_form() {
        let dist = parse_dist_spec("sexp:delta=0.05,mu=1").unwrap();
        let csv = run_analyze(&dist, 100, 5, Format::Csv).unwrap();
        assert!(csv.contains("3.283333333333333"), "{csv}");

        let pareto = parse_dist_spec("pareto:sigma=1,alpha=5").unwrap();
        let csv = run_analyze(&pareto, 100, 100, Format::Csv).unwrap();
        let mean: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert!((mean - 2.9267509397748075).abs() < 1e-12);

        // infinite mean is a hard error
        let heavy = parse_dist_spec("pareto:sigma=1,alpha=1").unwrap();
        assert!(matches!(
            run_analyze(&heavy, 2, 2, Format::Csv),
            Err(Error::InfiniteMoment { .. })
        ));
    }

    #[test]
    fn covering_format_matches_example() {
        let p = covering_probability(3, 2).unwrap();
        assert_eq!(format!("{} ({})", p.exact, p.value), "3/4 (0.75)");
    }
}
