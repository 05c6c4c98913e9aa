//! Monte Carlo evaluation of job compute time for a batching plan.
//!
//! Worker `w` draws one slowdown `tau_w` and finishes its batch at
//! `|batch(w)| * tau_w`. The job completes at the earliest instant when some
//! set of finished batches contains every task exactly once; those candidate
//! sets are the plan's precomputed completion partitions. For replicated
//! non-overlapping plans this reduces to the familiar max-over-batches of
//! min-over-replicas.
//!
//! Determinism contract: replication `r` runs on a private generator seeded
//! from `(seed, r)`, and aggregation sums sorted values, so results are
//! bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::BatchingPlan;
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub replications: u64,
    pub seed: u64,
    pub retain_samples: bool,
}

impl SimConfig {
    pub fn new(replications: u64, seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        Ok(Self { replications, seed, retain_samples: false })
    }

    pub fn retain_samples(mut self, retain: bool) -> Self {
        self.retain_samples = retain;
        self
    }
}

/// Monte Carlo summary of the job compute time `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean: f64,
    pub std: f64,
    /// std/mean; `None` when a single replication leaves it undefined.
    pub cov: Option<f64>,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub replications: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl SimResult {
    pub fn std_err(&self) -> f64 {
        self.std / (self.replications as f64).sqrt()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Raw samples as a single-column CSV.
    pub fn samples_csv(&self) -> Option<String> {
        self.samples.as_ref().map(|samples| {
            let mut out = String::from("job_time\n");
            for s in samples {
                out.push_str(&format!("{s}\n"));
            }
            out
        })
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Private generator for one replication, derived from `(seed, rep)`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ rep))
}

struct PartitionBatch {
    size: f64,
    workers: Vec<usize>,
}

/// Plan lowered into evaluation form: per partition, per batch, the workers
/// racing to finish it.
pub struct CompiledPlan {
    n_workers: usize,
    partitions: Vec<Vec<PartitionBatch>>,
}

impl CompiledPlan {
    pub fn compile(plan: &BatchingPlan) -> Result<Self> {
        if !plan.can_complete() {
            return Err(Error::NonCovering(
                "no worker-backed set of batches covers every task exactly once".into(),
            ));
        }
        let merged = plan.merged_batches();
        let partitions = plan
            .completion_partitions()
            .iter()
            .map(|p| {
                p.iter()
                    .map(|&id| PartitionBatch {
                        size: merged[id].tasks.len() as f64,
                        workers: merged[id].workers.clone(),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n_workers: plan.n_workers(), partitions })
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// Job compute time given one slowdown per worker.
    pub fn job_time(&self, taus: &[f64]) -> f64 {
        debug_assert_eq!(taus.len(), self.n_workers);
        let mut best = f64::INFINITY;
        for partition in &self.partitions {
            let mut worst = f64::NEG_INFINITY;
            for batch in partition {
                let mut fastest = f64::INFINITY;
                for &w in &batch.workers {
                    let finish = batch.size * taus[w];
                    if finish < fastest {
                        fastest = finish;
                    }
                }
                if fastest > worst {
                    worst = fastest;
                    if worst >= best {
                        break;
                    }
                }
            }
            if worst < best {
                best = worst;
            }
        }
        best
    }
}

/// One realization of the job compute time: draws one `tau` per worker and
/// evaluates the plan's completion rule.
pub fn job_time_once<R: Rng + ?Sized>(
    plan: &BatchingPlan,
    dist: &ServiceDistribution,
    rng: &mut R,
) -> Result<f64> {
    let compiled = CompiledPlan::compile(plan)?;
    let taus: Vec<f64> = (0..compiled.n_workers).map(|_| dist.sample(rng)).collect();
    Ok(compiled.job_time(&taus))
}

/// Job compute time evaluated on caller-supplied slowdowns (one per worker).
pub fn job_time_with_taus(plan: &BatchingPlan, taus: &[f64]) -> Result<f64> {
    if taus.len() != plan.n_workers() {
        return Err(Error::Mismatch(format!(
            "{} slowdowns for {} workers",
            taus.len(),
            plan.n_workers()
        )));
    }
    Ok(CompiledPlan::compile(plan)?.job_time(taus))
}

/// Runs `config.replications` independent realizations.
pub fn simulate(
    plan: &BatchingPlan,
    dist: &ServiceDistribution,
    config: &SimConfig,
) -> Result<SimResult> {
    let compiled = CompiledPlan::compile(plan)?;
    let nw = compiled.n_workers;
    let samples: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; nw],
            |taus, r| {
                let mut rng = rep_rng(config.seed, r);
                for t in taus.iter_mut() {
                    *t = dist.sample(&mut rng);
                }
                compiled.job_time(taus)
            },
        )
        .collect();
    Ok(summarize(samples, config.retain_samples))
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Nearest-rank quantile on a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

fn summarize(samples: Vec<f64>, retain: bool) -> SimResult {
    let n = samples.len();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = neumaier_sum(sorted.iter().copied()) / n as f64;
    let var = neumaier_sum(sorted.iter().map(|x| (x - mean) * (x - mean))) / n as f64;
    let std = var.sqrt();
    SimResult {
        mean,
        std,
        cov: if n > 1 { Some(std / mean) } else { None },
        q50: quantile(&sorted, 0.5),
        q90: quantile(&sorted, 0.9),
        q99: quantile(&sorted, 0.99),
        replications: n as u64,
        samples: if retain { Some(samples) } else { None },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanStat {
    pub mean: f64,
    pub std_err: f64,
}

/// Paired mean difference between plans `a` and `b` on common draws.
#[derive(Debug, Clone, Serialize)]
pub struct PairedDiff {
    pub a: usize,
    pub b: usize,
    pub mean_diff: f64,
    pub std_err: f64,
    pub z: f64,
    pub ci99_lo: f64,
    pub ci99_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeComparison {
    pub replications: u64,
    pub plans: Vec<PlanStat>,
    pub pairs: Vec<PairedDiff>,
}

/// Compares plans under common random numbers: every replication draws one
/// slowdown per worker index and all plans reuse those draws, so ordering
/// claims come out of paired differences instead of independent noise.
pub fn compare_schemes(
    plans: &[BatchingPlan],
    dist: &ServiceDistribution,
    config: &SimConfig,
) -> Result<SchemeComparison> {
    if plans.is_empty() {
        return Err(Error::Mismatch("no plans to compare".into()));
    }
    let n_tasks = plans[0].n_tasks();
    let nw = plans[0].n_workers();
    for p in plans {
        if p.n_tasks() != n_tasks || p.n_workers() != nw {
            return Err(Error::Mismatch(
                "plans must share task and worker counts for coupled comparison".into(),
            ));
        }
    }
    let compiled: Vec<CompiledPlan> =
        plans.iter().map(CompiledPlan::compile).collect::<Result<_>>()?;
    let k = compiled.len();
    let reps = config.replications;

    let mut times = vec![0.0f64; reps as usize * k];
    times
        .par_chunks_mut(k)
        .enumerate()
        .for_each_init(
            || vec![0.0f64; nw],
            |taus, (r, row)| {
                let mut rng = rep_rng(config.seed, r as u64);
                for t in taus.iter_mut() {
                    *t = dist.sample(&mut rng);
                }
                for (i, c) in compiled.iter().enumerate() {
                    row[i] = c.job_time(taus);
                }
            },
        );

    let nf = reps as f64;
    let plan_stats: Vec<PlanStat> = (0..k)
        .map(|i| {
            let mean = neumaier_sum(times.iter().skip(i).step_by(k).copied()) / nf;
            let var =
                neumaier_sum(times.iter().skip(i).step_by(k).map(|x| (x - mean) * (x - mean)))
                    / nf;
            PlanStat { mean, std_err: (var / nf).sqrt() }
        })
        .collect();

    let mut pairs = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let diffs = || times.chunks(k).map(|row| row[a] - row[b]);
            let mean = neumaier_sum(diffs()) / nf;
            let var = neumaier_sum(diffs().map(|d| (d - mean) * (d - mean))) / nf;
            let std_err = (var / nf).sqrt();
            let z = if std_err > 0.0 { mean / std_err } else { 0.0 };
            // 99% two-sided normal quantile
            let half = 2.575_829_303_548_901 * std_err;
            pairs.push(PairedDiff {
                a,
                b,
                mean_diff: mean,
                std_err,
                z,
                ci99_lo: mean - half,
                ci99_hi: mean + half,
            });
        }
    }
    Ok(SchemeComparison { replications: reps, plans: plan_stats, pairs })
}
