//! Task-runtime trace ingestion and the resampling experiment.
//!
//! Traces are 4-column CSVs (`job_id,task_id,schedule_time,finish_time`,
//! times in integer microseconds). Per-job task durations feed an empirical
//! CCDF and a bootstrap experiment: redo the batching study with `tau` drawn
//! from the observed durations instead of a parametric model, reporting mean
//! job time at every feasible `B` normalized by the no-redundancy (`B = N`)
//! mean.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::balanced_plan;
use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};
use crate::sim_engine::{rep_rng, CompiledPlan, SimConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub job_id: String,
    pub task_id: String,
    /// Microseconds.
    pub schedule_time: i64,
    /// Microseconds; at least `schedule_time`.
    pub finish_time: i64,
}

#[derive(Debug, Clone)]
pub struct TraceLoad {
    pub records: Vec<TraceRecord>,
    /// Rows discarded for `finish_time < schedule_time`.
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobDurations {
    pub job_id: String,
    /// Seconds, all >= 0, non-empty.
    pub samples: Vec<f64>,
}

const REQUIRED: [&str; 4] = ["job_id", "task_id", "schedule_time", "finish_time"];

/// Parses a trace CSV. Extra columns are ignored; rows whose finish precedes
/// their schedule are dropped and counted rather than failing the load.
pub fn load_trace<R: Read>(source: R) -> Result<TraceLoad> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers().map_err(Error::from)?.clone();
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = headers.iter().position(|h| h == name).ok_or(Error::TraceFormat {
            line: 1,
            reason: format!("missing column {name:?}"),
        })?;
    }

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for result in reader.records() {
        let row = result?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| {
            row.get(cols[i]).ok_or(Error::TraceFormat {
                line,
                reason: format!("missing field {:?}", REQUIRED[i]),
            })
        };
        let time = |i: usize| -> Result<i64> {
            field(i)?.trim().parse().map_err(|_| Error::TraceFormat {
                line,
                reason: format!("{:?} is not an integer microsecond timestamp", REQUIRED[i]),
            })
        };
        let record = TraceRecord {
            job_id: field(0)?.to_string(),
            task_id: field(1)?.to_string(),
            schedule_time: time(2)?,
            finish_time: time(3)?,
        };
        if record.finish_time < record.schedule_time {
            dropped += 1;
        } else {
            records.push(record);
        }
    }
    Ok(TraceLoad { records, dropped })
}

/// Groups task durations (seconds) by job, in job-id order.
pub fn durations_by_job(records: &[TraceRecord]) -> BTreeMap<String, JobDurations> {
    let mut map: BTreeMap<String, JobDurations> = BTreeMap::new();
    for r in records {
        let duration = (r.finish_time - r.schedule_time) as f64 / 1e6;
        map.entry(r.job_id.clone())
            .or_insert_with(|| JobDurations { job_id: r.job_id.clone(), samples: Vec::new() })
            .samples
            .push(duration);
    }
    map
}

/// Step points `(x, Pr{X > x})` at the sorted unique sample values.
pub fn empirical_ccdf_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        points.push((x, (sorted.len() - j) as f64 / n));
        i = j;
    }
    Ok(points)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResampleRow {
    pub b: usize,
    pub normalized_mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResampleTable {
    pub n: usize,
    pub replications: u64,
    pub rows: Vec<ResampleRow>,
}

fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

impl ResampleTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("B,normalized_mean,stderr\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.b,
                sig9(row.normalized_mean),
                sig9(row.std_err)
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            b: usize,
            normalized_mean: &'a str,
            std_err: &'a str,
        }
        #[derive(Serialize)]
        struct Table<'a> {
            n: usize,
            replications: u64,
            rows: Vec<Row<'a>>,
        }
        let means: Vec<String> = self.rows.iter().map(|r| sig9(r.normalized_mean)).collect();
        let errs: Vec<String> = self.rows.iter().map(|r| sig9(r.std_err)).collect();
        let table = Table {
            n: self.n,
            replications: self.replications,
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| Row { b: r.b, normalized_mean: &means[i], std_err: &errs[i] })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&table)?)
    }
}

/// Bootstrap experiment over the feasible batch counts. Each replication
/// draws `N` durations with replacement; every `B` reuses those same draws,
/// so the curve is internally coupled. Means are normalized by the `B = N`
/// mean of the same run.
pub fn resample_experiment(durations: &[f64], n: usize, config: &SimConfig) -> Result<ResampleTable> {
    let dist = ServiceDistribution::empirical(durations.to_vec())?;
    let divisors: Vec<usize> = crate::optimizer::feasible_b(n)?;
    let compiled: Vec<CompiledPlan> = divisors
        .iter()
        .map(|&b| CompiledPlan::compile(&balanced_plan(n, b)?))
        .collect::<Result<_>>()?;
    let k = divisors.len();
    let reps = config.replications;

    let mut times = vec![0.0f64; reps as usize * k];
    times.par_chunks_mut(k).enumerate().for_each_init(
        || vec![0.0f64; n],
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
    let mut means = vec![0.0f64; k];
    let mut stds = vec![0.0f64; k];
    for (i, (mean_out, std_out)) in means.iter_mut().zip(stds.iter_mut()).enumerate() {
        let mut sorted: Vec<f64> = times.iter().skip(i).step_by(k).copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = sorted.iter().sum::<f64>() / nf;
        let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
        *mean_out = mean;
        *std_out = var.sqrt();
    }
    let baseline = means[k - 1]; // B = N row
    if baseline <= 0.0 {
        return Err(Error::DegenerateSamples(
            "no-redundancy mean is zero; cannot normalize".into(),
        ));
    }
    let rows = divisors
        .iter()
        .enumerate()
        .map(|(i, &b)| ResampleRow {
            b,
            normalized_mean: means[i] / baseline,
            std_err: stds[i] / (baseline * nf.sqrt()),
        })
        .collect();
    Ok(ResampleTable { n, replications: reps, rows })
}

/// Synthetic trace fixture: `n_jobs * tasks_per_job` records with schedule
/// time 0 and finish time `round(duration * 1e6)`.
pub fn synth_trace<R: Rng + ?Sized>(
    dist: &ServiceDistribution,
    n_jobs: usize,
    tasks_per_job: usize,
    rng: &mut R,
) -> Vec<TraceRecord> {
    let mut records = Vec::with_capacity(n_jobs * tasks_per_job);
    for j in 0..n_jobs {
        for t in 0..tasks_per_job {
            let duration = dist.sample(rng);
            records.push(TraceRecord {
                job_id: format!("job_{j}"),
                task_id: format!("task_{t}"),
                schedule_time: 0,
                finish_time: (duration * 1e6).round() as i64,
            });
        }
    }
    records
}

/// Records back to the 4-column CSV form `load_trace` reads.
pub fn trace_to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from("job_id,task_id,schedule_time,finish_time\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.job_id, r.task_id, r.schedule_time, r.finish_time
        ));
    }
    out
}
