//! Batching plans and batch-to-worker assignment.
//!
//! A plan groups `N` tasks into batches and maps each worker to one batch.
//! Non-overlapping plans partition the tasks and replicate each batch across
//! workers; overlapping plans share tasks between batches, in which case the
//! master needs some finished set of batches that contains every task exactly
//! once (an exact partition) before it can aggregate the result. Plans
//! precompute those exact partitions at validation time so the simulator can
//! evaluate completion for any draw of worker speeds.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replica counts `(N_1, ..., N_B)` of a non-overlapping plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentVector {
    counts: Vec<usize>,
}

impl AssignmentVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|c| *c == 0) {
            return Err(Error::InvalidParameter(
                "assignment vector entries must be positive".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Majorization order: sorted-descending prefix sums of `self` dominate
    /// those of `other`, with equal totals.
    pub fn majorizes(&self, other: &AssignmentVector) -> Result<bool> {
        if self.counts.len() != other.counts.len() {
            return Err(Error::IncomparableVectors(format!(
                "lengths {} vs {}",
                self.counts.len(),
                other.counts.len()
            )));
        }
        if self.total() != other.total() {
            return Err(Error::IncomparableVectors(format!(
                "sums {} vs {}",
                self.total(),
                other.total()
            )));
        }
        let sorted_desc = |v: &[usize]| {
            let mut s = v.to_vec();
            s.sort_unstable_by(|a, b| b.cmp(a));
            s
        };
        let a = sorted_desc(&self.counts);
        let b = sorted_desc(&other.counts);
        let mut pa = 0usize;
        let mut pb = 0usize;
        for i in 0..a.len() {
            pa += a[i];
            pb += b[i];
            if pa < pb {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Validation outcome flags carried by every plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlanFlags {
    /// Every batch has at least one worker.
    pub covering: bool,
    /// All batches have the same size.
    pub equal_batch_sizes: bool,
    /// Batches are pairwise disjoint.
    pub non_overlapping: bool,
    /// The batch list splits into subsets each containing every task exactly once.
    pub subset_decomposable: bool,
}

/// `N` tasks grouped into batches plus the worker-to-batch map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchingPlan {
    n_tasks: usize,
    batches: Vec<Vec<usize>>,
    workers: Vec<usize>,
    flags: PlanFlags,
    /// Distinct task sets among the batches, with the workers hosting each.
    merged: Vec<MergedBatch>,
    /// Index sets into `merged` whose task sets exactly partition the tasks.
    /// Job completion requires all batches of some partition to be done.
    partitions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedBatch {
    pub tasks: Vec<usize>,
    pub workers: Vec<usize>,
}

impl BatchingPlan {
    /// Validates a raw (batches, workers) layout. Errors when some task is in
    /// no batch, an index is out of range, or a batch repeats a task;
    /// everything softer lands in the flags.
    pub fn new(n_tasks: usize, batches: Vec<Vec<usize>>, workers: Vec<usize>) -> Result<Self> {
        if n_tasks == 0 {
            return Err(Error::InvalidPlan("plan needs at least one task".into()));
        }
        if batches.is_empty() {
            return Err(Error::InvalidPlan("plan needs at least one batch".into()));
        }
        let mut batches = batches;
        let mut seen = vec![false; n_tasks];
        for (i, batch) in batches.iter_mut().enumerate() {
            if batch.is_empty() {
                return Err(Error::InvalidPlan(format!("batch {i} is empty")));
            }
            batch.sort_unstable();
            for w in batch.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidPlan(format!(
                        "batch {i} lists task {} twice",
                        w[0]
                    )));
                }
            }
            for &t in batch.iter() {
                if t >= n_tasks {
                    return Err(Error::InvalidPlan(format!(
                        "batch {i} references task {t} outside 0..{n_tasks}"
                    )));
                }
                seen[t] = true;
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPlan(format!("task {t} appears in no batch")));
        }
        for (w, &b) in workers.iter().enumerate() {
            if b >= batches.len() {
                return Err(Error::InvalidPlan(format!(
                    "worker {w} assigned to batch {b} outside 0..{}",
                    batches.len()
                )));
            }
        }

        let mut host_count = vec![0usize; batches.len()];
        for &b in &workers {
            host_count[b] += 1;
        }
        let covering = host_count.iter().all(|c| *c > 0);
        let equal_batch_sizes = batches.windows(2).all(|w| w[0].len() == w[1].len());

        let mut task_multiplicity = vec![0usize; n_tasks];
        for batch in &batches {
            for &t in batch {
                task_multiplicity[t] += 1;
            }
        }
        let non_overlapping = task_multiplicity.iter().all(|m| *m == 1);
        let subset_decomposable = decomposes_into_exact_partitions(n_tasks, &batches);

        let merged = merge_batches(&batches, &workers);
        let hosted: Vec<usize> =
            (0..merged.len()).filter(|&i| !merged[i].workers.is_empty()).collect();
        let partitions = enumerate_exact_partitions(n_tasks, &merged, &hosted);

        let flags = PlanFlags { covering, equal_batch_sizes, non_overlapping, subset_decomposable };
        Ok(Self { n_tasks, batches, workers, flags, merged, partitions })
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    /// Worker-to-batch map.
    pub fn workers(&self) -> &[usize] {
        &self.workers
    }

    pub fn flags(&self) -> PlanFlags {
        self.flags
    }

    /// Batch size of the batch hosted by `worker`.
    pub fn batch_size_of_worker(&self, worker: usize) -> usize {
        self.batches[self.workers[worker]].len()
    }

    pub fn merged_batches(&self) -> &[MergedBatch] {
        &self.merged
    }

    /// The minimal ways to complete the job: each entry indexes into
    /// [`merged_batches`](Self::merged_batches) and covers every task exactly once.
    pub fn completion_partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    /// True when at least one completion partition is backed by workers.
    pub fn can_complete(&self) -> bool {
        !self.partitions.is_empty()
    }

    /// Worker count per batch.
    pub fn worker_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.batches.len()];
        for &b in &self.workers {
            counts[b] += 1;
        }
        counts
    }

    /// Replica-count vector, defined for covering non-overlapping plans.
    pub fn assignment_vector(&self) -> Result<AssignmentVector> {
        if !self.flags.non_overlapping {
            return Err(Error::InvalidPlan(
                "assignment vector is only defined for non-overlapping plans".into(),
            ));
        }
        AssignmentVector::new(self.worker_counts())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// External plan document. Task and batch indices are 1-based on disk.
#[derive(Serialize, Deserialize)]
struct PlanDoc {
    n_tasks: usize,
    batches: Vec<Vec<usize>>,
    workers: Vec<usize>,
}

impl Serialize for BatchingPlan {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = PlanDoc {
            n_tasks: self.n_tasks,
            batches: self
                .batches
                .iter()
                .map(|b| b.iter().map(|t| t + 1).collect())
                .collect(),
            workers: self.workers.iter().map(|b| b + 1).collect(),
        };
        doc.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BatchingPlan {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = PlanDoc::deserialize(de)?;
        let shift = |v: Vec<usize>| -> std::result::Result<Vec<usize>, D::Error> {
            v.into_iter()
                .map(|i| {
                    i.checked_sub(1)
                        .ok_or_else(|| D::Error::custom("plan documents use 1-based indices"))
                })
                .collect()
        };
        let batches = doc
            .batches
            .into_iter()
            .map(shift)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let workers = shift(doc.workers)?;
        BatchingPlan::new(doc.n_tasks, batches, workers).map_err(D::Error::custom)
    }
}

fn check_feasible(n: usize, b: usize) -> Result<usize> {
    if b == 0 || b > n || n % b != 0 {
        return Err(Error::InfeasibleBatchCount { n, b });
    }
    Ok(n / b)
}

fn disjoint_batches(n: usize, b: usize) -> Result<Vec<Vec<usize>>> {
    let size = check_feasible(n, b)?;
    Ok((0..b).map(|i| (i * size..(i + 1) * size).collect()).collect())
}

/// `B` disjoint batches of size `N/B`, each replicated on exactly `N/B` workers.
pub fn balanced_plan(n: usize, b: usize) -> Result<BatchingPlan> {
    let size = check_feasible(n, b)?;
    let workers = (0..b).flat_map(|i| std::iter::repeat(i).take(size)).collect();
    BatchingPlan::new(n, disjoint_batches(n, b)?, workers)
}

/// Disjoint batches with the given replica counts, `counts[i]` workers on batch `i`.
pub fn replicated_plan(n: usize, counts: &[usize]) -> Result<BatchingPlan> {
    let b = counts.len();
    check_feasible(n, b)?;
    if counts.iter().any(|c| *c == 0) {
        return Err(Error::InvalidPlan("every batch needs at least one worker".into()));
    }
    let workers = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat(i).take(c))
        .collect();
    BatchingPlan::new(n, disjoint_batches(n, b)?, workers)
}

/// Disjoint batches with each of the `N` workers picking a batch uniformly at
/// random. The result may be non-covering; that is flagged, not an error.
pub fn random_plan<R: Rng + ?Sized>(n: usize, b: usize, rng: &mut R) -> Result<BatchingPlan> {
    check_feasible(n, b)?;
    let workers = (0..n).map(|_| rng.random_range(0..b)).collect();
    BatchingPlan::new(n, disjoint_batches(n, b)?, workers)
}

/// `N` overlapping batches of size `N/B` in cyclic order: batch `j` holds
/// tasks `{j, j+1, ..., j+N/B-1}` mod `N`, hosted by worker `j`.
pub fn cyclic_plan(n: usize, b: usize) -> Result<BatchingPlan> {
    let size = check_feasible(n, b)?;
    let batches = (0..n).map(|j| (0..size).map(|t| (j + t) % n).collect()).collect();
    let workers = (0..n).collect();
    BatchingPlan::new(n, batches, workers)
}

/// User-supplied batching, validated. Flags record whether batch sizes are
/// equal and whether the batches decompose into exact-cover subsets.
pub fn custom_overlapping_plan(
    n: usize,
    batches: Vec<Vec<usize>>,
    workers: Vec<usize>,
) -> Result<BatchingPlan> {
    BatchingPlan::new(n, batches, workers)
}

fn merge_batches(batches: &[Vec<usize>], workers: &[usize]) -> Vec<MergedBatch> {
    let mut merged: Vec<MergedBatch> = Vec::new();
    let mut index_of = std::collections::HashMap::new();
    let mut raw_to_merged = vec![0usize; batches.len()];
    for (i, batch) in batches.iter().enumerate() {
        let id = *index_of.entry(batch.clone()).or_insert_with(|| {
            merged.push(MergedBatch { tasks: batch.clone(), workers: Vec::new() });
            merged.len() - 1
        });
        raw_to_merged[i] = id;
    }
    for (w, &b) in workers.iter().enumerate() {
        merged[raw_to_merged[b]].workers.push(w);
    }
    merged
}

/// All subsets of the hosted merged batches whose task sets partition
/// `0..n_tasks`, by backtracking on the lowest uncovered task.
fn enumerate_exact_partitions(
    n_tasks: usize,
    merged: &[MergedBatch],
    hosted: &[usize],
) -> Vec<Vec<usize>> {
    let mut by_min_task: Vec<Vec<usize>> = vec![Vec::new(); n_tasks];
    for &id in hosted {
        by_min_task[merged[id].tasks[0]].push(id);
    }
    let mut out = Vec::new();
    let mut covered = vec![false; n_tasks];
    let mut chosen = Vec::new();
    fn recurse(
        n_tasks: usize,
        merged: &[MergedBatch],
        by_min_task: &[Vec<usize>],
        covered: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let next = match covered.iter().position(|c| !c) {
            None => {
                out.push(chosen.clone());
                return;
            }
            Some(t) => t,
        };
        for &id in &by_min_task[next] {
            let tasks = &merged[id].tasks;
            if tasks.iter().any(|&t| covered[t]) {
                continue;
            }
            for &t in tasks {
                covered[t] = true;
            }
            chosen.push(id);
            recurse(n_tasks, merged, by_min_task, covered, chosen, out);
            chosen.pop();
            for &t in tasks {
                covered[t] = false;
            }
        }
    }
    recurse(n_tasks, merged, &by_min_task, &mut covered, &mut chosen, &mut out);
    out
}

/// Whether the raw batch list splits into groups that each contain every task
/// exactly once, using every batch exactly once.
fn decomposes_into_exact_partitions(n_tasks: usize, batches: &[Vec<usize>]) -> bool {
    let total: usize = batches.iter().map(|b| b.len()).sum();
    if total % n_tasks != 0 {
        return false;
    }
    fn recurse(
        n_tasks: usize,
        batches: &[Vec<usize>],
        used: &mut Vec<bool>,
        covered: &mut Vec<bool>,
        n_covered: usize,
    ) -> bool {
        if used.iter().all(|u| *u) {
            return true;
        }
        // extend the current group at its lowest uncovered task, or start a
        // fresh group once the current one is a full partition
        if n_covered == n_tasks {
            covered.iter_mut().for_each(|c| *c = false);
            return recurse(n_tasks, batches, used, covered, 0);
        }
        let next = covered.iter().position(|c| !c).unwrap();
        for i in 0..batches.len() {
            if used[i] || batches[i][0] != next {
                continue;
            }
            if batches[i].iter().any(|&t| covered[t]) {
                continue;
            }
            used[i] = true;
            for &t in &batches[i] {
                covered[t] = true;
            }
            if recurse(n_tasks, batches, used, covered, n_covered + batches[i].len()) {
                return true;
            }
            used[i] = false;
            for &t in &batches[i] {
                covered[t] = false;
            }
        }
        false
    }
    // the lowest uncovered task anchor requires each candidate batch's minimum
    // element to match, so sort order within batches matters; batches here are
    // already sorted by BatchingPlan::new
    recurse(
        n_tasks,
        batches,
        &mut vec![false; batches.len()],
        &mut vec![false; n_tasks],
        0,
    )
}

/// Stirling number of the second kind, exact, via
/// `S(n,k) = k*S(n-1,k) + S(n-1,k-1)`.
pub fn stirling2(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    if n == 0 {
        return BigUint::one();
    }
    if k == 0 {
        return BigUint::zero();
    }
    let mut row: Vec<BigUint> = vec![BigUint::zero(); k + 1];
    row[0] = BigUint::one(); // S(0,0)
    for i in 1..=n {
        let hi = k.min(i);
        for j in (1..=hi).rev() {
            let val = &row[j] * BigUint::from(j) + &row[j - 1];
            row[j] = val;
        }
        row[0] = BigUint::zero(); // S(i,0) = 0 for i >= 1
    }
    row[k].clone()
}

/// Exact probability that assigning each of `N` workers a uniformly random
/// batch leaves none of the `B` batches unselected: `B! * S(N,B) / B^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringProbability {
    pub exact: BigRational,
    pub value: f64,
}

pub fn covering_probability(n: usize, b: usize) -> Result<CoveringProbability> {
    if b == 0 {
        return Err(Error::InvalidParameter("covering probability needs B >= 1".into()));
    }
    if b > n {
        return Ok(CoveringProbability { exact: BigRational::zero(), value: 0.0 });
    }
    let mut numer = BigUint::one();
    for i in 1..=b {
        numer *= BigUint::from(i);
    }
    numer *= stirling2(n, b);
    let denom = BigUint::from(b).pow(n as u32);
    let exact = BigRational::new(BigInt::from(numer), BigInt::from(denom));
    let value = ratio_to_f64(&exact);
    Ok(CoveringProbability { exact, value })
}

/// Ratio to f64, shifting both sides down when they exceed f64 range.
fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let numer = r.numer().abs();
    let denom = r.denom().abs();
    let bits = numer.bits().max(denom.bits());
    let (n, d) = if bits > 900 {
        let shift = bits - 900;
        (&numer >> shift, &denom >> shift)
    } else {
        (numer.clone(), denom.clone())
    };
    let v = n.to_f64().unwrap_or(f64::MAX) / d.to_f64().unwrap_or(f64::MAX);
    if r.is_negative() {
        -v
    } else {
        v
    }
}
