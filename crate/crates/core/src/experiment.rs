//! Seeded trial execution. Trials are independent and run on the rayon pool
//! when the `parallel` feature is enabled; results are always merged in trial
//! order so the output does not depend on scheduling.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::elastic::{ElasticParams, ElasticTable, DEFAULT_C};
use crate::error::Error;
use crate::funnel::{FunnelParams, FunnelTable};
use crate::metrics::{InsertRecord, Placement, Scheme, SummaryBuilder, SweepSummary, Tag};
use crate::probe::{derive_seed, Key};
use crate::table::{Lookup, OpenTable};
use crate::uniform::UniformTable;

/// Table shape shared by every trial of one experiment point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub log2_inv_delta: u32,
    /// Elastic budget constant; ignored by the other schemes.
    pub c: u32,
}

impl TableConfig {
    pub fn new(scheme: Scheme, n: usize, log2_inv_delta: u32) -> Self {
        Self {
            scheme,
            n,
            log2_inv_delta,
            c: DEFAULT_C,
        }
    }

    pub fn with_c(mut self, c: u32) -> Self {
        self.c = c;
        self
    }

    /// `n - floor(delta n)`.
    pub fn insertions(&self) -> usize {
        self.n - (self.n >> self.log2_inv_delta.min(63))
    }

    pub fn build(&self, seed: u64) -> Result<AnyTable, Error> {
        Ok(match self.scheme {
            Scheme::Elastic => AnyTable::Elastic(ElasticTable::new(ElasticParams::new(
                self.n,
                self.log2_inv_delta,
                self.c,
                seed,
            )?)?),
            Scheme::Funnel => AnyTable::Funnel(FunnelTable::new(FunnelParams::new(
                self.n,
                self.log2_inv_delta,
                seed,
            )?)?),
            Scheme::Uniform => {
                if self.log2_inv_delta == 0 || (self.n >> self.log2_inv_delta.min(63)) == 0 {
                    return Err(Error::Config(format!(
                        "delta * n < 1 for n = {}, delta = 2^-{}",
                        self.n, self.log2_inv_delta
                    )));
                }
                AnyTable::Uniform(UniformTable::new(self.n, seed)?)
            }
        })
    }

    /// Checks that a table can be built, without running anything.
    pub fn validate(&self) -> Result<(), Error> {
        self.build(0).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub enum AnyTable {
    Elastic(ElasticTable),
    Funnel(FunnelTable),
    Uniform(UniformTable),
}

impl AnyTable {
    fn inner(&self) -> &dyn OpenTable {
        match self {
            AnyTable::Elastic(t) => t,
            AnyTable::Funnel(t) => t,
            AnyTable::Uniform(t) => t,
        }
    }
}

impl OpenTable for AnyTable {
    fn scheme(&self) -> Scheme {
        self.inner().scheme()
    }

    fn capacity(&self) -> usize {
        self.inner().capacity()
    }

    fn len(&self) -> usize {
        self.inner().len()
    }

    fn insert(&mut self, key: Key) -> Result<Placement, Error> {
        match self {
            AnyTable::Elastic(t) => t.insert_key(key),
            AnyTable::Funnel(t) => t.insert_key(key),
            AnyTable::Uniform(t) => t.insert(key),
        }
    }

    fn lookup(&self, key: Key) -> Lookup {
        self.inner().lookup(key)
    }

    fn slots(&self) -> &[Option<Key>] {
        self.inner().slots()
    }
}

/// A table after inserting keys `0..m`, or up to the first failure.
#[derive(Debug, Clone)]
pub struct FilledTable {
    pub table: AnyTable,
    pub placements: Vec<Placement>,
    pub failure: Option<Error>,
}

pub fn fill_table(config: &TableConfig, seed: u64) -> Result<FilledTable, Error> {
    let mut table = config.build(seed)?;
    let m = config.insertions();
    let mut placements = Vec::with_capacity(m);
    let mut failure = None;
    for k in 0..m as u64 {
        match table.insert(Key(k)) {
            Ok(p) => placements.push(p),
            Err(e) if e.is_trial_failure() => {
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FilledTable {
        table,
        placements,
        failure,
    })
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: u32,
    pub seed: u64,
    pub records: Vec<InsertRecord>,
    pub failure: Option<Error>,
}

pub fn run_trial(config: &TableConfig, master_seed: u64, trial: u32) -> Result<TrialResult, Error> {
    let seed = derive_seed(master_seed, trial as u64);
    let filled = fill_table(config, seed)?;
    let records = filled
        .placements
        .into_iter()
        .enumerate()
        .map(|(i, p)| InsertRecord::new(trial, i as u64, config.scheme, p))
        .collect();
    Ok(TrialResult {
        trial,
        seed,
        records,
        failure: filled.failure,
    })
}

/// How to schedule independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool. Without the `parallel` feature every variant
    /// runs sequentially.
    #[default]
    Parallel,
    /// Dedicated pool of the given size.
    ParallelJobs(usize),
}

#[cfg(feature = "parallel")]
fn map_trials<T, F>(trials: u32, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => (0..trials).map(f).collect(),
        Execution::Parallel => (0..trials).into_par_iter().map(f).collect(),
        Execution::ParallelJobs(jobs) => match rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| (0..trials).into_par_iter().map(&f).collect()),
            Err(_) => (0..trials).map(f).collect(),
        },
    }
}

#[cfg(not(feature = "parallel"))]
fn map_trials<T, F>(trials: u32, _exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    (0..trials).map(f).collect()
}

pub fn run_trials(
    config: &TableConfig,
    master_seed: u64,
    trials: u32,
    exec: Execution,
) -> Result<Vec<TrialResult>, Error> {
    config.validate()?;
    map_trials(trials, exec, |t| run_trial(config, master_seed, t))
        .into_iter()
        .collect()
}

/// Per-trial facts kept after the records themselves are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialDigest {
    pub trial: u32,
    pub seed: u64,
    pub failure: Option<String>,
    pub completed: usize,
    pub max_search_probes: u64,
    pub max_insert_probes: u64,
    /// 1-based elastic arrays that received an expensive-case insertion.
    pub expensive_arrays: BTreeSet<u32>,
    /// Records whose search cost differs from their insertion cost.
    pub decoupled: usize,
}

impl TrialDigest {
    fn of(result: &TrialResult) -> Self {
        let mut expensive_arrays = BTreeSet::new();
        let mut decoupled = 0;
        for r in &result.records {
            if let Tag::Elastic { case: 3, array, .. } = r.tag {
                expensive_arrays.insert(array);
            }
            decoupled += (r.search_probes != r.insert_probes) as usize;
        }
        Self {
            trial: result.trial,
            seed: result.seed,
            failure: result.failure.as_ref().map(ToString::to_string),
            completed: result.records.len(),
            max_search_probes: result
                .records
                .iter()
                .map(|r| r.search_probes)
                .max()
                .unwrap_or(0),
            max_insert_probes: result
                .records
                .iter()
                .map(|r| r.insert_probes)
                .max()
                .unwrap_or(0),
            expensive_arrays,
            decoupled,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub config: TableConfig,
    pub summary: SweepSummary,
    pub digests: Vec<TrialDigest>,
}

impl PointResult {
    pub fn failures(&self) -> usize {
        self.summary.failure_count
    }
}

/// Runs `trials` trials and reduces them to a summary without holding every
/// trial's records at once.
pub fn run_point(
    config: &TableConfig,
    master_seed: u64,
    trials: u32,
    exec: Execution,
) -> Result<PointResult, Error> {
    config.validate()?;
    let m = config.insertions();
    let partials = map_trials(
        trials,
        exec,
        |t| -> Result<(TrialDigest, SummaryBuilder), Error> {
            let result = run_trial(config, master_seed, t)?;
            let mut builder = SummaryBuilder::new(m);
            if result.failure.is_some() {
                builder.add_failed(t)?;
            } else {
                builder.add_trial(t, &result.records)?;
            }
            Ok((TrialDigest::of(&result), builder))
        },
    );
    let mut total = SummaryBuilder::new(m);
    let mut digests = Vec::with_capacity(trials as usize);
    for partial in partials {
        let (digest, builder) = partial?;
        total.merge(builder)?;
        digests.push(digest);
    }
    Ok(PointResult {
        config: *config,
        summary: total.finish(),
        digests,
    })
}

/// Summary of already-materialized trials.
pub fn summarize(config: &TableConfig, results: &[TrialResult]) -> Result<SweepSummary, Error> {
    let m = config.insertions();
    let mut builder = SummaryBuilder::new(m);
    for r in results {
        if r.failure.is_some() {
            builder.add_failed(r.trial)?;
        } else {
            builder.add_trial(r.trial, &r.records)?;
        }
    }
    Ok(builder.finish())
}
