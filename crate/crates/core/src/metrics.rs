//! Per-insertion records and their aggregation into amortized, worst-case
//! expected, and observed-maximum probe complexity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Elastic,
    Funnel,
    Uniform,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Elastic, Scheme::Funnel, Scheme::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Elastic => "elastic",
            Scheme::Funnel => "funnel",
            Scheme::Uniform => "uniform",
        }
    }

    /// Greedy schemes search exactly the probes they inserted with.
    pub fn is_greedy(self) -> bool {
        !matches!(self, Scheme::Elastic)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "elastic" => Ok(Scheme::Elastic),
            "funnel" => Ok(Scheme::Funnel),
            "uniform" => Ok(Scheme::Uniform),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Where an insertion ended up, and by which rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    /// `case` is 0 for batch 0, otherwise 1, 2 or 3. `array` and `j` are the
    /// 1-based placement coordinates `h_{array, j}`.
    Elastic {
        batch: u32,
        case: u8,
        array: u32,
        j: u64,
    },
    /// 1-based funnel level.
    Level(u32),
    SpecialB,
    SpecialC,
    Uniform,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Elastic { batch, case, .. } => write!(f, "batch{batch}-case{case}"),
            Tag::Level(l) => write!(f, "level{l}"),
            Tag::SpecialB => f.write_str("B"),
            Tag::SpecialC => f.write_str("C"),
            Tag::Uniform => f.write_str("uniform"),
        }
    }
}

/// What a table reports for one insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub tag: Tag,
    pub search_probes: u64,
    pub insert_probes: u64,
    pub slot: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsertRecord {
    pub trial: u32,
    pub insert_index: u64,
    pub scheme: Scheme,
    pub tag: Tag,
    pub search_probes: u64,
    pub insert_probes: u64,
    pub slot: u64,
}

impl InsertRecord {
    pub fn new(trial: u32, insert_index: u64, scheme: Scheme, placement: Placement) -> Self {
        Self {
            trial,
            insert_index,
            scheme,
            tag: placement.tag,
            search_probes: placement.search_probes,
            insert_probes: placement.insert_probes,
            slot: placement.slot,
        }
    }
}

/// Statistics over the successful trials of one `(scheme, n, delta)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub trials: usize,
    pub failure_count: usize,
    pub amortized_mean: f64,
    pub per_index_mean: Vec<f64>,
    pub worst_case_expected: f64,
    pub max_observed: u64,
    pub insert_probes_amortized: f64,
    pub insert_per_index_mean: Vec<f64>,
    pub insert_probes_worst_expected: f64,
    pub max_insert_observed: u64,
}

impl SweepSummary {
    pub fn successful_trials(&self) -> usize {
        self.trials - self.failure_count
    }
}

/// Incremental form of [`aggregate`]: feed one complete trial at a time.
///
/// Sums are kept as integers, so the result does not depend on the order in
/// which trials are added.
#[derive(Debug, Clone)]
pub struct SummaryBuilder {
    m: usize,
    trials: usize,
    failed: usize,
    search_sums: Vec<u128>,
    insert_sums: Vec<u128>,
    max_search: u64,
    max_insert: u64,
    seen: BTreeSet<u32>,
}

impl SummaryBuilder {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            trials: 0,
            failed: 0,
            search_sums: vec![0; m],
            insert_sums: vec![0; m],
            max_search: 0,
            max_insert: 0,
            seen: BTreeSet::new(),
        }
    }

    fn register(&mut self, trial: u32) -> Result<(), Error> {
        if !self.seen.insert(trial) {
            return Err(Error::Aggregate(format!("trial {trial} reported twice")));
        }
        self.trials += 1;
        Ok(())
    }

    pub fn add_failed(&mut self, trial: u32) -> Result<(), Error> {
        self.register(trial)?;
        self.failed += 1;
        Ok(())
    }

    /// Adds one successful trial. `records` must hold each insert index in
    /// `0..m` exactly once, all tagged with `trial`.
    pub fn add_trial(&mut self, trial: u32, records: &[InsertRecord]) -> Result<(), Error> {
        if records.len() != self.m {
            return Err(Error::Aggregate(format!(
                "trial {trial} has {} records, expected {}",
                records.len(),
                self.m
            )));
        }
        let mut present = vec![false; self.m];
        for r in records {
            let idx = r.insert_index as usize;
            if r.trial != trial || idx >= self.m || present[idx] {
                return Err(Error::Aggregate(format!(
                    "trial {trial}: unexpected record (trial {}, index {})",
                    r.trial, r.insert_index
                )));
            }
            present[idx] = true;
        }
        self.register(trial)?;
        for r in records {
            let idx = r.insert_index as usize;
            self.search_sums[idx] += r.search_probes as u128;
            self.insert_sums[idx] += r.insert_probes as u128;
            self.max_search = self.max_search.max(r.search_probes);
            self.max_insert = self.max_insert.max(r.insert_probes);
        }
        Ok(())
    }

    /// Folds another builder's trials into this one.
    pub fn merge(&mut self, other: SummaryBuilder) -> Result<(), Error> {
        if other.m != self.m {
            return Err(Error::Aggregate(format!(
                "cannot merge m = {} into m = {}",
                other.m, self.m
            )));
        }
        if let Some(t) = other.seen.iter().find(|t| self.seen.contains(t)) {
            return Err(Error::Aggregate(format!("trial {t} reported twice")));
        }
        self.seen.extend(other.seen);
        self.trials += other.trials;
        self.failed += other.failed;
        for (a, b) in self.search_sums.iter_mut().zip(other.search_sums) {
            *a += b;
        }
        for (a, b) in self.insert_sums.iter_mut().zip(other.insert_sums) {
            *a += b;
        }
        self.max_search = self.max_search.max(other.max_search);
        self.max_insert = self.max_insert.max(other.max_insert);
        Ok(())
    }

    pub fn finish(self) -> SweepSummary {
        let ok = self.trials - self.failed;
        let per_index = |sums: &[u128]| -> Vec<f64> {
            if ok == 0 {
                return vec![0.0; sums.len()];
            }
            sums.iter().map(|&s| s as f64 / ok as f64).collect()
        };
        let amortized = |sums: &[u128]| -> f64 {
            let count = ok * sums.len();
            if count == 0 {
                0.0
            } else {
                sums.iter().sum::<u128>() as f64 / count as f64
            }
        };
        let max_of = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let per_index_mean = per_index(&self.search_sums);
        let insert_per_index_mean = per_index(&self.insert_sums);
        SweepSummary {
            trials: self.trials,
            failure_count: self.failed,
            amortized_mean: amortized(&self.search_sums),
            worst_case_expected: max_of(&per_index_mean),
            per_index_mean,
            max_observed: self.max_search,
            insert_probes_amortized: amortized(&self.insert_sums),
            insert_probes_worst_expected: max_of(&insert_per_index_mean),
            insert_per_index_mean,
            max_insert_observed: self.max_insert,
        }
    }
}

/// Aggregates the records of `trials` trials of `m` insertions each.
///
/// Trials listed in `failed` count towards `failure_count` and any of their
/// records are ignored. Every other trial in `0..trials` must be complete.
pub fn aggregate<I>(
    records: I,
    m: usize,
    trials: usize,
    failed: &[u32],
) -> Result<SweepSummary, Error>
where
    I: IntoIterator<Item = InsertRecord>,
{
    let failed: BTreeSet<u32> = failed.iter().copied().collect();
    if let Some(&bad) = failed.iter().find(|&&t| t as usize >= trials) {
        return Err(Error::Aggregate(format!(
            "failed trial {bad} out of range 0..{trials}"
        )));
    }
    let mut all: Vec<InsertRecord> = records
        .into_iter()
        .filter(|r| !failed.contains(&r.trial))
        .collect();
    if let Some(r) = all.iter().find(|r| r.trial as usize >= trials) {
        return Err(Error::Aggregate(format!(
            "record for trial {} out of range 0..{trials}",
            r.trial
        )));
    }
    all.sort_by_key(|r| (r.trial, r.insert_index));

    let mut builder = SummaryBuilder::new(m);
    let mut rest = all.as_slice();
    for trial in 0..trials as u32 {
        if failed.contains(&trial) {
            builder.add_failed(trial)?;
            continue;
        }
        let split = rest.partition_point(|r| r.trial == trial);
        let (mine, tail) = rest.split_at(split);
        builder.add_trial(trial, mine)?;
        rest = tail;
    }
    Ok(builder.finish())
}

/// Ordinary least-squares line through a set of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn growth_fit(points: &[(f64, f64)]) -> Result<LinearFit, Error> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Degenerate);
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // A constant response is fit perfectly by the horizontal line.
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
