//! Elastic hashing: a non-greedy open-addressing table without reordering.
//!
//! The array is split into geometrically halving subarrays `A_1, A_2, ...`.
//! Insertions are grouped into batches; batch `i >= 1` only ever writes to
//! `A_i` and `A_{i+1}` and ends with both arrays at exact occupancies. Each
//! key's two-dimensional probe `h_{i,j}` is exposed to queries as the
//! one-dimensional probe number `phi(i, j)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Error;
use crate::metrics::{Placement, Scheme, Tag};
use crate::probe::{phi, Key, ProbeSource};
use crate::table::{ceil_log2, scan_cap, Lookup, OpenTable};

pub const DEFAULT_C: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElasticParams {
    pub n: usize,
    /// `k` with `delta = 2^-k`.
    pub log2_inv_delta: u32,
    pub c: u32,
    pub seed: u64,
}

impl ElasticParams {
    pub fn new(n: usize, log2_inv_delta: u32, c: u32, seed: u64) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::Config(format!(
                "elastic table needs n >= 2, got {n}"
            )));
        }
        if log2_inv_delta == 0 || log2_inv_delta >= 63 {
            return Err(Error::Config(format!(
                "log2(1/delta) must lie in 1..63, got {log2_inv_delta}"
            )));
        }
        if (n >> log2_inv_delta) == 0 {
            return Err(Error::Config(format!(
                "delta * n < 1 for n = {n}, delta = 2^-{log2_inv_delta}"
            )));
        }
        if c == 0 {
            return Err(Error::Config("budget constant c must be >= 1".into()));
        }
        Ok(Self {
            n,
            log2_inv_delta,
            c,
            seed,
        })
    }

    pub fn delta(&self) -> f64 {
        (-(self.log2_inv_delta as f64)).exp2()
    }

    /// `n - floor(delta * n)`.
    pub fn insertions(&self) -> usize {
        self.n - (self.n >> self.log2_inv_delta)
    }
}

/// `ceil(0.75 * x)`.
#[inline]
pub(crate) fn three_quarters_ceil(x: usize) -> usize {
    (3 * x).div_ceil(4)
}

/// Subarray geometry: sizes and flat-array offsets of `A_1 .. A_L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElasticLayout {
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl ElasticLayout {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Splits `n` slots into `ceil(log2 n)` arrays of roughly halving size.
///
/// Array `i` (1-based) gets `ceil(n / 2^(i-1)) - ceil(n / 2^i)` slots and the
/// final array also takes the one leftover slot, so for `n = 2^k` the sizes
/// are `2^(k-1), ..., 4, 2, 2`.
pub fn build_elastic_layout(n: usize) -> Result<ElasticLayout, Error> {
    if n < 2 {
        return Err(Error::Config(format!(
            "elastic layout needs n >= 2, got {n}"
        )));
    }
    let levels = ceil_log2(n as u64) as usize;
    let mut sizes = Vec::with_capacity(levels);
    let mut prev = n;
    for _ in 0..levels {
        let next = prev.div_ceil(2);
        sizes.push(prev - next);
        prev = next;
    }
    // prev == ceil(n / 2^L) == 1
    *sizes.last_mut().expect("at least one level") += prev;
    let mut offsets = Vec::with_capacity(levels);
    let mut at = 0;
    for &s in &sizes {
        offsets.push(at);
        at += s;
    }
    debug_assert_eq!(at, n);
    Ok(ElasticLayout { sizes, offsets })
}

/// Batch schedule: `batch_sizes[i]` insertions go into batch `B_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_sizes: Vec<usize>,
    pub total_insertions: usize,
}

impl BatchPlan {
    /// Cumulative insertion count at the end of each batch.
    pub fn boundaries(&self) -> Vec<usize> {
        self.batch_sizes
            .iter()
            .scan(0, |acc, &b| {
                *acc += b;
                Some(*acc)
            })
            .collect()
    }

    pub fn non_empty_batches(&self) -> usize {
        self.batch_sizes.iter().filter(|&&b| b > 0).count()
    }
}

/// Final occupancy target of array `A_i` once its second batch completes.
#[inline]
pub(crate) fn fill_target(size: usize, log2_inv_delta: u32) -> usize {
    size - (size >> (log2_inv_delta + 1))
}

/// Batch sizes forced by the end-of-batch occupancy guarantees, truncated to
/// `n - floor(delta * n)` total insertions.
pub fn plan_batches(layout: &ElasticLayout, log2_inv_delta: u32) -> Result<BatchPlan, Error> {
    let n = layout.total();
    let m = n - (n >> log2_inv_delta);
    let size = |i: usize| layout.sizes.get(i).copied().unwrap_or(0);

    let mut raw = Vec::with_capacity(layout.len() + 1);
    raw.push(three_quarters_ceil(size(0)));
    for i in 0..layout.len() {
        let b = fill_target(size(i), log2_inv_delta) as isize
            - three_quarters_ceil(size(i)) as isize
            + three_quarters_ceil(size(i + 1)) as isize;
        raw.push(b.max(0) as usize);
    }

    let mut batch_sizes = Vec::new();
    let mut remaining = m;
    for b in raw {
        if remaining == 0 {
            break;
        }
        let take = b.min(remaining);
        batch_sizes.push(take);
        remaining -= take;
    }
    if remaining > 0 {
        return Err(Error::Config(format!(
            "batch plan cannot place {m} insertions into {n} slots"
        )));
    }
    Ok(BatchPlan {
        batch_sizes,
        total_insertions: m,
    })
}

/// Probe budget `ceil(c * min(log2(1/eps)^2, log2(1/delta)))`.
pub fn f_budget(eps: f64, delta: f64, c: u32) -> Result<u64, Error> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::ZeroFreeFraction);
    }
    let eps = eps.min(1.0);
    let l = (1.0 / eps).log2();
    let v = c as f64 * (l * l).min((1.0 / delta).log2());
    Ok(v.ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    pub batch: usize,
    pub inserted: usize,
}

#[derive(Debug, Clone)]
pub struct ElasticTable {
    params: ElasticParams,
    layout: ElasticLayout,
    plan: BatchPlan,
    boundaries: Vec<usize>,
    source: ProbeSource,
    slots: Vec<Option<Key>>,
    occupancy: Vec<usize>,
    cursor: Cursor,
    max_search: u64,
}

impl ElasticTable {
    pub fn new(params: ElasticParams) -> Result<Self, Error> {
        let layout = build_elastic_layout(params.n)?;
        let plan = plan_batches(&layout, params.log2_inv_delta)?;
        let boundaries = plan.boundaries();
        Ok(Self {
            occupancy: vec![0; layout.len()],
            slots: vec![None; params.n],
            source: ProbeSource::new(params.seed),
            cursor: Cursor {
                batch: 0,
                inserted: 0,
            },
            max_search: 0,
            params,
            layout,
            plan,
            boundaries,
        })
    }

    pub fn params(&self) -> &ElasticParams {
        &self.params
    }

    pub fn layout(&self) -> &ElasticLayout {
        &self.layout
    }

    pub fn plan(&self) -> &BatchPlan {
        &self.plan
    }

    /// Occupied slots per array, 0-based.
    pub fn occupancy(&self) -> &[usize] {
        &self.occupancy
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    /// Largest search probe number handed out so far.
    pub fn max_search_probes(&self) -> u64 {
        self.max_search
    }

    pub fn is_complete(&self) -> bool {
        self.cursor.inserted >= self.plan.total_insertions
    }

    /// Batch the next insertion will belong to.
    pub fn next_batch(&self) -> Option<usize> {
        let at = self.cursor.inserted;
        self.boundaries.iter().position(|&end| at < end)
    }

    /// Free slots of 0-based array `a`; arrays past the end count as full.
    pub fn free(&self, a: usize) -> usize {
        match self.layout.sizes.get(a) {
            Some(&s) => s - self.occupancy[a],
            None => 0,
        }
    }

    /// Probe budget an insertion into batch `i >= 1` would receive right now.
    pub fn current_budget(&self, batch: usize) -> Result<u64, Error> {
        let a = batch - 1;
        let eps = self.free(a) as f64 / self.layout.sizes[a] as f64;
        f_budget(eps, self.params.delta(), self.params.c)
    }

    #[inline]
    fn probe_slot(&self, key: Key, a: usize, j: u64) -> usize {
        let size = self.layout.sizes[a] as u64;
        self.layout.offsets[a] + self.source.probe(key, a as u64 + 1, j, size) as usize
    }

    /// First free slot among `h_{a+1, 1..=limit}`.
    fn scan(&self, key: Key, a: usize, limit: u64) -> Option<(u64, usize)> {
        (1..=limit).find_map(|j| {
            let slot = self.probe_slot(key, a, j);
            self.slots[slot].is_none().then_some((j, slot))
        })
    }

    fn place(&mut self, key: Key, a: usize, j: u64, slot: usize) -> Result<u64, Error> {
        debug_assert!(self.slots[slot].is_none());
        let search = phi(a as u64 + 1, j)?;
        self.slots[slot] = Some(key);
        self.occupancy[a] += 1;
        self.max_search = self.max_search.max(search);
        Ok(search)
    }

    fn unbounded_scan(&self, key: Key, a: usize) -> Result<(u64, usize), Error> {
        let cap = scan_cap(self.layout.sizes[a] as u64, self.params.n as u64);
        self.scan(key, a, cap)
            .ok_or(Error::ExpensiveCaseCapExceeded { array: a + 1, cap })
    }

    fn choose(&self, key: Key, batch: usize) -> Result<(u8, usize, u64, usize, u64), Error> {
        if batch == 0 {
            let (j, slot) = self.unbounded_scan(key, 0)?;
            return Ok((0, 0, j, slot, j));
        }
        let lo = batch - 1;
        let hi = batch;
        let k = self.params.log2_inv_delta;
        let size_lo = self.layout.sizes[lo];
        let free_lo = self.free(lo);
        // eps_1 <= delta / 2  <=>  free <= floor(delta * size / 2)
        let lo_done = free_lo <= size_lo >> (k + 1);
        // eps_2 <= 1/4; a missing array counts as full
        let hi_done = match self.layout.sizes.get(hi) {
            Some(&s) => 4 * self.free(hi) <= s,
            None => true,
        };
        match (lo_done, hi_done) {
            (true, true) => Err(Error::TableFull(self.cursor.inserted)),
            (true, false) => {
                let (j, slot) = self.unbounded_scan(key, hi)?;
                Ok((2, hi, j, slot, j))
            }
            (false, true) => {
                let (j, slot) = self.unbounded_scan(key, lo)?;
                Ok((3, lo, j, slot, j))
            }
            (false, false) => {
                let budget = self.current_budget(batch)?;
                if let Some((j, slot)) = self.scan(key, lo, budget) {
                    return Ok((1, lo, j, slot, j));
                }
                let (j, slot) = self.unbounded_scan(key, hi)?;
                Ok((1, hi, j, slot, budget + j))
            }
        }
    }

    /// Inserts `key` as the next key of the current batch.
    pub fn insert_key(&mut self, key: Key) -> Result<Placement, Error> {
        let batch = self
            .next_batch()
            .ok_or(Error::TableFull(self.cursor.inserted))?;
        let (case, a, j, slot, insert_probes) = self.choose(key, batch)?;
        let search = self.place(key, a, j, slot)?;
        self.cursor = Cursor {
            batch,
            inserted: self.cursor.inserted + 1,
        };
        Ok(Placement {
            tag: Tag::Elastic {
                batch: batch as u32,
                case,
                array: a as u32 + 1,
                j,
            },
            search_probes: search,
            insert_probes,
            slot: slot as u64,
        })
    }

    /// Walks the linearized sequence `h_1, h_2, ...`, touching only probe
    /// numbers that decode to some `(i, j)` with `i <= L`, and stops once the
    /// probe number exceeds `cap`.
    pub fn lookup_with_cap(&self, key: Key, cap: u64) -> Lookup {
        let mut frontier: BinaryHeap<Reverse<(u64, usize, u64)>> = (0..self.layout.len())
            .filter_map(|a| phi(a as u64 + 1, 1).ok().map(|p| Reverse((p, a, 1))))
            .collect();
        while let Some(Reverse((p, a, j))) = frontier.pop() {
            if p > cap {
                break;
            }
            let slot = self.probe_slot(key, a, j);
            if self.slots[slot] == Some(key) {
                return Lookup::Found {
                    probes: p,
                    slot: slot as u64,
                };
            }
            if let Ok(next) = phi(a as u64 + 1, j + 1) {
                frontier.push(Reverse((next, a, j + 1)));
            }
        }
        Lookup::NotFound { probes: cap }
    }
}

impl OpenTable for ElasticTable {
    fn scheme(&self) -> Scheme {
        Scheme::Elastic
    }

    fn capacity(&self) -> usize {
        self.params.n
    }

    fn len(&self) -> usize {
        self.occupancy.iter().sum()
    }

    fn insert(&mut self, key: Key) -> Result<Placement, Error> {
        self.insert_key(key)
    }

    fn lookup(&self, key: Key) -> Lookup {
        self.lookup_with_cap(key, self.max_search)
    }

    fn slots(&self) -> &[Option<Key>] {
        &self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_64() {
        let l = build_elastic_layout(64).unwrap();
        assert_eq!(l.sizes, vec![32, 16, 8, 4, 2, 2]);
        assert_eq!(l.offsets, vec![0, 32, 48, 56, 60, 62]);
    }

    #[test]
    fn layout_2_is_single_array() {
        assert_eq!(build_elastic_layout(2).unwrap().sizes, vec![2]);
    }

    #[test]
    fn layout_rejects_tiny() {
        assert!(build_elastic_layout(1).is_err());
        assert!(build_elastic_layout(0).is_err());
    }

    #[test]
    fn plan_64_quarter() {
        let l = build_elastic_layout(64).unwrap();
        let p = plan_batches(&l, 2).unwrap();
        // B_0 = ceil(0.75 * 32) = 24
        // B_1 = 32 - floor(32/8) - 24 + ceil(0.75 * 16) = 32 - 4 - 24 + 12 = 16
        // B_2 = 16 - 2 - 12 + 6 = 8, cumulative 48 = 64 - 16
        assert_eq!(p.batch_sizes, vec![24, 16, 8]);
        assert_eq!(p.total_insertions, 48);
    }

    #[test]
    fn plan_truncates_to_single_partial_batch() {
        // n = 2, delta = 1/2: m = 1 < B_0 = ceil(0.75 * 2) = 2
        let l = build_elastic_layout(2).unwrap();
        let p = plan_batches(&l, 1).unwrap();
        assert_eq!(p.batch_sizes, vec![1]);
        assert_eq!(p.total_insertions, 1);
    }

    #[test]
    fn budget_examples() {
        let d = (-8f64).exp2();
        assert_eq!(f_budget(0.25, d, 4).unwrap(), 16);
        assert_eq!(f_budget((-6f64).exp2(), d, 4).unwrap(), 32);
        assert_eq!(f_budget(1.0, d, 4).unwrap(), 0);
        assert_eq!(f_budget(0.0, d, 4), Err(Error::ZeroFreeFraction));
    }

    #[test]
    fn first_insertion_is_phi_1_1() {
        let mut t = ElasticTable::new(ElasticParams::new(1 << 10, 2, 4, 9).unwrap()).unwrap();
        let p = t.insert_key(Key(0)).unwrap();
        assert_eq!(p.search_probes, 13);
        assert_eq!(p.insert_probes, 1);
        assert!(matches!(
            p.tag,
            Tag::Elastic {
                batch: 0,
                case: 0,
                array: 1,
                j: 1
            }
        ));
        assert_eq!(
            t.lookup(Key(0)),
            Lookup::Found {
                probes: 13,
                slot: p.slot
            }
        );
        assert_eq!(t.lookup(Key(1)), Lookup::NotFound { probes: 13 });
    }

    #[test]
    fn params_validation() {
        assert!(ElasticParams::new(64, 0, 4, 0).is_err());
        assert!(ElasticParams::new(64, 7, 4, 0).is_err());
        assert!(ElasticParams::new(64, 6, 4, 0).is_ok());
        assert!(ElasticParams::new(64, 2, 0, 0).is_err());
        assert!(ElasticParams::new(1, 1, 4, 0).is_err());
    }

    #[test]
    fn rejects_insert_past_plan() {
        let mut t = ElasticTable::new(ElasticParams::new(64, 2, 4, 1).unwrap()).unwrap();
        for k in 0..48 {
            t.insert_key(Key(k)).unwrap();
        }
        assert!(t.is_complete());
        assert!(matches!(t.insert_key(Key(48)), Err(Error::TableFull(48))));
        assert_eq!(t.len(), 48);
    }
}
