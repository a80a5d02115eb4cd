//! Funnel hashing: a greedy open-addressing table built from bucketed levels
//! of geometrically shrinking size, backed by a small special array.
//!
//! A key tries one bucket in each level `A_1 .. A_alpha` and takes the first
//! empty slot it sees. Keys that fall through every level go to the special
//! array: a capped uniform-probing half `B`, then a two-choice half `C`.

use serde::Serialize;

use crate::error::Error;
use crate::metrics::{Placement, Scheme, Tag};
use crate::probe::{Key, ProbeSource};
use crate::table::{log_log, Lookup, OpenTable};

/// Largest free fraction the layout is built for.
pub const MAX_LAYOUT_LOG2_INV_DELTA: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunnelParams {
    pub n: usize,
    /// `k` with `delta = 2^-k`; the insertion count always uses this value.
    pub log2_inv_delta: u32,
    pub seed: u64,
}

impl FunnelParams {
    pub fn new(n: usize, log2_inv_delta: u32, seed: u64) -> Result<Self, Error> {
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
        Ok(Self {
            n,
            log2_inv_delta,
            seed,
        })
    }

    /// `log2(1/delta)` used for sizing: delta is clamped to at most 1/8.
    pub fn layout_log2_inv_delta(&self) -> u32 {
        self.log2_inv_delta.max(MAX_LAYOUT_LOG2_INV_DELTA)
    }

    pub fn is_clamped(&self) -> bool {
        self.log2_inv_delta < MAX_LAYOUT_LOG2_INV_DELTA
    }

    /// `ceil(4 log2(1/delta) + 10)` levels.
    pub fn alpha(&self) -> usize {
        4 * self.layout_log2_inv_delta() as usize + 10
    }

    /// `ceil(2 log2(1/delta))` slots per bucket.
    pub fn beta(&self) -> usize {
        2 * self.layout_log2_inv_delta() as usize
    }

    pub fn insertions(&self) -> usize {
        self.n - (self.n >> self.log2_inv_delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelLayout {
    pub alpha: usize,
    pub beta: usize,
    /// Buckets per level, `a_1 .. a_alpha`.
    pub level_bucket_counts: Vec<usize>,
    /// Slot offset of each level in the flat array.
    pub level_offsets: Vec<usize>,
    pub special_size: usize,
    pub special_b_size: usize,
    pub special_c_size: usize,
    pub c_bucket_size: usize,
    pub c_bucket_count: usize,
    /// Slots of `C` that do not form a whole bucket.
    pub c_waste: usize,
    /// `ceil(log2 log2 n)`: probe cap in `B`.
    pub b_probe_cap: usize,
    /// Smallest `sum_{j>i} |A_j| / |A_i|` over `i <= alpha - 10`; reported only.
    pub min_tail_ratio: f64,
    /// Whether delta was clamped to 1/8 for sizing.
    pub delta_clamped: bool,
}

impl FunnelLayout {
    pub fn level_size(&self, level: usize) -> usize {
        self.level_bucket_counts[level] * self.beta
    }

    pub fn b_offset(&self) -> usize {
        self.level_offsets[self.alpha - 1] + self.level_size(self.alpha - 1)
    }

    pub fn c_offset(&self) -> usize {
        self.b_offset() + self.special_b_size
    }

    /// Upper bound on probes for any insertion or lookup.
    pub fn probe_cap(&self) -> u64 {
        (self.alpha * self.beta + self.b_probe_cap + 2 * self.c_bucket_size) as u64
    }
}

fn next_level(a: usize) -> usize {
    let next = (3 * a).div_ceil(4);
    // ceil(3a/4) stalls at 3 and 2; stepping down by one stays within +-1.
    if next >= a {
        a.saturating_sub(1).max(1)
    } else {
        next
    }
}

fn geometric_levels(first: usize, alpha: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(alpha);
    let mut a = first;
    for _ in 0..alpha {
        out.push(a);
        a = next_level(a);
    }
    out
}

/// Splits `buckets` into `alpha` levels, each within one of
/// `ceil(3 a_i / 4)` of its predecessor (trailing levels bottom out at 1).
///
/// Chooses the largest first level whose geometric sequence fits, then
/// hands the remainder out one bucket each to the leading levels.
pub(crate) fn split_levels(buckets: usize, alpha: usize) -> Result<Vec<usize>, Error> {
    if buckets < alpha {
        return Err(Error::Config(format!(
            "{buckets} buckets cannot fill {alpha} funnel levels; n is too small for this delta"
        )));
    }
    let sum = |first: usize| geometric_levels(first, alpha).iter().sum::<usize>();
    let (mut lo, mut hi) = (1usize, buckets);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if sum(mid) <= buckets {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut levels = geometric_levels(lo, alpha);
    let remainder = buckets - levels.iter().sum::<usize>();
    debug_assert!(remainder < alpha);
    for a in levels.iter_mut().take(remainder) {
        *a += 1;
    }
    Ok(levels)
}

pub fn build_funnel_layout(params: &FunnelParams) -> Result<FunnelLayout, Error> {
    let n = params.n;
    let k = params.layout_log2_inv_delta();
    let alpha = params.alpha();
    let beta = params.beta();

    // ceil(delta n / 2) <= |special| <= floor(3 delta n / 4)
    let lo = n.div_ceil(1 << (k + 1));
    let hi = (3 * n) >> (k + 2);
    if lo < 2 {
        return Err(Error::Config(format!(
            "n = {n} too small: special array would hold < 2 slots"
        )));
    }
    let special_size = (lo..=hi)
        .find(|s| (n - s).is_multiple_of(beta))
        .ok_or_else(|| {
            Error::Config(format!(
                "no special-array size in [{lo}, {hi}] leaves A' divisible by {beta}"
            ))
        })?;

    let buckets = (n - special_size) / beta;
    let level_bucket_counts = split_levels(buckets, alpha)?;
    let mut level_offsets = Vec::with_capacity(alpha);
    let mut at = 0;
    for &a in &level_bucket_counts {
        level_offsets.push(at);
        at += a * beta;
    }

    let special_b_size = special_size.div_ceil(2);
    let special_c_size = special_size - special_b_size;
    let ll = log_log(n as u64) as usize;
    let c_bucket_size = 2 * ll;
    let c_bucket_count = special_c_size / c_bucket_size;
    if c_bucket_count == 0 {
        return Err(Error::Config(format!(
            "n = {n} too small: two-choice half of {special_c_size} slots holds no bucket of {c_bucket_size}"
        )));
    }

    let min_tail_ratio = (0..alpha.saturating_sub(10))
        .map(|i| {
            let tail: usize = level_bucket_counts[i + 1..].iter().sum();
            tail as f64 / level_bucket_counts[i] as f64
        })
        .fold(f64::INFINITY, f64::min);

    Ok(FunnelLayout {
        alpha,
        beta,
        level_bucket_counts,
        level_offsets,
        special_size,
        special_b_size,
        special_c_size,
        c_bucket_size,
        c_bucket_count,
        c_waste: special_c_size - c_bucket_count * c_bucket_size,
        b_probe_cap: ll,
        min_tail_ratio,
        delta_clamped: params.is_clamped(),
    })
}

/// Result of one attempted insertion into a level bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attempt {
    Success { slot: usize, probes: u64 },
    Fail { probes: u64 },
}

#[derive(Debug, Clone)]
pub struct FunnelTable {
    params: FunnelParams,
    layout: FunnelLayout,
    source: ProbeSource,
    slots: Vec<Option<Key>>,
    /// Occupancy of every level bucket, levels concatenated.
    bucket_fill: Vec<u32>,
    bucket_base: Vec<usize>,
    c_fill: Vec<u32>,
    b_count: usize,
    count: usize,
}

impl FunnelTable {
    pub fn new(params: FunnelParams) -> Result<Self, Error> {
        let layout = build_funnel_layout(&params)?;
        let total_buckets = layout.level_bucket_counts.iter().sum();
        let bucket_base = layout
            .level_bucket_counts
            .iter()
            .scan(0, |acc, &a| {
                let base = *acc;
                *acc += a;
                Some(base)
            })
            .collect();
        Ok(Self {
            source: ProbeSource::new(params.seed),
            slots: vec![None; params.n],
            bucket_fill: vec![0; total_buckets],
            bucket_base,
            c_fill: vec![0; layout.c_bucket_count],
            b_count: 0,
            count: 0,
            params,
            layout,
        })
    }

    pub fn params(&self) -> &FunnelParams {
        &self.params
    }

    pub fn layout(&self) -> &FunnelLayout {
        &self.layout
    }

    /// Occupied slots per level, 0-based.
    pub fn level_occupancy(&self) -> Vec<usize> {
        self.layout
            .level_bucket_counts
            .iter()
            .zip(&self.bucket_base)
            .map(|(&a, &base)| {
                self.bucket_fill[base..base + a]
                    .iter()
                    .map(|&f| f as usize)
                    .sum()
            })
            .collect()
    }

    pub fn b_occupancy(&self) -> usize {
        self.b_count
    }

    pub fn c_bucket_occupancy(&self) -> &[u32] {
        &self.c_fill
    }

    /// Bucket index within `level` (0-based) that `key` hashes to.
    pub fn bucket_of(&self, level: usize, key: Key) -> usize {
        let count = self.layout.level_bucket_counts[level] as u64;
        self.source.probe(key, level as u64 + 1, 1, count) as usize
    }

    fn bucket_start(&self, level: usize, bucket: usize) -> usize {
        self.layout.level_offsets[level] + bucket * self.layout.beta
    }

    /// Attempted insertion of `key` into 0-based `level`.
    pub fn attempted_insertion(&mut self, level: usize, key: Key) -> Attempt {
        let bucket = self.bucket_of(level, key);
        let start = self.bucket_start(level, bucket);
        let beta = self.layout.beta;
        match self.slots[start..start + beta]
            .iter()
            .position(Option::is_none)
        {
            Some(pos) => {
                self.slots[start + pos] = Some(key);
                self.bucket_fill[self.bucket_base[level] + bucket] += 1;
                Attempt::Success {
                    slot: start + pos,
                    probes: pos as u64 + 1,
                }
            }
            None => Attempt::Fail {
                probes: beta as u64,
            },
        }
    }

    fn alpha_stream(&self, offset: u64) -> u64 {
        self.layout.alpha as u64 + offset
    }

    fn b_slot(&self, key: Key, idx: u64) -> usize {
        let size = self.layout.special_b_size as u64;
        self.layout.b_offset() + self.source.probe(key, self.alpha_stream(1), idx, size) as usize
    }

    /// The two buckets of `C` that `key` may use.
    pub fn c_choices(&self, key: Key) -> (usize, usize) {
        let count = self.layout.c_bucket_count as u64;
        let a = self.source.probe(key, self.alpha_stream(2), 1, count) as usize;
        let b = self.source.probe(key, self.alpha_stream(3), 1, count) as usize;
        (a, b)
    }

    /// Interleaved scan order `a_1, b_1, a_2, b_2, ...` over the two buckets,
    /// as `(bucket, flat slot)` pairs.
    fn c_scan(&self, key: Key) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (a, b) = self.c_choices(key);
        let size = self.layout.c_bucket_size;
        let base = self.layout.c_offset();
        (0..size).flat_map(move |s| [(a, base + a * size + s), (b, base + b * size + s)])
    }

    fn search_special(
        &self,
        key: Key,
        mut on_slot: impl FnMut(usize) -> bool,
    ) -> Option<(Tag, usize, u64)> {
        let mut probes = 0u64;
        for idx in 1..=self.layout.b_probe_cap as u64 {
            probes += 1;
            let slot = self.b_slot(key, idx);
            if on_slot(slot) {
                return Some((Tag::SpecialB, slot, probes));
            }
        }
        for (_, slot) in self.c_scan(key) {
            probes += 1;
            if on_slot(slot) {
                return Some((Tag::SpecialC, slot, probes));
            }
        }
        None
    }

    pub fn insert_key(&mut self, key: Key) -> Result<Placement, Error> {
        if self.count >= self.params.insertions() {
            return Err(Error::TableFull(self.count));
        }
        let mut probes = 0u64;
        for level in 0..self.layout.alpha {
            match self.attempted_insertion(level, key) {
                Attempt::Success { slot, probes: used } => {
                    probes += used;
                    self.count += 1;
                    return Ok(Placement {
                        tag: Tag::Level(level as u32 + 1),
                        search_probes: probes,
                        insert_probes: probes,
                        slot: slot as u64,
                    });
                }
                Attempt::Fail { probes: used } => probes += used,
            }
        }
        let slots = &self.slots;
        let found = self.search_special(key, |slot| slots[slot].is_none());
        let (tag, slot, special_probes) = found.ok_or(Error::FunnelOverflow)?;
        self.slots[slot] = Some(key);
        match tag {
            Tag::SpecialB => self.b_count += 1,
            _ => {
                let bucket = (slot - self.layout.c_offset()) / self.layout.c_bucket_size;
                self.c_fill[bucket] += 1;
            }
        }
        self.count += 1;
        let total = probes + special_probes;
        Ok(Placement {
            tag,
            search_probes: total,
            insert_probes: total,
            slot: slot as u64,
        })
    }
}

impl OpenTable for FunnelTable {
    fn scheme(&self) -> Scheme {
        Scheme::Funnel
    }

    fn capacity(&self) -> usize {
        self.params.n
    }

    fn len(&self) -> usize {
        self.count
    }

    fn insert(&mut self, key: Key) -> Result<Placement, Error> {
        self.insert_key(key)
    }

    /// Replays the insertion order and stops at the first empty slot.
    fn lookup(&self, key: Key) -> Lookup {
        let beta = self.layout.beta;
        let mut probes = 0u64;
        for level in 0..self.layout.alpha {
            let start = self.bucket_start(level, self.bucket_of(level, key));
            for slot in start..start + beta {
                probes += 1;
                match self.slots[slot] {
                    Some(k) if k == key => {
                        return Lookup::Found {
                            probes,
                            slot: slot as u64,
                        }
                    }
                    None => return Lookup::NotFound { probes },
                    Some(_) => {}
                }
            }
        }
        let mut stop_empty = false;
        let hit = self.search_special(key, |slot| match self.slots[slot] {
            Some(k) => k == key,
            None => {
                stop_empty = true;
                true
            }
        });
        match hit {
            Some((_, slot, extra)) if !stop_empty => Lookup::Found {
                probes: probes + extra,
                slot: slot as u64,
            },
            Some((_, _, extra)) => Lookup::NotFound {
                probes: probes + extra,
            },
            None => Lookup::NotFound {
                probes: self.layout.probe_cap(),
            },
        }
    }

    fn slots(&self) -> &[Option<Key>] {
        &self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, k: u32) -> FunnelParams {
        FunnelParams::new(n, k, 1).unwrap()
    }

    #[test]
    fn layout_1024_eighth() {
        let l = build_funnel_layout(&params(1024, 3)).unwrap();
        assert_eq!((l.alpha, l.beta), (22, 6));
        assert_eq!(l.special_size, 64);
        assert_eq!(l.level_bucket_counts.iter().sum::<usize>(), 160);
        assert_eq!(l.level_bucket_counts.len(), 22);
        assert_eq!(l.c_bucket_size, 8);
        assert_eq!(l.special_b_size + l.special_c_size, 64);
        assert_eq!(l.c_bucket_count, 4);
        assert_eq!(l.c_waste, 0);
    }

    #[test]
    fn clamps_large_delta() {
        let p = params(1 << 12, 1);
        assert!(p.is_clamped());
        assert_eq!((p.alpha(), p.beta()), (22, 6));
        assert_eq!(p.insertions(), 1 << 11);
        assert!(build_funnel_layout(&p).unwrap().delta_clamped);
    }

    #[test]
    fn split_levels_stalls_are_broken() {
        assert_eq!(next_level(3), 2);
        assert_eq!(next_level(2), 1);
        assert_eq!(next_level(1), 1);
        assert_eq!(next_level(4), 3);
        assert_eq!(split_levels(22, 22).unwrap(), vec![1; 22]);
        assert!(split_levels(21, 22).is_err());
    }

    #[test]
    fn tiny_n_is_rejected() {
        assert!(build_funnel_layout(&params(64, 2)).is_err());
    }

    /// First key from `from` on that hashes to `bucket` of `level`.
    fn key_in_bucket(t: &FunnelTable, level: usize, bucket: usize, from: u64) -> Key {
        (from..)
            .map(Key)
            .find(|&k| t.bucket_of(level, k) == bucket)
            .unwrap()
    }

    #[test]
    fn attempted_insertion_scan_order() {
        let mut t = FunnelTable::new(params(1024, 3)).unwrap();
        let beta = t.layout.beta;
        let key = Key(12345);
        let bucket = t.bucket_of(0, key);
        let start = t.bucket_start(0, bucket);
        assert_eq!(
            t.attempted_insertion(0, key),
            Attempt::Success {
                slot: start,
                probes: 1
            }
        );
        // leave only the last slot free
        for s in start + 1..start + beta - 1 {
            t.slots[s] = Some(Key(u64::MAX - s as u64));
        }
        let k = key_in_bucket(&t, 0, bucket, 0);
        assert_eq!(
            t.attempted_insertion(0, k),
            Attempt::Success {
                slot: start + beta - 1,
                probes: beta as u64
            }
        );
        let k2 = key_in_bucket(&t, 0, bucket, k.0 + 1);
        assert_eq!(
            t.attempted_insertion(0, k2),
            Attempt::Fail {
                probes: beta as u64
            }
        );
    }

    /// Fills every level bucket `key` maps to.
    fn block_levels(t: &mut FunnelTable, key: Key) {
        for level in 0..t.layout.alpha {
            let start = t.bucket_start(level, t.bucket_of(level, key));
            for s in start..start + t.layout.beta {
                t.slots[s] = Some(Key(u64::MAX - s as u64));
            }
        }
    }

    #[test]
    fn falls_through_levels_into_b() {
        let mut t = FunnelTable::new(params(1 << 12, 3)).unwrap();
        let key = Key(5);
        block_levels(&mut t, key);
        let p = t.insert_key(key).unwrap();
        let l = &t.layout;
        assert_eq!(p.tag, Tag::SpecialB);
        assert_eq!(p.insert_probes, (l.alpha * l.beta) as u64 + 1);
        assert_eq!(p.slot as usize, t.b_slot(key, 1));
    }

    #[test]
    fn c_scan_picks_emptier_bucket() {
        let mut t = FunnelTable::new(params(1 << 12, 3)).unwrap();
        let key = (0..)
            .map(Key)
            .find(|&k| {
                let (a, b) = t.c_choices(k);
                a != b
            })
            .unwrap();
        block_levels(&mut t, key);
        let b_start = t.layout.b_offset();
        for s in b_start..b_start + t.layout.special_b_size {
            t.slots[s] = Some(Key(u64::MAX - s as u64));
        }
        let (a, b) = t.c_choices(key);
        let size = t.layout.c_bucket_size;
        let base = t.layout.c_offset();
        // a holds 2 keys, b holds 1
        for s in [base + a * size, base + a * size + 1, base + b * size] {
            t.slots[s] = Some(Key(u64::MAX - s as u64));
        }
        t.c_fill[a] = 2;
        t.c_fill[b] = 1;
        let p = t.insert_key(key).unwrap();
        let l = &t.layout;
        assert_eq!(p.tag, Tag::SpecialC);
        assert_eq!(p.slot as usize, base + b * size + 1);
        // a1, b1, a2, b2
        assert_eq!(
            p.insert_probes,
            (l.alpha * l.beta + l.b_probe_cap) as u64 + 4
        );
        assert_eq!(t.c_fill[b], 2);
    }
}
