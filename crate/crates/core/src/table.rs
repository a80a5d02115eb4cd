use crate::error::Error;
use crate::metrics::{Placement, Scheme};
use crate::probe::Key;

/// Outcome of a query, with the number of probes it took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Found { probes: u64, slot: u64 },
    NotFound { probes: u64 },
}

impl Lookup {
    pub fn probes(&self) -> u64 {
        match *self {
            Lookup::Found { probes, .. } | Lookup::NotFound { probes } => probes,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Lookup::Found { .. })
    }
}

/// Shared surface of the open-addressing tables. None of them ever moves a
/// key once it has been placed.
pub trait OpenTable {
    fn scheme(&self) -> Scheme;

    /// Total number of slots `n`.
    fn capacity(&self) -> usize;

    /// Number of occupied slots.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&mut self, key: Key) -> Result<Placement, Error>;

    fn lookup(&self, key: Key) -> Lookup;

    /// Flat view of every slot.
    fn slots(&self) -> &[Option<Key>];
}

/// `ceil(log2 x)` for `x >= 1`.
#[inline]
pub(crate) fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

/// `ceil(log2 log2 n)` with a floor of 1.
pub fn log_log(n: u64) -> u64 {
    let l = ceil_log2(n.max(2)) as u64;
    (ceil_log2(l) as u64).max(1)
}

/// Probe cap for unbounded uniform scans over an array of `size` slots in a
/// table of `n` slots: `64 * size * ceil(log2 n)`.
pub(crate) fn scan_cap(size: u64, n: u64) -> u64 {
    64 * size * (ceil_log2(n.max(2)) as u64)
}
