//! Greedy uniform probing over the whole array, used as the baseline.

use crate::error::Error;
use crate::metrics::{Placement, Scheme, Tag};
use crate::probe::{Key, ProbeSource};
use crate::table::{scan_cap, Lookup, OpenTable};

const STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct UniformTable {
    source: ProbeSource,
    slots: Vec<Option<Key>>,
    count: usize,
    cap: u64,
}

impl UniformTable {
    pub fn new(n: usize, seed: u64) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::Config("uniform table needs n >= 1".into()));
        }
        Ok(Self {
            source: ProbeSource::new(seed),
            slots: vec![None; n],
            count: 0,
            cap: scan_cap(n as u64, n as u64).max(64),
        })
    }

    /// Probe budget after which an insertion gives up.
    pub fn probe_cap(&self) -> u64 {
        self.cap
    }

    #[inline]
    fn probe(&self, key: Key, idx: u64) -> usize {
        self.source.probe(key, STREAM, idx, self.slots.len() as u64) as usize
    }
}

impl OpenTable for UniformTable {
    fn scheme(&self) -> Scheme {
        Scheme::Uniform
    }

    fn capacity(&self) -> usize {
        self.slots.len()
    }

    fn len(&self) -> usize {
        self.count
    }

    fn insert(&mut self, key: Key) -> Result<Placement, Error> {
        if self.count >= self.slots.len() {
            return Err(Error::TableFull(self.count));
        }
        for idx in 1..=self.cap {
            let slot = self.probe(key, idx);
            if self.slots[slot].is_none() {
                self.slots[slot] = Some(key);
                self.count += 1;
                return Ok(Placement {
                    tag: Tag::Uniform,
                    search_probes: idx,
                    insert_probes: idx,
                    slot: slot as u64,
                });
            }
        }
        Err(Error::ProbeCapExceeded {
            scheme: Scheme::Uniform,
            cap: self.cap,
        })
    }

    fn lookup(&self, key: Key) -> Lookup {
        for idx in 1..=self.cap {
            let slot = self.probe(key, idx);
            match self.slots[slot] {
                Some(k) if k == key => {
                    return Lookup::Found {
                        probes: idx,
                        slot: slot as u64,
                    }
                }
                None => return Lookup::NotFound { probes: idx },
                Some(_) => {}
            }
        }
        Lookup::NotFound { probes: self.cap }
    }

    fn slots(&self) -> &[Option<Key>] {
        &self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_insert_takes_one_probe() {
        let mut t = UniformTable::new(16, 3).unwrap();
        let p = t.insert(Key(0)).unwrap();
        assert_eq!(p.search_probes, 1);
        assert_eq!(p.insert_probes, 1);
        assert_eq!(
            t.lookup(Key(0)),
            Lookup::Found {
                probes: 1,
                slot: p.slot
            }
        );
    }

    #[test]
    fn fills_completely_and_rejects_overflow() {
        let mut t = UniformTable::new(8, 11).unwrap();
        for k in 0..8 {
            t.insert(Key(k)).unwrap();
        }
        assert_eq!(t.len(), 8);
        assert!(matches!(t.insert(Key(99)), Err(Error::TableFull(8))));
        // A full table can only answer a miss by exhausting the cap.
        assert_eq!(
            t.lookup(Key(99)),
            Lookup::NotFound {
                probes: t.probe_cap()
            }
        );
    }

    #[test]
    fn absent_key_stops_at_first_empty_probe() {
        let mut t = UniformTable::new(64, 5).unwrap();
        for k in 0..32 {
            t.insert(Key(k)).unwrap();
        }
        let Lookup::NotFound { probes } = t.lookup(Key(1000)) else {
            panic!("absent key found")
        };
        let slot = t.probe(Key(1000), probes);
        assert!(t.slots[slot].is_none());
        for idx in 1..probes {
            assert!(t.slots[t.probe(Key(1000), idx)].is_some());
        }
    }

    #[test]
    fn two_slot_table_with_one_free_averages_two_probes() {
        let trials = 20_000u64;
        let mut total = 0;
        for seed in 0..trials {
            let mut t = UniformTable::new(2, seed).unwrap();
            t.insert(Key(0)).unwrap();
            total += t.insert(Key(1)).unwrap().insert_probes;
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 2.0).abs() <= 0.1, "mean {mean}");
    }
}
