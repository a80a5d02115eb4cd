//! Deterministic probe sequences and the pairing injection used to flatten
//! elastic hashing's two-dimensional probe grid into one sequence.
//!
//! Every scheme draws its probes from a [`ProbeSource`]. A probe is a pure
//! function of `(master_seed, key, stream_id, probe_index)` so that a lookup
//! can replay exactly what an insertion saw.

use std::fmt;

use crate::error::Error;

/// Number of bits a [`phi_encode`] result may occupy.
pub const PHI_MAX_BITS: u32 = 63;

const STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const KEY_SALT: u64 = 0xd1b5_4a32_d192_ed03;
const INDEX_SALT: u64 = 0x8cb9_2ba7_2f3d_8dd7;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for trial `trial` of a run seeded with `master`.
#[inline]
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    mix64(mix64(master ^ STREAM_SALT).wrapping_add(trial.wrapping_mul(KEY_SALT)))
}

/// A key inserted into one of the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(pub u64);

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Seeded generator of i.i.d. uniform probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeSource {
    master_seed: u64,
}

impl ProbeSource {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Raw 64-bit hash of a probe request.
    #[inline]
    pub fn hash(&self, key: Key, stream_id: u64, probe_index: u64) -> u64 {
        let mut h = mix64(self.master_seed ^ STREAM_SALT);
        h = mix64(h ^ key.0.wrapping_mul(KEY_SALT));
        h = mix64(h ^ stream_id.wrapping_add(STREAM_SALT));
        mix64(h ^ probe_index.wrapping_mul(INDEX_SALT))
    }

    /// Slot in `[0, modulus)` for the `probe_index`-th probe of `key` in
    /// stream `stream_id`.
    ///
    /// `modulus` must be nonzero.
    #[inline]
    pub fn probe(&self, key: Key, stream_id: u64, probe_index: u64, modulus: u64) -> u64 {
        debug_assert!(modulus >= 1, "probe modulus must be positive");
        ((self.hash(key, stream_id, probe_index) as u128 * modulus as u128) >> 64) as u64
    }
}

/// Argument pair `(i, j)` of the pairing injection: array index and probe
/// index within that array, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProbeIndexPair {
    pub i: u64,
    pub j: u64,
}

impl ProbeIndexPair {
    pub fn new(i: u64, j: u64) -> Result<Self, Error> {
        if i == 0 || j == 0 {
            return Err(Error::InvalidProbePair { i, j });
        }
        Ok(Self { i, j })
    }
}

#[inline]
fn bit_len(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// Encodes `(i, j)` as the integer whose binary form, most significant bit
/// first, is `1 b_1 1 b_2 ... 1 b_q 0 a_1 ... a_p` where `b` are the bits of
/// `j` and `a` the bits of `i`.
///
/// The result is strictly below `16 * i * j^2`.
pub fn phi_encode(pair: ProbeIndexPair) -> Result<u64, Error> {
    let ProbeIndexPair { i, j } = pair;
    if i == 0 || j == 0 {
        return Err(Error::InvalidProbePair { i, j });
    }
    let p = bit_len(i);
    let q = bit_len(j);
    if p + 2 * q + 1 > PHI_MAX_BITS {
        return Err(Error::PhiOverflow { i, j });
    }
    let mut out = 0u64;
    for k in (0..q).rev() {
        out = (out << 2) | 0b10 | ((j >> k) & 1);
    }
    out <<= 1;
    out = (out << p) | i;
    Ok(out)
}

/// Convenience wrapper over [`phi_encode`] for raw indices.
#[inline]
pub fn phi(i: u64, j: u64) -> Result<u64, Error> {
    phi_encode(ProbeIndexPair { i, j })
}

/// Inverse of [`phi_encode`]; `None` when `p` is not in its image.
pub fn phi_decode(p: u64) -> Option<ProbeIndexPair> {
    if p == 0 {
        return None;
    }
    let len = bit_len(p);
    let bit = |pos: u32| (p >> (len - 1 - pos)) & 1;
    let mut pos = 0;
    let mut j = 0u64;
    let mut q = 0;
    loop {
        if pos >= len {
            return None;
        }
        if bit(pos) == 0 {
            pos += 1;
            break;
        }
        if pos + 1 >= len {
            return None;
        }
        j = (j << 1) | bit(pos + 1);
        q += 1;
        pos += 2;
    }
    let p_bits = len - pos;
    if q == 0 || p_bits == 0 {
        return None;
    }
    let i = p & ((1u64 << p_bits) - 1);
    // Leading bits of both binary representations must be 1.
    if bit_len(i) != p_bits || bit_len(j) != q {
        return None;
    }
    Some(ProbeIndexPair { i, j })
}
