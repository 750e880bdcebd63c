//! Named random substreams.
//!
//! Every stochastic entity (a machine, a test definition, a
//! material-supplier pair, ...) draws from its own ChaCha8 stream keyed by
//! `(replication_seed, label)`. Editing one entity in a scenario therefore
//! leaves the draw sequences of all other entities untouched, which is what
//! makes common-random-number comparisons tight.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit FNV-1a hash; used to turn entity labels into stream ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug)]
pub struct RngStream {
    replication_seed: u64,
    substream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(replication_seed: u64, label: &str) -> Self {
        let substream_id = fnv1a(label.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed);
        rng.set_stream(substream_id);
        RngStream {
            replication_seed,
            substream_id,
            rng,
        }
    }

    pub fn replication_seed(&self) -> u64 {
        self.replication_seed
    }

    pub fn substream_id(&self) -> u64 {
        self.substream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn draws(seed: u64, label: &str) -> Vec<u64> {
        let mut s = RngStream::new(seed, label);
        (0..16).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_key_same_sequence() {
        assert_eq!(draws(42, "machine:fermenter-1"), draws(42, "machine:fermenter-1"));
    }

    #[test]
    fn labels_and_seeds_separate_streams() {
        assert_ne!(draws(42, "machine:a"), draws(42, "machine:b"));
        assert_ne!(draws(42, "machine:a"), draws(43, "machine:a"));
    }

    #[test]
    fn sequence_is_pinned() {
        // Frozen so a dependency bump that changes the stream is noticed.
        assert_eq!(draws(1, "test")[..2], [11_511_576_792_930_426_374, 17_571_896_650_114_116_948]);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
