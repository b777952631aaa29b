//! Deterministic pseudo-randomness for simulation runs.
//!
//! The generator is splitmix64, fixed bit-exactly so that a seed produces
//! the same stream on every platform and in every port of this suite:
//!
//! ```text
//! state := state + 0x9E3779B97F4A7C15            (wrapping)
//! z := state
//! z := (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9    (wrapping)
//! z := (z XOR (z >> 27)) * 0x94D049BB133111EB    (wrapping)
//! output := z XOR (z >> 31)
//! ```
//!
//! Derived draws (ranges, booleans, byte fills) are defined below in terms
//! of `next_u64` and are part of the stable contract.

/// Seeded splitmix64 stream. Single-owner mutable state.
#[derive(Debug, Clone)]
pub struct SeededRng {
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    /// Uniform draw in `[0, bound)`. `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// Bernoulli draw; `p` is clamped to `[0, 1]`.
    pub fn next_bool(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        (self.next_u64() as f64 / u64::MAX as f64) < p
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(8) {
            let v = self.next_u64().to_be_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }

    /// Splits off an independent child stream. The child is seeded from the
    /// parent's output so forking is itself deterministic.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_match_for_ten_thousand_draws() {
        let mut a = SeededRng::new(0xBEEF);
        let mut b = SeededRng::new(0xBEEF);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn splitmix64_reference_vector() {
        // First three outputs for seed 0, from the published splitmix64
        // reference implementation.
        let mut r = SeededRng::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = SeededRng::new(1);
        let mut b = SeededRng::new(2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn fill_bytes_is_prefix_stable() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        let mut buf8 = [0u8; 8];
        let mut buf5 = [0u8; 5];
        a.fill_bytes(&mut buf8);
        b.fill_bytes(&mut buf5);
        assert_eq!(&buf8[..5], &buf5[..]);
    }

    #[test]
    fn next_bool_extremes() {
        let mut r = SeededRng::new(3);
        assert!(!r.next_bool(0.0));
        assert!(r.next_bool(1.0));
    }
}
