//! Counter-based 64-bit generator.
//!
//! Output `i` (counting from 0) of the stream keyed by `key` is
//!
//! ```text
//! z = key + (i + 1) * 0x9E3779B97F4A7C15           (mod 2^64)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! which is exactly the SplitMix64 sequence seeded with `key`; seed 1234567
//! yields 6457827717110365317, 3203168211198807973, 9817491932198370423, ...
//!
//! Derived quantities:
//! * [`CounterRng::below`]`(n)`: draw `x`, reject while `x < (2^64 - n) mod n`,
//!   return `x mod n`;
//! * [`CounterRng::next_f64`]: `(x >> 11) * 2^-53`, in `[0, 1)`.

use rand_core::{impls, Error as RandError, RngCore};

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer.
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to turn identifiers into stream keys.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Random access into the stream.
    pub fn at(key: u64, index: u64) -> u64 {
        mix64(key.wrapping_add(GAMMA.wrapping_mul(index.wrapping_add(1))))
    }

    /// Independent stream for a labelled sub-task: key `mix64(key ^ label)`.
    pub fn derive(key: u64, label: u64) -> Self {
        Self::new(mix64(key ^ label))
    }

    pub fn position(&self) -> u64 {
        self.counter
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> u64 {
        let out = Self::at(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw with success probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// First `m` elements of a Fisher-Yates shuffle of `items`, left in
    /// `items[..m]`: for `i` in `0..m`, swap `i` with `i + below(len - i)`.
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], m: usize) {
        let len = items.len();
        for i in 0..m.min(len) {
            let j = i + self.below((len - i) as u64) as usize;
            items.swap(i, j);
        }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_vectors() {
        let mut rng = CounterRng::new(1_234_567);
        let expected = [
            6_457_827_717_110_365_317u64,
            3_203_168_211_198_807_973,
            9_817_491_932_198_370_423,
            4_593_380_528_125_082_431,
            16_408_922_859_458_223_821,
        ];
        for e in expected {
            assert_eq!(rng.next(), e);
        }
        assert_eq!(CounterRng::at(1_234_567, 3), expected[3]);
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut rng = CounterRng::new(7);
        let mut seen = [false; 5];
        for _ in 0..200 {
            let v = rng.below(5) as usize;
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(rng.below(1), 0);
    }

    #[test]
    fn unit_interval() {
        let mut rng = CounterRng::new(99);
        for _ in 0..1000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn partial_shuffle_is_a_permutation() {
        let mut rng = CounterRng::new(3);
        let mut v: Vec<u32> = (0..50).collect();
        rng.partial_shuffle(&mut v, 10);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
