//! Seeded randomness shared by the harness and the randomized verifiers.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`; its output stream is fixed by the ChaCha
//! algorithm itself, so a seed reproduces on any platform. On top of the raw
//! 64-bit stream the mappings are:
//!
//! * integer in `0..n`: draw `v`; reject while `v < (2^64 - n) mod n`; return
//!   `v mod n` (unbiased rejection sampling). Agents are `1 + that`.
//! * unit interval: `(v >> 11) / 2^53`, a dyadic rational in `[0, 1)`, which
//!   is exact on both numeric backends.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dynamics::{AgentId, Configuration};
use crate::numeric::{Rational, Scalar};

pub const UNIT_BITS: u32 = 53;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator seeded with `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`, `n >= 1`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let v = self.next_u64();
            if v >= threshold {
                return v % n;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo) as u64 + 1;
        lo + self.below(span) as i64
    }

    /// Uniform agent among `1..=n`.
    #[inline]
    pub fn agent(&mut self, n: usize) -> AgentId {
        AgentId(1 + self.below(n as u64) as usize)
    }

    pub fn unit_mantissa(&mut self) -> u64 {
        self.next_u64() >> (64 - UNIT_BITS)
    }

    /// `lo + (hi - lo) * u` with `u` the dyadic unit draw.
    pub fn uniform<S: Scalar>(&mut self, lo: &S, hi: &S) -> S {
        let u = S::from_dyadic(self.unit_mantissa(), UNIT_BITS);
        lo.add(&hi.sub(lo).mul(&u))
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Random exact configuration for the randomized lemma checks. Half the draws
/// use a coarse grid (quarters in `[0, 2]`) so distance ties are common; the
/// rest use small-denominator rationals in `[-3, 3]`.
pub fn random_exact_configuration(rng: &mut SimRng, n: usize) -> Configuration<Rational> {
    let coarse = rng.below(2) == 0;
    let opinions = (0..n)
        .map(|_| {
            if coarse {
                Rational::new(rng.range_inclusive(0, 8), 4)
            } else {
                let den = rng.range_inclusive(1, 12);
                Rational::new(rng.range_inclusive(-3 * den, 3 * den), den)
            }
        })
        .collect();
    Configuration::new(opinions).expect("n >= 1")
}

/// Random exact configuration with a controlled cluster layout: a random
/// number of groups with random sizes summing to `n`, pairwise distinct
/// opinions, and group membership shuffled across ids.
pub fn random_cluster_layout(rng: &mut SimRng, n: usize) -> Configuration<Rational> {
    let groups = 1 + rng.below(n as u64) as usize;
    // random composition of n into `groups` positive parts
    let mut cuts: Vec<usize> = (1..n).collect();
    rng.shuffle(&mut cuts);
    let mut cuts: Vec<usize> = cuts.into_iter().take(groups - 1).collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(groups);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        sizes.push(c - prev);
        prev = c;
    }

    let mut values: Vec<Rational> = Vec::with_capacity(groups);
    while values.len() < groups {
        let den = rng.range_inclusive(1, 6);
        let v = Rational::new(rng.range_inclusive(-4 * den, 4 * den), den);
        if !values.contains(&v) {
            values.push(v);
        }
    }

    let mut opinions: Vec<Rational> = sizes
        .iter()
        .zip(&values)
        .flat_map(|(&size, v)| std::iter::repeat_n(v.clone(), size))
        .collect();
    rng.shuffle(&mut opinions);
    Configuration::new(opinions).expect("n >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::partition_clusters;
    use crate::numeric::Float;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut c = SimRng::with_stream(42, 1);
        assert_ne!(xs[0], c.next_u64());
    }

    #[test]
    fn agents_cover_range_uniformly() {
        let mut rng = SimRng::new(7);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            let a = rng.agent(5);
            assert!((1..=5).contains(&a.0));
            counts[a.index()] += 1;
        }
        for c in counts {
            assert!((9_400..10_600).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn uniform_draws_agree_across_backends() {
        let mut a = SimRng::new(3);
        let mut b = SimRng::new(3);
        for _ in 0..100 {
            let x: Rational = a.uniform(&Rational::zero(), &Rational::integer(1));
            let y: Float = b.uniform(&Float::zero(), &Float::new(1.0).unwrap());
            assert_eq!(x.to_f64(), y.get());
            assert!(y.get() >= 0.0 && y.get() < 1.0);
        }
    }

    #[test]
    fn cluster_layouts_have_requested_size() {
        let mut rng = SimRng::new(11);
        for n in 1..=30 {
            let x = random_cluster_layout(&mut rng, n);
            assert_eq!(x.len(), n);
            let p = partition_clusters(&x).unwrap();
            assert_eq!(p.sizes.iter().sum::<usize>(), n);
        }
    }
}
