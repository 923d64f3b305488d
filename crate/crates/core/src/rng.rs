//! Seedable, splittable random streams.
//!
//! Every stream is a PCG-64 generator (XSL-RR 128/64, `rand_pcg::Pcg64`). A
//! 64-bit seed is expanded into the 128-bit state and stream selector by four
//! chained SplitMix64 outputs `a, b, c, d`: `state = a << 64 | b`,
//! `stream = c << 64 | d`.
//!
//! Child seeds come from [`derive_seed`]:
//!
//! ```text
//! h0 = splitmix64(master)
//! h1 = splitmix64(h0 ^ tag)
//! h2 = splitmix64(h1 ^ i)
//! seed = splitmix64(h2 ^ j)
//! ```
//!
//! where `tag` is the FNV-1a hash of an ASCII stream name (see [`tag`]).
//!
//! Uniform reals use the top 53 bits of `next_u64`. Normal deviates use the
//! cosine branch of Box–Muller on two uniforms, `u1` taken from `(0, 1]`.
//! Transcendentals come from `libm` so streams do not depend on the platform
//! math library.

use rand_core::Rng;
use rand_pcg::Pcg64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a of a stream name.
pub const fn tag(name: &str) -> u64 {
    let bytes = name.as_bytes();
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut k = 0;
    while k < bytes.len() {
        h ^= bytes[k] as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
        k += 1;
    }
    h
}

pub fn derive_seed(master: u64, tag: u64, i: u64, j: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ tag);
    let h = splitmix64(h ^ i);
    splitmix64(h ^ j)
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: Pcg64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let a = splitmix64(seed);
        let b = splitmix64(a);
        let c = splitmix64(b);
        let d = splitmix64(c);
        let state = ((a as u128) << 64) | b as u128;
        let stream = ((c as u128) << 64) | d as u128;
        Self {
            inner: Pcg64::new(state, stream),
        }
    }

    /// Stream `(tag, i, j)` under `master`.
    pub fn derived(master: u64, tag: u64, i: u64, j: u64) -> Self {
        Self::new(derive_seed(master, tag, i, j))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Uniform integer in `0..n` by 128-bit multiply-high.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher–Yates, swapping from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
