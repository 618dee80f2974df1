//! Counter-based randomness.
//!
//! Every random quantity is addressed by `(seed, stream, index)`. A worker
//! handling indices `a..b` seeks straight to `a`, so the values drawn never
//! depend on how work was split across threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Named streams so independent consumers never share random words.
pub mod streams {
    pub const MEASURE_SAMPLE: u64 = 1;
    pub const PATTERN_WINDOWS: u64 = 2;
    pub const KS_WORDS: u64 = 3;
    pub const ROKHLIN_SEARCH: u64 = 4;
    pub const ROKHLIN_SAMPLING: u64 = 5;
    pub const VISIT_WINDOWS: u64 = 6;
    pub const COMPAT_SAMPLING: u64 = 7;
}

/// Sequential reader positioned at a counter offset.
///
/// `words_per_index` fixes how many 64-bit words each logical index owns,
/// which keeps index `i` at the same place in the keystream whichever chunk
/// reads it.
pub struct CounterRng {
    inner: ChaCha12Rng,
}

impl CounterRng {
    pub fn at(seed: u64, stream: u64, index: u64, words_per_index: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        // word position counts 32-bit words
        inner.set_word_pos(u128::from(index) * u128::from(words_per_index) * 2);
        CounterRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1): `(k + 1/2) / 2^52`.
    pub fn uniform(&mut self) -> f64 {
        open_unit(self.inner.next_u64())
    }

    pub fn inner(&mut self) -> &mut ChaCha12Rng {
        &mut self.inner
    }
}

/// Maps 64 random bits to the open unit interval, never returning 0 or 1.
pub fn open_unit(bits: u64) -> f64 {
    // 52 bits keep the largest value 1 - 2^-53 exactly representable
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// One uniform for logical index `index` of `stream`.
pub fn uniform_at(seed: u64, stream: u64, index: u64) -> f64 {
    CounterRng::at(seed, stream, index, 1).uniform()
}
