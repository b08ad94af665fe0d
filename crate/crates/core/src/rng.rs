//! Counter-based random streams.
//!
//! Every 64-bit output is a pure function of `(seed, stream, counter)`: the
//! Philox4x32-10 block cipher is keyed by the seed and applied to the 128-bit
//! block `[block_lo, block_hi, stream_lo, stream_hi]`, where `block = counter / 2`.
//! Each block yields two outputs, `x0 | x1 << 32` for even counters and
//! `x2 | x3 << 32` for odd ones. This sequence is part of the reproducibility
//! contract of every simulation built on it.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer; used to derive stream identifiers from labels.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_133F_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a tuple of words.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |h, &w| mix64(h ^ mix64(w.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
    pub counter: u64,
    cached_block: Option<(u64, [u32; 4])>,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::at(seed, stream, 0)
    }

    pub fn at(seed: u64, stream: u64, counter: u64) -> Self {
        RngStream {
            seed,
            stream,
            counter,
            cached_block: None,
        }
    }

    /// Output at an arbitrary counter without touching the stream position.
    pub fn word_at(seed: u64, stream: u64, counter: u64) -> u64 {
        let block = Self::block(seed, stream, counter >> 1);
        Self::pick(&block, counter)
    }

    #[inline]
    fn block(seed: u64, stream: u64, index: u64) -> [u32; 4] {
        philox4x32_10(
            [index as u32, (index >> 32) as u32, stream as u32, (stream >> 32) as u32],
            [seed as u32, (seed >> 32) as u32],
        )
    }

    #[inline]
    fn pick(block: &[u32; 4], counter: u64) -> u64 {
        if counter & 1 == 0 {
            u64::from(block[0]) | (u64::from(block[1]) << 32)
        } else {
            u64::from(block[2]) | (u64::from(block[3]) << 32)
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let index = self.counter >> 1;
        let block = match self.cached_block {
            Some((i, b)) if i == index => b,
            _ => {
                let b = Self::block(self.seed, self.stream, index);
                self.cached_block = Some((index, b));
                b
            }
        };
        let out = Self::pick(&block, self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on the open interval `(0, 1)` with 53 random bits; consumes one word.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller (cosine branch); consumes two words.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Sub-stream positioned at `counter + offset`; the parent is not advanced.
    pub fn fork_at(&self, offset: u64) -> RngStream {
        RngStream::at(self.seed, self.stream, self.counter.wrapping_add(offset))
    }

    pub fn advance(&mut self, words: u64) {
        self.counter = self.counter.wrapping_add(words);
    }
}
