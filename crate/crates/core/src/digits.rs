//! Lazily extended binary digit streams.
//!
//! A [`DigitStream`] is the exact representation of a point of `[0, 1]` used by
//! the bit-stream backend. Digits are produced on demand from a
//! [`DigitSource`], so an orbit of the doubling or tent map can run for as
//! long as needed without losing precision.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

/// Generator for the digits that follow an explicit prefix.
#[derive(Debug, Clone)]
pub enum DigitSource {
    /// Every remaining digit equals the given bit.
    Constant(bool),
    /// The pattern repeats forever, starting right after the prefix.
    Periodic(Vec<bool>),
    /// Independent digits, each equal to 0 with probability `zero_prob`.
    Iid { rng: ChaCha8Rng, zero_prob: f64 },
}

/// Binary expansion `0.d1 d2 d3 ...` of a point, extended on demand.
#[derive(Debug, Clone)]
pub struct DigitStream {
    words: Vec<u64>,
    len: usize,
    prefix_len: usize,
    source: DigitSource,
    offset: usize,
    flip: bool,
}

impl DigitStream {
    fn from_raw(words: Vec<u64>, len: usize, source: DigitSource) -> Self {
        Self {
            words,
            len,
            prefix_len: len,
            source,
            offset: 0,
            flip: false,
        }
    }

    /// A stream with the given leading digits followed by `tail`.
    pub fn with_prefix(prefix: &[bool], tail: DigitSource) -> Self {
        let mut words = vec![0u64; prefix.len().div_ceil(64)];
        for (i, &b) in prefix.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (63 - i % 64);
            }
        }
        Self::from_raw(words, prefix.len(), tail)
    }

    /// Independent digits with `P(digit = 0) = zero_prob`.
    pub fn iid(rng: ChaCha8Rng, zero_prob: f64) -> Self {
        Self::from_raw(Vec::new(), 0, DigitSource::Iid { rng, zero_prob })
    }

    /// Purely periodic expansion, e.g. `[false, true]` for 1/3.
    pub fn periodic(pattern: Vec<bool>) -> Self {
        assert!(!pattern.is_empty(), "empty period");
        Self::from_raw(Vec::new(), 0, DigitSource::Periodic(pattern))
    }

    /// Exact terminating expansion of `x` in `[0, 1)`; `1.0` becomes `0.111...`.
    pub fn from_f64(x: f64) -> Self {
        assert!((0.0..=1.0).contains(&x), "{x} outside [0, 1]");
        if x == 1.0 {
            return Self::from_raw(Vec::new(), 0, DigitSource::Constant(true));
        }
        let (words, len) = exact_bits(x);
        Self::from_raw(words, len, DigitSource::Constant(false))
    }

    /// Non-terminating expansion: a dyadic rational `x > 0` is written with a
    /// tail of ones (`0.5 = 0.0111...`). Zero stays `0.000...`.
    pub fn from_f64_nonterminating(x: f64) -> Self {
        assert!((0.0..=1.0).contains(&x), "{x} outside [0, 1]");
        if x == 0.0 {
            return Self::from_f64(0.0);
        }
        if x == 1.0 {
            return Self::from_f64(1.0);
        }
        let (mut words, len) = exact_bits(x);
        // clear the last set digit; everything after it becomes one
        let last = len - 1;
        words[last / 64] &= !(1u64 << (63 - last % 64));
        Self::from_raw(words, len, DigitSource::Constant(true))
    }

    /// The stream of `2^n x mod 1`, complemented when `complement` is set.
    pub fn shifted(&self, n: usize, complement: bool) -> Self {
        let mut s = self.clone();
        s.offset += n;
        s.flip ^= complement;
        s
    }

    fn fill_to(&mut self, len: usize) {
        while self.len < len {
            let z = self.len;
            let w = z / 64;
            if w == self.words.len() {
                self.words.push(0);
            }
            let bit_in_word = z % 64;
            match &mut self.source {
                DigitSource::Iid { rng, zero_prob } if bit_in_word == 0 && *zero_prob == 0.5 => {
                    self.words[w] = rng.next_u64();
                    self.len += 64;
                }
                DigitSource::Constant(b) if bit_in_word == 0 => {
                    self.words[w] = if *b { u64::MAX } else { 0 };
                    self.len += 64;
                }
                source => {
                    let bit = match source {
                        DigitSource::Constant(b) => *b,
                        DigitSource::Periodic(p) => p[(z - self.prefix_len) % p.len()],
                        DigitSource::Iid { rng, zero_prob } => !rng.gen_bool(*zero_prob),
                    };
                    if bit {
                        self.words[w] |= 1 << (63 - bit_in_word);
                    }
                    self.len += 1;
                }
            }
        }
    }

    fn raw_window(&mut self, z: usize) -> u64 {
        self.fill_to(z + 64);
        let (w, s) = (z / 64, z % 64);
        if s == 0 {
            self.words[w]
        } else {
            (self.words[w] << s) | (self.words[w + 1] >> (64 - s))
        }
    }

    /// Digits `k, k+1, ..., k+63` packed most-significant first (`k >= 1`).
    pub fn window(&mut self, k: usize) -> u64 {
        debug_assert!(k >= 1);
        let w = self.raw_window(self.offset + k - 1);
        if self.flip {
            !w
        } else {
            w
        }
    }

    /// Digit `k` (`k >= 1`); digit 0 is defined to be 0.
    pub fn digit(&mut self, k: usize) -> bool {
        if k == 0 {
            return false;
        }
        self.window(k) >> 63 == 1
    }

    /// The first `n` digits.
    pub fn prefix(&mut self, n: usize) -> Vec<bool> {
        (1..=n).map(|k| self.digit(k)).collect()
    }

    /// The first `n` digits packed into 64-bit words, unused low bits cleared.
    pub fn prefix_words(&mut self, n: usize) -> Vec<u64> {
        let mut out: Vec<u64> = (0..n.div_ceil(64)).map(|i| self.window(1 + 64 * i)).collect();
        if n % 64 != 0 {
            let last = out.len() - 1;
            out[last] &= !(u64::MAX >> (n % 64));
        }
        out
    }

    /// Coordinate of the point, rounded to double precision.
    pub fn coordinate(&mut self) -> f64 {
        fixed_to_f64(self.window(1) as u128)
    }
}

/// Converts a 64-bit fixed-point fraction (`v / 2^64`) to `f64`.
pub fn fixed_to_f64(v: u128) -> f64 {
    v as f64 * 2f64.powi(-64)
}

/// Nearest 64-bit fixed-point representation of `x` in `[0, 1]`, as `u128` so
/// that `1.0` maps to `2^64`.
pub fn f64_to_fixed(x: f64) -> u128 {
    debug_assert!((0.0..=1.0).contains(&x));
    (x * 2f64.powi(64)).round() as u128
}

/// Exact binary digits of `x` in `[0, 1)`: packed words and the index of the
/// last nonzero digit (the expansion length).
fn exact_bits(x: f64) -> (Vec<u64>, usize) {
    debug_assert!((0.0..1.0).contains(&x));
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let mut words = Vec::new();
    let mut len = 0usize;
    for i in 0..53 {
        if (mant >> i) & 1 == 1 {
            // weight 2^(exp + i) is digit k = -(exp + i), stored at index k - 1
            let z = (-(exp + i as i64) - 1) as usize;
            if words.len() <= z / 64 {
                words.resize(z / 64 + 1, 0);
            }
            words[z / 64] |= 1 << (63 - z % 64);
            len = len.max(z + 1);
        }
    }
    words.resize(len.div_ceil(64), 0);
    (words, len)
}
