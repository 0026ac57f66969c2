//! Alphabet/scale parameters and finite words.
//!
//! Digits are 1-based in every textual interface (parsing, display, file
//! formats), matching the usual convention for the space, and 0-based in
//! memory. The conversion happens only here, in the parsing and formatting
//! layer.

use std::fmt;

use crate::error::{CantorError, Result};

/// Maximum working depth for any trie or word in this crate.
pub const MAX_DEPTH: usize = 64;

/// Largest alphabet size expressible in the one-character-per-digit text
/// formats (`1`..`9` then `a`..`z`).
pub const MAX_TEXT_M: u32 = 35;

/// Alphabet size `m >= 2` and metric scale `r` in (0, 1).
///
/// These two numbers fix the space: level-k cylinders have diameter `r^k`,
/// and the whole space has Hausdorff and box dimension `-log m / log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceParams {
    m: u32,
    r: f64,
}

impl SpaceParams {
    pub fn new(m: u32, r: f64) -> Result<Self> {
        if m < 2 {
            return Err(CantorError::InvalidParams(format!("m must be >= 2, got {m}")));
        }
        if m > 255 {
            return Err(CantorError::InvalidParams(format!("m must be <= 255, got {m}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(CantorError::InvalidParams(format!("r must lie in (0, 1), got {r}")));
        }
        Ok(SpaceParams { m, r })
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Dimension of the whole space, `-log m / log r`.
    #[inline]
    pub fn ambient_dim(&self) -> f64 {
        -(self.m as f64).ln() / self.r.ln()
    }

    /// `log m / log r`, the (negative) codimension offset appearing in all
    /// the intersection formulas.
    #[inline]
    pub fn log_ratio(&self) -> f64 {
        (self.m as f64).ln() / self.r.ln()
    }

    /// Diameter `r^k` of a level-k cylinder.
    #[inline]
    pub fn cylinder_diameter(&self, k: usize) -> f64 {
        self.r.powi(k as i32)
    }
}

/// A finite word: the address of one level-k cylinder.
///
/// The empty word addresses the whole space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    digits: Vec<u8>,
}

impl Word {
    /// Empty word (the root).
    pub fn root() -> Self {
        Word { digits: Vec::new() }
    }

    /// Build from 0-based digits, checking them against `m`.
    pub fn from_digits(digits: Vec<u8>, m: u32) -> Result<Self> {
        for &d in &digits {
            if d as u32 >= m {
                return Err(CantorError::InvalidDigit { digit: d as u32 + 1, m });
            }
        }
        if digits.len() > MAX_DEPTH {
            return Err(CantorError::LevelOutOfRange { k: digits.len(), depth: MAX_DEPTH });
        }
        Ok(Word { digits })
    }

    /// Parse a 1-based textual word: one character per digit, `1`..`9` then
    /// `a`..`z`. The empty string and `ROOT` both parse to the root.
    pub fn parse(text: &str, m: u32) -> Result<Self> {
        if text.is_empty() || text == "ROOT" {
            return Ok(Word::root());
        }
        let mut digits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let value = match ch {
                '1'..='9' => ch as u32 - '0' as u32,
                'a'..='z' => ch as u32 - 'a' as u32 + 10,
                _ => return Err(CantorError::Parse(format!("invalid digit character {ch:?}"))),
            };
            if value > m {
                return Err(CantorError::InvalidDigit { digit: value, m });
            }
            digits.push((value - 1) as u8);
        }
        Word::from_digits(digits, m)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// 0-based digits.
    #[inline]
    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn child(&self, digit: u8) -> Word {
        let mut digits = self.digits.clone();
        digits.push(digit);
        Word { digits }
    }

    /// Longest common prefix length with `other`.
    pub fn common_prefix_len(&self, other: &Word) -> usize {
        self.digits
            .iter()
            .zip(other.digits.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "ROOT");
        }
        for &d in &self.digits {
            let v = d as u32 + 1;
            let ch = if v <= 9 {
                char::from_digit(v, 10).unwrap()
            } else {
                char::from_u32('a' as u32 + v - 10).unwrap()
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

/// Distance between two truncated points.
///
/// When the words agree on their full (finite) length the true distance of
/// any pair of extensions is at most `r^L` but cannot be resolved further, so
/// the value `r^L` is returned with `indistinguishable` set rather than 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    /// `r^k` where `k` is the split level (or the common length).
    pub value: f64,
    /// Level at which the words first differ; equals the common length when
    /// they do not differ at all.
    pub split_level: usize,
    /// True when the words agree to their full stored depth.
    pub indistinguishable: bool,
}

/// Ultrametric distance between two same-length words.
pub fn metric_distance(x: &Word, y: &Word, p: &SpaceParams) -> Result<Distance> {
    if x.len() != y.len() {
        return Err(CantorError::LengthMismatch(x.len(), y.len()));
    }
    let k = x.common_prefix_len(y);
    Ok(Distance {
        value: p.cylinder_diameter(k),
        split_level: k,
        indistinguishable: k == x.len(),
    })
}

/// Smallest cylinder containing both words: their longest common prefix.
pub fn common_ancestor(x: &Word, y: &Word) -> Result<Word> {
    if x.len() != y.len() {
        return Err(CantorError::LengthMismatch(x.len(), y.len()));
    }
    let k = x.common_prefix_len(y);
    Ok(Word { digits: x.digits[..k].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{root_key, Draws};
    use proptest::prelude::*;

    fn p33() -> SpaceParams {
        SpaceParams::new(3, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SpaceParams::new(1, 0.5).is_err());
        assert!(SpaceParams::new(2, 0.0).is_err());
        assert!(SpaceParams::new(2, 1.0).is_err());
        assert!(SpaceParams::new(2, 0.5).is_ok());
    }

    #[test]
    fn ambient_dim_ternary_third() {
        assert!((p33().ambient_dim() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let x = Word::parse("122", 3).unwrap();
        let y = Word::parse("13", 3).unwrap();
        assert!(matches!(metric_distance(&x, &y, &p33()), Err(CantorError::LengthMismatch(3, 2))));
    }

    #[test]
    fn distance_of_words_differing_at_third_position() {
        let x = Word::parse("122", 3).unwrap();
        let y = Word::parse("123", 3).unwrap();
        let d = metric_distance(&x, &y, &p33()).unwrap();
        assert!((d.value - (1.0f64 / 9.0)).abs() < 1e-15);
        assert_eq!(d.split_level, 2);
        assert!(!d.indistinguishable);
    }

    #[test]
    fn equal_words_are_flagged_not_zero() {
        let x = Word::parse("111", 3).unwrap();
        let d = metric_distance(&x, &x, &p33()).unwrap();
        assert!(d.indistinguishable);
        assert!((d.value - (1.0f64 / 27.0)).abs() < 1e-15);
    }

    #[test]
    fn ancestor_examples() {
        let m = 3;
        let x = Word::parse("121", m).unwrap();
        let y = Word::parse("122", m).unwrap();
        assert_eq!(common_ancestor(&x, &y).unwrap(), Word::parse("12", m).unwrap());
        let z = Word::parse("111", m).unwrap();
        assert_eq!(common_ancestor(&z, &z).unwrap(), z);
    }

    #[test]
    fn parse_display_round_trip() {
        for text in ["ROOT", "1", "312", "a", "1a"] {
            let w = Word::parse(text, 12).unwrap();
            assert_eq!(w.to_string(), text);
        }
        assert!(Word::parse("4", 3).is_err());
        assert!(Word::parse("0", 3).is_err());
    }

    fn random_word(draws: &mut Draws, m: u32, len: usize) -> Word {
        let digits = (0..len).map(|_| draws.next_below(m as u64) as u8).collect();
        Word::from_digits(digits, m).unwrap()
    }

    #[test]
    fn ultrametric_inequality_on_sampled_triples() {
        // d(x,y) <= max(d(x,z), d(z,y)) over 10^5 sampled triples.
        let p = p33();
        let mut draws = Draws::new(root_key(2024));
        for _ in 0..100_000 {
            let x = random_word(&mut draws, 3, 8);
            let y = random_word(&mut draws, 3, 8);
            let z = random_word(&mut draws, 3, 8);
            let dxy = metric_distance(&x, &y, &p).unwrap().value;
            let dxz = metric_distance(&x, &z, &p).unwrap().value;
            let dzy = metric_distance(&z, &y, &p).unwrap().value;
            assert!(dxy <= dxz.max(dzy) + 1e-18);
        }
    }

    #[test]
    fn distance_equals_r_to_ancestor_length() {
        let p = p33();
        let mut draws = Draws::new(root_key(77));
        for _ in 0..10_000 {
            let x = random_word(&mut draws, 3, 6);
            let y = random_word(&mut draws, 3, 6);
            if x == y {
                continue;
            }
            let d = metric_distance(&x, &y, &p).unwrap();
            let a = common_ancestor(&x, &y).unwrap();
            assert_eq!(d.value, p.cylinder_diameter(a.len()));
        }
    }

    proptest! {
        #[test]
        fn prop_ultrametric(m in 2u32..6, len in 1usize..10, seed in any::<u64>()) {
            let p = SpaceParams::new(m, 0.4).unwrap();
            let mut draws = Draws::new(root_key(seed));
            let x = random_word(&mut draws, m, len);
            let y = random_word(&mut draws, m, len);
            let z = random_word(&mut draws, m, len);
            let dxy = metric_distance(&x, &y, &p).unwrap().value;
            let dxz = metric_distance(&x, &z, &p).unwrap().value;
            let dzy = metric_distance(&z, &y, &p).unwrap().value;
            prop_assert!(dxy <= dxz.max(dzy) + 1e-18);
        }
    }
}
