//! Fixed-width bit vectors used for challenges, responses, keys, tags and
//! NVM region contents. Serialized as `'0'`/`'1'` strings, most significant
//! position first, matching the JSON fixture format.

use std::fmt;

use rand::Rng;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A bit vector of arbitrary (small) width.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    /// All-zero vector of width `n`.
    pub fn zeros(n: usize) -> Self {
        Bits(vec![false; n])
    }

    /// Uniform random vector of width `n`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Bits((0..n).map(|_| rng.gen::<bool>()).collect())
    }

    /// Lowest `n` bits of `value`, index 0 = least significant bit.
    pub fn from_u64(value: u64, n: usize) -> Self {
        assert!(n <= 64);
        Bits((0..n).map(|i| (value >> i) & 1 == 1).collect())
    }

    /// Parse a `'0'`/`'1'` string; position 0 of the vector is the first
    /// character.
    pub fn parse(s: &str) -> Result<Self, BitsParseError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsParseError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn toggle(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, v: bool) {
        self.0.push(v);
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.ones() as f64 / self.len() as f64
    }

    /// Number of positions where the two vectors differ. Panics on width
    /// mismatch.
    pub fn hamming(&self, other: &Bits) -> usize {
        assert_eq!(self.len(), other.len(), "width mismatch in hamming");
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Hamming distance divided by width.
    pub fn normalized_hamming(&self, other: &Bits) -> f64 {
        self.hamming(other) as f64 / self.len() as f64
    }

    /// Bitwise XOR. Panics on width mismatch.
    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len(), other.len(), "width mismatch in xor");
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn not(&self) -> Bits {
        Bits(self.0.iter().map(|b| !b).collect())
    }

    /// Value as u64; width must be ≤ 64. Index 0 = least significant bit.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64);
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({})", self)
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Bits::parse(&s).map_err(D::Error::custom)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid bit character {0:?}, expected '0' or '1'")]
pub struct BitsParseError(char);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_string() {
        let b = Bits::parse("01101").unwrap();
        assert_eq!(b.to_string(), "01101");
        assert_eq!(b.len(), 5);
        assert_eq!(b.ones(), 3);
    }

    #[test]
    fn rejects_bad_chars() {
        assert!(Bits::parse("01x").is_err());
    }

    #[test]
    fn xor_and_hamming() {
        let a = Bits::from_u64(0xABCD, 16);
        let k = Bits::from_u64(0x1234, 16);
        assert_eq!(a.xor(&k).to_u64(), 0xB9F9);
        assert_eq!(a.hamming(&a), 0);
        assert_eq!(a.hamming(&a.not()), 16);
    }
}
