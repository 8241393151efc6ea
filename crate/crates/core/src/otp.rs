//! One-time-pad encryption and the key-space / uniformity analysis helpers.
//!
//! Encryption and decryption are the same bitwise XOR; a brute-force search
//! over an OTP ciphertext learns nothing, so the key space is 2^n before
//! and after.

use thiserror::Error;

use crate::bits::Bits;
use crate::reliability::Key;

/// XOR `data` with a valid key of equal length.
pub fn encrypt(data: &Bits, key: &Key) -> Result<Bits, OtpError> {
    if !key.valid {
        return Err(OtpError::InvalidKey);
    }
    if data.len() != key.bits.len() {
        return Err(OtpError::LengthMismatch {
            data: data.len(),
            key: key.bits.len(),
        });
    }
    Ok(data.xor(&key.bits))
}

/// Identical to [`encrypt`]; XOR is an involution.
pub fn decrypt(cipher: &Bits, key: &Key) -> Result<Bits, OtpError> {
    encrypt(cipher, key)
}

/// Number of possible keys of width `n`, before or after a brute-force
/// attack: 2^n in both cases (brute force yields no reduction).
pub fn key_space_size(n: u32, _after_bruteforce: bool) -> Result<u128, OtpError> {
    if n == 0 || n > 127 {
        return Err(OtpError::BadWidth(n));
    }
    Ok(1u128 << n)
}

/// Per-bit ones frequencies over a set of equal-width samples.
pub fn per_bit_ones_fraction(samples: &[Bits]) -> Vec<f64> {
    assert!(!samples.is_empty());
    let width = samples[0].len();
    let mut counts = vec![0usize; width];
    for s in samples {
        assert_eq!(s.len(), width);
        for (k, c) in counts.iter_mut().enumerate() {
            if s.get(k) {
                *c += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / samples.len() as f64)
        .collect()
}

/// Chi-square goodness-of-fit of per-bit ciphertext frequencies against the
/// uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// Critical value at alpha = 0.001 (Wilson-Hilferty approximation).
    pub critical_999: f64,
    pub trials: usize,
}

impl ChiSquare {
    pub fn rejects_uniformity(&self) -> bool {
        self.statistic > self.critical_999
    }

    /// Fewer than two samples cannot support the statistic.
    pub fn is_degenerate(&self) -> bool {
        self.trials < 2
    }
}

/// Per-bit chi-square statistic over ciphertext samples: each bit
/// contributes (ones - n/2)^2 / (n/4), summed over bits.
pub fn chi_square_uniformity(samples: &[Bits]) -> ChiSquare {
    assert!(!samples.is_empty());
    let width = samples[0].len();
    let n = samples.len() as f64;
    let freqs = per_bit_ones_fraction(samples);
    let statistic = freqs
        .iter()
        .map(|f| {
            let ones = f * n;
            (ones - n / 2.0).powi(2) / (n / 4.0)
        })
        .sum();
    ChiSquare {
        statistic,
        dof: width,
        critical_999: chi_square_critical(width as f64, 3.090_232_306_167_813),
        trials: samples.len(),
    }
}

/// Wilson-Hilferty upper quantile of the chi-square distribution:
/// dof * (1 - 2/(9 dof) + z sqrt(2/(9 dof)))^3.
fn chi_square_critical(dof: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}

#[derive(Debug, Error, PartialEq)]
pub enum OtpError {
    #[error("key is not valid (insufficient clean bits)")]
    InvalidKey,
    #[error("length mismatch: data {data} bits, key {key} bits")]
    LengthMismatch { data: usize, key: usize },
    #[error("key width {0} outside 1..=127")]
    BadWidth(u32),
}
