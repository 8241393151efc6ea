//! Voting-based reliability enhancement: closed-form error probabilities,
//! their Monte Carlo counterparts, and the run-time clean-key extraction.
//!
//! All-agree voting accepts a bit only if it is identical across all N
//! evaluations; majority voting takes the majority value over an odd N.
//! Key extraction scans the response positions in order and appends bits
//! on which all samples agree until the key is full.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::seed;

/// Voting scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingScheme {
    AllAgree,
    Majority,
}

/// Probability that a bit error propagates into the key undetected by
/// all-agree voting over `n` evaluations, for per-evaluation stability `p`:
///
/// 2[p^N(1-p^N) + (1-p)^N(1-(1-p)^N) - p^N(1-p)^N]
pub fn all_agree_undetected_prob(p: f64, n: u32) -> Result<f64, VotingError> {
    check_p(p)?;
    check_n(n)?;
    let pn = p.powi(n as i32);
    let qn = (1.0 - p).powi(n as i32);
    Ok(2.0 * (pn * (1.0 - pn) + qn * (1.0 - qn) - pn * qn))
}

/// Probability that majority voting over an odd `n` yields the more
/// probable binary value: sum_{r=ceil(N/2)}^{N} C(N,r) p^r (1-p)^(N-r).
pub fn majority_correct_prob(p: f64, n: u32) -> Result<f64, VotingError> {
    check_p(p)?;
    check_n(n)?;
    if n % 2 == 0 {
        return Err(VotingError::EvenMajority(n));
    }
    let mut sum = 0.0;
    for r in n.div_ceil(2)..=n {
        sum += binomial(n, r) * p.powi(r as i32) * (1.0 - p).powi((n - r) as i32);
    }
    Ok(sum)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn check_p(p: f64) -> Result<(), VotingError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(VotingError::BadProbability(p))
    }
}

fn check_n(n: u32) -> Result<(), VotingError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(VotingError::BadSamples)
    }
}

/// Monte Carlo counterpart of the closed forms.
///
/// All-agree simulates one encryption round of `n` draws and one decryption
/// round of `n` draws per trial and counts the trials where a bit accepted
/// by one round (unanimous) is not reproduced identically by the other —
/// the union of events whose probability the closed form expands.
/// Majority counts the trials where the majority value over `n` draws
/// differs from the more probable value.
pub fn simulate_voting(
    p: f64,
    n: u32,
    scheme: VotingScheme,
    trials: u64,
    seed_value: u64,
) -> Result<f64, VotingError> {
    check_p(p)?;
    check_n(n)?;
    if scheme == VotingScheme::Majority && n % 2 == 0 {
        return Err(VotingError::EvenMajority(n));
    }
    if trials < 10_000 {
        return Err(VotingError::TooFewTrials(trials));
    }
    let mut rng: ChaCha8Rng = seed::derive_rng(seed_value, &[p.to_bits(), n as u64]);
    let mut errors = 0u64;
    for _ in 0..trials {
        match scheme {
            VotingScheme::AllAgree => {
                let (enc_stable, enc_flipped) = round_counts(&mut rng, p, n);
                let (dec_stable, dec_flipped) = round_counts(&mut rng, p, n);
                let enc_uni_a = enc_stable == n;
                let enc_uni_b = enc_flipped == n;
                let dec_uni_a = dec_stable == n;
                let dec_uni_b = dec_flipped == n;
                let err = (enc_uni_a && !dec_uni_a)
                    || (enc_uni_b && !dec_uni_b)
                    || (dec_uni_a && !enc_uni_a)
                    || (dec_uni_b && !enc_uni_b);
                if err {
                    errors += 1;
                }
            }
            VotingScheme::Majority => {
                let (stable, _) = round_counts(&mut rng, p, n);
                if stable <= n / 2 {
                    errors += 1;
                }
            }
        }
    }
    let rate = errors as f64 / trials as f64;
    Ok(match scheme {
        VotingScheme::AllAgree => rate,
        // Majority reports the probability of the *correct* value.
        VotingScheme::Majority => 1.0 - rate,
    })
}

/// Draws `n` evaluations of a bit with stability `p`; returns
/// (stable count, flipped count).
fn round_counts(rng: &mut ChaCha8Rng, p: f64, n: u32) -> (u32, u32) {
    let mut stable = 0;
    for _ in 0..n {
        if rng.gen::<f64>() < p {
            stable += 1;
        }
    }
    (stable, n - stable)
}

/// Run-time key extraction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyExtractionParams {
    /// Samples per extraction (the SRAM double-sample count).
    pub samples: usize,
    /// Key length.
    pub key_bits: usize,
    /// Raw response width.
    pub response_bits: usize,
}

impl Default for KeyExtractionParams {
    fn default() -> Self {
        KeyExtractionParams {
            samples: 2,
            key_bits: 16,
            response_bits: 32,
        }
    }
}

impl KeyExtractionParams {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.samples < 2 {
            return Err(ExtractError::BadParams("samples must be >= 2"));
        }
        if self.key_bits > self.response_bits {
            return Err(ExtractError::BadParams("key_bits must be <= response_bits"));
        }
        Ok(())
    }
}

/// A cryptographic key with its validity token. `valid` is true exactly
/// when the full key length was assembled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Key {
    pub bits: Bits,
    pub valid: bool,
}

/// Result of one extraction: the key, the number of positions scanned and
/// discarded before completion, and the positions that supplied key bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyExtraction {
    pub key: Key,
    pub discarded: usize,
    pub positions: Vec<usize>,
}

/// Scan bit positions in order; a position is clean iff all samples agree
/// there (and it is not masked out). Clean bits are appended until the key
/// is full; scanning then stops. Fewer than `key_bits` clean positions
/// yields `valid = false`, not an error.
pub fn extract_key(
    samples: &[Bits],
    mask: Option<&Bits>,
    params: &KeyExtractionParams,
) -> Result<KeyExtraction, ExtractError> {
    params.validate()?;
    if samples.len() != params.samples {
        return Err(ExtractError::BadParams("sample count != params.samples"));
    }
    for s in samples {
        if s.len() != params.response_bits {
            return Err(ExtractError::BadParams("sample width != response_bits"));
        }
    }
    if let Some(m) = mask {
        if m.len() != params.response_bits {
            return Err(ExtractError::BadParams("mask width != response_bits"));
        }
    }
    let mut key_bits = Bits::default();
    let mut positions = Vec::new();
    let mut discarded = 0usize;
    for k in 0..params.response_bits {
        if key_bits.len() == params.key_bits {
            break;
        }
        let masked_out = mask.map_or(false, |m| !m.get(k));
        let first = samples[0].get(k);
        let clean = !masked_out && samples.iter().all(|s| s.get(k) == first);
        if clean {
            key_bits.push(first);
            positions.push(k);
        } else {
            discarded += 1;
        }
    }
    let valid = key_bits.len() == params.key_bits;
    Ok(KeyExtraction {
        key: Key {
            bits: key_bits,
            valid,
        },
        discarded,
        positions,
    })
}

/// Positions on which all screening samples agree. Used as the test-style
/// pre-mask ahead of the two-sample run-time extraction.
pub fn screening_mask(samples: &[Bits]) -> Bits {
    assert!(!samples.is_empty());
    let width = samples[0].len();
    let mut mask = Vec::with_capacity(width);
    for k in 0..width {
        let first = samples[0].get(k);
        mask.push(samples.iter().all(|s| s.get(k) == first));
    }
    Bits::new(mask)
}

#[derive(Debug, Error, PartialEq)]
pub enum VotingError {
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("sample count must be >= 1")]
    BadSamples,
    #[error("majority voting requires odd N, got {0}")]
    EvenMajority(u32),
    #[error("simulation requires >= 10^4 trials, got {0}")]
    TooFewTrials(u64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("invalid extraction parameters: {0}")]
    BadParams(&'static str),
}
