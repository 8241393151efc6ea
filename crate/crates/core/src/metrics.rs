//! PUF quality metrics over Monte Carlo campaigns, and the tag quality
//! triple (uniformity balance, avalanche, diffusion).
//!
//! Conventions (fixed here so the tests are well-defined): uniqueness is
//! the mean inter-chip normalized Hamming distance for one challenge;
//! uniformity the ones fraction of one response; bit-aliasing the per-bit
//! ones fraction across chips; diffuseness the mean normalized Hamming
//! distance between responses to distinct challenges on one chip;
//! reliability one minus the mean intra-chip distance across cycles against
//! the bitwise-majority reference; steadiness 1 + (1/L) sum_bits log2
//! max(p, 1-p) over the per-bit ones frequencies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::device::{ChipInstance, CycleContext, MemristorState, VariationSpec};
use crate::puf::Response;
use crate::tag::{self, TagCalibration, TagConfig};

/// A named metric with its per-unit values and summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub unit_values: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricReport {
    pub fn summarize(metric: &str, unit_values: Vec<f64>) -> Self {
        assert!(!unit_values.is_empty());
        let mean = unit_values.iter().sum::<f64>() / unit_values.len() as f64;
        let min = unit_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = unit_values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        MetricReport {
            metric: metric.to_string(),
            unit_values,
            mean,
            min,
            max,
        }
    }
}

/// Mean pairwise normalized Hamming distance between the responses of
/// different chips to the same challenge.
pub fn uniqueness(responses_per_chip: &[Response]) -> f64 {
    let n = responses_per_chip.len();
    assert!(n >= 2, "uniqueness needs at least two chips");
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += responses_per_chip[i]
                .0
                .normalized_hamming(&responses_per_chip[j].0);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Ones fraction of one response.
pub fn uniformity(response: &Response) -> f64 {
    response.0.ones_fraction()
}

/// Per-bit ones fraction across chips for one challenge.
pub fn bit_aliasing(responses_per_chip: &[Response]) -> Vec<f64> {
    assert!(!responses_per_chip.is_empty());
    let width = responses_per_chip[0].0.len();
    let mut counts = vec![0usize; width];
    for r in responses_per_chip {
        for (k, c) in counts.iter_mut().enumerate() {
            if r.0.get(k) {
                *c += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / responses_per_chip.len() as f64)
        .collect()
}

/// Mean pairwise normalized Hamming distance between one chip's responses
/// to distinct challenges.
pub fn diffuseness(responses_per_challenge: &[Response]) -> f64 {
    let n = responses_per_challenge.len();
    assert!(n >= 2, "diffuseness needs at least two challenges");
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += responses_per_challenge[i]
                .0
                .normalized_hamming(&responses_per_challenge[j].0);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Bitwise majority over a cycle set; the reference response for
/// reliability.
pub fn majority_response(cycles: &[Response]) -> Response {
    assert!(!cycles.is_empty());
    let width = cycles[0].0.len();
    let half = cycles.len() as f64 / 2.0;
    let mut counts = vec![0usize; width];
    for r in cycles {
        for (k, c) in counts.iter_mut().enumerate() {
            if r.0.get(k) {
                *c += 1;
            }
        }
    }
    Response(Bits::new(
        counts.into_iter().map(|c| c as f64 > half).collect(),
    ))
}

/// 1 - mean normalized Hamming distance of the cycle responses against the
/// majority reference. Needs at least two cycles.
pub fn reliability(cycles: &[Response]) -> Result<f64, MetricsError> {
    if cycles.len() < 2 {
        return Err(MetricsError::TooFewCycles(cycles.len()));
    }
    let reference = majority_response(cycles);
    let mean_hd = cycles
        .iter()
        .map(|r| r.0.normalized_hamming(&reference.0))
        .sum::<f64>()
        / cycles.len() as f64;
    Ok(1.0 - mean_hd)
}

/// 1 + (1/L) sum over bits of log2 max(p, 1-p), p the per-bit ones
/// frequency over cycles. A bit that flips every other cycle (p = 0.5)
/// contributes 1 + log2(0.5) = 0; a constant bit contributes 1.
pub fn steadiness(cycles: &[Response]) -> Result<f64, MetricsError> {
    if cycles.len() < 2 {
        return Err(MetricsError::TooFewCycles(cycles.len()));
    }
    let width = cycles[0].0.len();
    let mut counts = vec![0usize; width];
    for r in cycles {
        for (k, c) in counts.iter_mut().enumerate() {
            if r.0.get(k) {
                *c += 1;
            }
        }
    }
    let n = cycles.len() as f64;
    let sum: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p.max(1.0 - p).log2()
        })
        .sum();
    Ok(1.0 + sum / width as f64)
}

/// Tag quality triple.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TagMetrics {
    /// Balance score: mean over tag bits of 1 - |2 freq(1) - 1|; 1 means
    /// perfectly balanced bits.
    pub uniformity: f64,
    /// Mean fraction of tag bits flipped per single data-cell change.
    pub avalanche: f64,
    /// Mean per-tag-bit flip probability under one-cell data changes.
    pub diffusion: f64,
}

/// Measure the tag triple over `trials` random memory states (and as many
/// single-cell changes). Avalanche and diffusion come from disjoint trial
/// streams: avalanche averages the per-trial flipped fraction, diffusion
/// the per-bit flip frequencies.
pub fn tag_metrics(
    chip: &mut ChipInstance,
    calib: &TagCalibration,
    cfg: &TagConfig,
    spec: &VariationSpec,
    trials: usize,
    ctx: &mut CycleContext,
) -> Result<TagMetrics, MetricsError> {
    let cells = chip.layout.nvm_cells();
    let randomize = |chip: &mut ChipInstance, ctx: &mut CycleContext| {
        for i in 0..cells {
            let b: bool = ctx.rng.gen();
            chip.nvm
                .cell_mut(i)
                .write(MemristorState::from_bit(b), spec, ctx);
        }
    };
    let gen = |chip: &ChipInstance, ctx: &CycleContext| {
        tag::generate_tag(chip, calib, cfg, spec, ctx.temperature_k)
    };

    // Uniformity: per-bit ones frequency over fresh random memories.
    let mut ones = vec![0usize; cfg.tag_bits];
    for _ in 0..trials {
        randomize(chip, ctx);
        let t = gen(chip, ctx)?;
        for (k, c) in ones.iter_mut().enumerate() {
            if t.0.get(k) {
                *c += 1;
            }
        }
    }
    let uniformity = ones
        .iter()
        .map(|&c| 1.0 - (2.0 * c as f64 / trials as f64 - 1.0).abs())
        .sum::<f64>()
        / cfg.tag_bits as f64;

    // Avalanche: mean flipped fraction per single-cell change.
    let mut flipped_fraction = 0.0;
    for _ in 0..trials {
        randomize(chip, ctx);
        let before = gen(chip, ctx)?;
        let cell = ctx.rng.gen_range(0..cells);
        let target = !chip.nvm.cell(cell).state.to_bit();
        chip.nvm
            .cell_mut(cell)
            .write(MemristorState::from_bit(target), spec, ctx);
        let after = gen(chip, ctx)?;
        flipped_fraction += before.0.normalized_hamming(&after.0);
    }
    let avalanche = flipped_fraction / trials as f64;

    // Diffusion: per-tag-bit flip frequency, then mean over bits.
    let mut flips = vec![0usize; cfg.tag_bits];
    for _ in 0..trials {
        randomize(chip, ctx);
        let before = gen(chip, ctx)?;
        let cell = ctx.rng.gen_range(0..cells);
        let target = !chip.nvm.cell(cell).state.to_bit();
        chip.nvm
            .cell_mut(cell)
            .write(MemristorState::from_bit(target), spec, ctx);
        let after = gen(chip, ctx)?;
        for (k, f) in flips.iter_mut().enumerate() {
            if before.0.get(k) != after.0.get(k) {
                *f += 1;
            }
        }
    }
    let diffusion = flips
        .iter()
        .map(|&f| f as f64 / trials as f64)
        .sum::<f64>()
        / cfg.tag_bits as f64;

    Ok(TagMetrics {
        uniformity,
        avalanche,
        diffusion,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reliability/steadiness need >= 2 cycles, got {0}")]
    TooFewCycles(usize),
    #[error(transparent)]
    Tag(#[from] tag::TagError),
}
