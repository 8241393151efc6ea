//! Statistical behavioral model of memristors and their variation sources.
//!
//! Each device carries immutable per-device process factors (drawn once at
//! chip sampling) and a mutable binary state plus the multiplicative noise
//! drawn at its most recent write. Reads are noiseless: the effective
//! resistance is a pure function of (state, factors, last write noise,
//! temperature), so repeated reads without an interleaved write are
//! bit-identical — which is what makes tag regeneration reproducible, while
//! any rewrite perturbs the analog state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, tags};

/// Variation and nominal-value parameters shared by every device of a chip.
///
/// Serialized with the experiment-config JSON keys (`hrs_ohm`, `lrs_ohm`,
/// `sigma_process`, `sigma_c2c`, `temp_coeff_per_k`, `temp_k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    /// Nominal high-resistance-state value (ohm).
    pub hrs_ohm: f64,
    /// Nominal low-resistance-state value (ohm).
    pub lrs_ohm: f64,
    /// Sigma of the log-normal per-device process factor.
    pub sigma_process: f64,
    /// Sigma of the log-normal per-write cycle-to-cycle noise.
    pub sigma_c2c: f64,
    /// Fractional resistance change per kelvin away from ambient.
    pub temp_coeff_per_k: f64,
    /// Ambient (calibration) temperature, kelvin.
    pub temp_k: f64,
}

impl Default for VariationSpec {
    /// Calibrated values: reliability, clean-bit yield and tag metrics land
    /// in their target windows at sigma_process = 1.9 with a 100x HRS/LRS
    /// window and 10% cycle-to-cycle noise.
    fn default() -> Self {
        VariationSpec {
            hrs_ohm: 1.0e6,
            lrs_ohm: 1.0e4,
            sigma_process: 1.9,
            sigma_c2c: 0.10,
            temp_coeff_per_k: 1.0e-3,
            temp_k: 300.0,
        }
    }
}

impl VariationSpec {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.hrs_ohm > self.lrs_ohm && self.lrs_ohm > 0.0) {
            return Err(DeviceError::BadSpec("require hrs_ohm > lrs_ohm > 0"));
        }
        if !(self.sigma_process >= 0.0 && self.sigma_process.is_finite()) {
            return Err(DeviceError::BadSpec("sigma_process must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.sigma_c2c) {
            return Err(DeviceError::BadSpec("sigma_c2c must be in [0, 1)"));
        }
        if !(self.temp_k > 0.0) {
            return Err(DeviceError::BadSpec("temp_k must be > 0"));
        }
        Ok(())
    }

    pub fn nominal(&self, state: MemristorState) -> f64 {
        match state {
            MemristorState::Hrs => self.hrs_ohm,
            MemristorState::Lrs => self.lrs_ohm,
        }
    }

    /// Common-mode fractional scaling at `temperature_k`.
    pub fn temp_factor(&self, temperature_k: f64) -> f64 {
        1.0 + self.temp_coeff_per_k * (temperature_k - self.temp_k)
    }
}

/// Binary resistive state; HRS encodes logic 0, LRS logic 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemristorState {
    Hrs,
    Lrs,
}

impl MemristorState {
    pub fn from_bit(b: bool) -> Self {
        if b {
            MemristorState::Lrs
        } else {
            MemristorState::Hrs
        }
    }

    pub fn to_bit(self) -> bool {
        matches!(self, MemristorState::Lrs)
    }
}

/// One memristor: immutable process factors, mutable state + write noise.
///
/// The two per-state factors are drawn with a dominant common-mode
/// component (filament/geometry variation scales both states together) and
/// a small independent window wobble, so the marginal log-std of each
/// factor is exactly `sigma_process` while the HRS:LRS window of a device
/// stays close to its nominal ratio. Large sigma_process then feeds the
/// PUF without breaking the digital read margin of the NVM.
#[derive(Debug, Clone, Copy)]
pub struct MemristorDevice {
    pub process_factor_hrs: f64,
    pub process_factor_lrs: f64,
    pub state: MemristorState,
    /// Multiplicative noise drawn at the most recent write (1.0 until the
    /// first write).
    pub write_noise: f64,
}

/// Split of sigma_process into (common-mode, per-state window) components;
/// quadrature sum reproduces sigma_process exactly.
fn process_sigmas(sigma_process: f64) -> (f64, f64) {
    let window = (0.5 * sigma_process).min(0.05);
    let common = (sigma_process * sigma_process - window * window).sqrt();
    (common, window)
}

impl MemristorDevice {
    fn sample<R: Rng>(sigma_process: f64, rng: &mut R) -> Self {
        let (common_sigma, window_sigma) = process_sigmas(sigma_process);
        let zc: f64 = rng.sample(StandardNormal);
        let zh: f64 = rng.sample(StandardNormal);
        let zl: f64 = rng.sample(StandardNormal);
        MemristorDevice {
            process_factor_hrs: (common_sigma * zc + window_sigma * zh).exp(),
            process_factor_lrs: (common_sigma * zc + window_sigma * zl).exp(),
            state: MemristorState::Hrs,
            write_noise: 1.0,
        }
    }

    fn process_factor(&self, state: MemristorState) -> f64 {
        match state {
            MemristorState::Hrs => self.process_factor_hrs,
            MemristorState::Lrs => self.process_factor_lrs,
        }
    }

    /// nominal(state) x process factor x last write noise x temperature
    /// factor. Pure: no draw happens at read time.
    pub fn effective_resistance(&self, spec: &VariationSpec, temperature_k: f64) -> f64 {
        spec.nominal(self.state)
            * self.process_factor(self.state)
            * self.write_noise
            * spec.temp_factor(temperature_k)
    }

    /// Digital read reference of this cell: the geometric midpoint of its
    /// own two programmed states (the sense amplifier is referenced to the
    /// provisioned cell window, which also tracks temperature).
    pub fn read_threshold_ohm(&self, spec: &VariationSpec, temperature_k: f64) -> f64 {
        (spec.hrs_ohm * self.process_factor_hrs * spec.lrs_ohm * self.process_factor_lrs)
            .sqrt()
            * spec.temp_factor(temperature_k)
    }

    pub fn conductance(&self, spec: &VariationSpec, temperature_k: f64) -> f64 {
        1.0 / self.effective_resistance(spec, temperature_k)
    }

    /// Write `target`, drawing a fresh multiplicative noise from the cycle
    /// stream. A standard-normal variate is consumed even when sigma_c2c is
    /// zero so that sweeps over sigma can share common random numbers.
    /// Returns the new write noise.
    pub fn write(
        &mut self,
        target: MemristorState,
        spec: &VariationSpec,
        ctx: &mut CycleContext,
    ) -> f64 {
        let z: f64 = ctx.rng.sample(StandardNormal);
        self.state = target;
        self.write_noise = (spec.sigma_c2c * z).exp();
        self.write_noise
    }
}

/// Per-evaluation environment: operating temperature plus the deterministic
/// random stream that feeds write noise.
#[derive(Debug, Clone)]
pub struct CycleContext {
    pub temperature_k: f64,
    pub rng: ChaCha8Rng,
}

impl CycleContext {
    pub fn new(temperature_k: f64, master_seed: u64) -> Self {
        CycleContext {
            temperature_k,
            rng: seed::derive_rng(master_seed, &[tags::CYCLE]),
        }
    }

    pub fn with_rng(temperature_k: f64, rng: ChaCha8Rng) -> Self {
        CycleContext { temperature_k, rng }
    }
}

/// Shapes of the three device arrays of a chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipLayout {
    /// Number of time-multiplexed PUF blocks.
    pub puf_blocks: usize,
    /// Challenge width; each block has two rows per challenge bit.
    pub challenge_bits: usize,
    /// Response bits per block; each block has two columns per response bit.
    pub response_bits_per_block: usize,
    /// NVM grid rows.
    pub nvm_rows: usize,
    /// NVM grid columns (also the tag-read column count).
    pub nvm_cols: usize,
}

impl Default for ChipLayout {
    /// The prototype system: a 32x32 PUF split into four blocks (each
    /// physically 64 rows x 16 columns) and a 5x12 RRAM.
    fn default() -> Self {
        ChipLayout {
            puf_blocks: 4,
            challenge_bits: 32,
            response_bits_per_block: 8,
            nvm_rows: 5,
            nvm_cols: 12,
        }
    }
}

impl ChipLayout {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.puf_blocks == 0
            || self.challenge_bits == 0
            || self.response_bits_per_block == 0
            || self.nvm_rows == 0
            || self.nvm_cols == 0
        {
            return Err(DeviceError::BadLayout);
        }
        Ok(())
    }

    /// Physical rows per PUF block (two complementary lines per challenge bit).
    pub fn puf_rows(&self) -> usize {
        2 * self.challenge_bits
    }

    /// Physical columns per PUF block (one differential pair per response bit).
    pub fn puf_cols(&self) -> usize {
        2 * self.response_bits_per_block
    }

    pub fn response_bits(&self) -> usize {
        self.puf_blocks * self.response_bits_per_block
    }

    pub fn nvm_cells(&self) -> usize {
        self.nvm_rows * self.nvm_cols
    }
}

/// A rectangular array of memristors.
#[derive(Debug, Clone)]
pub struct DeviceGrid {
    pub rows: usize,
    pub cols: usize,
    devices: Vec<MemristorDevice>,
}

impl DeviceGrid {
    fn sample<R: Rng>(rows: usize, cols: usize, sigma_process: f64, rng: &mut R) -> Self {
        DeviceGrid {
            rows,
            cols,
            devices: (0..rows * cols)
                .map(|_| MemristorDevice::sample(sigma_process, rng))
                .collect(),
        }
    }

    pub fn device(&self, row: usize, col: usize) -> &MemristorDevice {
        &self.devices[row * self.cols + col]
    }

    pub fn device_mut(&mut self, row: usize, col: usize) -> &mut MemristorDevice {
        &mut self.devices[row * self.cols + col]
    }

    pub fn cell(&self, index: usize) -> &MemristorDevice {
        &self.devices[index]
    }

    pub fn cell_mut(&mut self, index: usize) -> &mut MemristorDevice {
        &mut self.devices[index]
    }

    pub fn devices(&self) -> &[MemristorDevice] {
        &self.devices
    }

    /// Conductance of every cell at `temperature_k`, row-major.
    pub fn conductance_matrix(&self, spec: &VariationSpec, temperature_k: f64) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| self.device(r, c).conductance(spec, temperature_k))
                    .collect()
            })
            .collect()
    }
}

/// One fabricated device instance: PUF blocks plus the NVM grid, all with
/// per-device process draws.
#[derive(Debug, Clone)]
pub struct ChipInstance {
    pub layout: ChipLayout,
    pub puf_blocks: Vec<DeviceGrid>,
    pub nvm: DeviceGrid,
}

/// Draw a chip. All process factors are log-normal with
/// `sigma = spec.sigma_process`; the same (spec, layout, seed) triple
/// reproduces the chip bit-identically.
pub fn sample_chip(
    spec: &VariationSpec,
    layout: &ChipLayout,
    seed: u64,
) -> Result<ChipInstance, DeviceError> {
    spec.validate()?;
    layout.validate()?;
    let mut rng = seed::derive_rng(seed, &[tags::CHIP]);
    let puf_blocks = (0..layout.puf_blocks)
        .map(|_| DeviceGrid::sample(layout.puf_rows(), layout.puf_cols(), spec.sigma_process, &mut rng))
        .collect();
    let nvm = DeviceGrid::sample(layout.nvm_rows, layout.nvm_cols, spec.sigma_process, &mut rng);
    Ok(ChipInstance {
        layout: *layout,
        puf_blocks,
        nvm,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("invalid variation spec: {0}")]
    BadSpec(&'static str),
    #[error("layout dimensions must all be nonzero")]
    BadLayout,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(sigma_process: f64, sigma_c2c: f64) -> VariationSpec {
        VariationSpec {
            sigma_process,
            sigma_c2c,
            ..VariationSpec::default()
        }
    }

    #[test]
    fn zero_process_variance_makes_devices_identical() {
        let chip = sample_chip(&spec_with(0.0, 0.1), &ChipLayout::default(), 99).unwrap();
        let d0 = chip.puf_blocks[0].device(0, 0);
        for g in chip.puf_blocks.iter().chain(std::iter::once(&chip.nvm)) {
            for d in g.devices() {
                assert_eq!(d.process_factor_hrs, d0.process_factor_hrs);
                assert_eq!(d.process_factor_lrs, d0.process_factor_lrs);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_chip_exactly() {
        let spec = VariationSpec::default();
        let a = sample_chip(&spec, &ChipLayout::default(), 1234).unwrap();
        let b = sample_chip(&spec, &ChipLayout::default(), 1234).unwrap();
        for (ga, gb) in a.puf_blocks.iter().zip(&b.puf_blocks) {
            for (da, db) in ga.devices().iter().zip(gb.devices()) {
                assert_eq!(da.process_factor_hrs, db.process_factor_hrs);
                assert_eq!(da.process_factor_lrs, db.process_factor_lrs);
            }
        }
        let c = sample_chip(&spec, &ChipLayout::default(), 1235).unwrap();
        assert_ne!(
            a.puf_blocks[0].device(0, 0).process_factor_hrs,
            c.puf_blocks[0].device(0, 0).process_factor_hrs
        );
    }

    #[test]
    fn process_factor_population_sigma_matches() {
        // Oracle: direct statistics of the drawn population.
        let layout = ChipLayout {
            puf_blocks: 1,
            challenge_bits: 40,
            response_bits_per_block: 64,
            nvm_rows: 1,
            nvm_cols: 1,
        };
        let chip = sample_chip(&spec_with(0.1, 0.1), &layout, 7).unwrap();
        let logs: Vec<f64> = chip.puf_blocks[0]
            .devices()
            .iter()
            .map(|d| d.process_factor_hrs.ln())
            .collect();
        assert!(logs.len() >= 10_000);
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!(
            (std - 0.1).abs() < 0.005,
            "sample std of log factors {std} not within 5% of 0.1"
        );
    }

    #[test]
    fn zero_layout_rejected() {
        let bad = ChipLayout {
            puf_blocks: 0,
            ..ChipLayout::default()
        };
        assert_eq!(
            sample_chip(&VariationSpec::default(), &bad, 0).unwrap_err(),
            DeviceError::BadLayout
        );
    }

    #[test]
    fn effective_resistance_identity_case() {
        let spec = spec_with(0.0, 0.0);
        let mut d = MemristorDevice {
            process_factor_hrs: 1.0,
            process_factor_lrs: 1.0,
            state: MemristorState::Lrs,
            write_noise: 1.0,
        };
        assert_eq!(d.effective_resistance(&spec, spec.temp_k), spec.lrs_ohm);
        d.state = MemristorState::Hrs;
        d.process_factor_hrs = 1.1;
        d.write_noise = 0.95;
        let r = d.effective_resistance(&spec, spec.temp_k);
        assert!((r - 1.045 * spec.hrs_ohm).abs() < 1e-9 * spec.hrs_ohm);
    }

    #[test]
    fn temperature_scales_resistance_linearly() {
        // Oracle: hand evaluation of the formula at dT = 50 K, 1e-3/K.
        let spec = spec_with(0.0, 0.0);
        let d = MemristorDevice {
            process_factor_hrs: 1.0,
            process_factor_lrs: 1.0,
            state: MemristorState::Lrs,
            write_noise: 1.0,
        };
        let r_hot = d.effective_resistance(&spec, spec.temp_k + 50.0);
        let r_ambient = d.effective_resistance(&spec, spec.temp_k);
        assert!((r_hot / r_ambient - 1.05).abs() < 1e-12);
    }

    #[test]
    fn zero_c2c_writes_repeat_exactly() {
        let spec = spec_with(0.0, 0.0);
        let mut ctx = CycleContext::new(spec.temp_k, 5);
        let mut d = MemristorDevice {
            process_factor_hrs: 1.3,
            process_factor_lrs: 0.8,
            state: MemristorState::Hrs,
            write_noise: 1.0,
        };
        d.write(MemristorState::Lrs, &spec, &mut ctx);
        let r1 = d.effective_resistance(&spec, spec.temp_k);
        d.write(MemristorState::Lrs, &spec, &mut ctx);
        let r2 = d.effective_resistance(&spec, spec.temp_k);
        assert_eq!(r1, r2);
    }

    #[test]
    fn write_noise_population_sigma_matches() {
        // Oracle: population statistics over 10^4 writes.
        let spec = spec_with(0.0, 0.1);
        let mut ctx = CycleContext::new(spec.temp_k, 11);
        let mut d = MemristorDevice {
            process_factor_hrs: 1.0,
            process_factor_lrs: 1.0,
            state: MemristorState::Hrs,
            write_noise: 1.0,
        };
        let logs: Vec<f64> = (0..10_000)
            .map(|_| d.write(MemristorState::Lrs, &spec, &mut ctx).ln())
            .collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let std = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.1).abs() < 0.005);
    }

    #[test]
    fn reads_are_noiseless_between_writes() {
        let spec = VariationSpec::default();
        let mut ctx = CycleContext::new(spec.temp_k, 3);
        let mut chip = sample_chip(&spec, &ChipLayout::default(), 3).unwrap();
        let d = chip.nvm.device_mut(0, 0);
        d.write(MemristorState::Hrs, &spec, &mut ctx);
        let r1 = d.effective_resistance(&spec, 320.0);
        let r2 = d.effective_resistance(&spec, 320.0);
        assert_eq!(r1, r2);
    }

    #[test]
    fn larger_c2c_never_shrinks_spread_under_common_random_numbers() {
        // Same seed -> same normal variates; spread of repeated-write
        // resistances is monotone in sigma_c2c.
        let mut spreads = Vec::new();
        for &sigma in &[0.02, 0.05, 0.10] {
            let spec = spec_with(0.0, sigma);
            let mut ctx = CycleContext::new(spec.temp_k, 21);
            let mut d = MemristorDevice {
                process_factor_hrs: 1.0,
                process_factor_lrs: 1.0,
                state: MemristorState::Hrs,
                write_noise: 1.0,
            };
            let rs: Vec<f64> = (0..500)
                .map(|_| {
                    d.write(MemristorState::Lrs, &spec, &mut ctx);
                    d.effective_resistance(&spec, spec.temp_k)
                })
                .collect();
            let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            spreads.push(hi - lo);
        }
        assert!(spreads[0] <= spreads[1] && spreads[1] <= spreads[2]);
    }
}
