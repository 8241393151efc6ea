//! Sneak-path-current tag generation from the NVM crossbar.
//!
//! Each of three read steps drives a fixed subset of rows at the read
//! voltage while every column is terminated through a load resistor of
//! sqrt(HRS*LRS) to ground; undriven rows float, so they carry the sneak
//! currents that make every load current a function of the whole analog
//! memory state. The full nodal system is solved exactly (dense LU).
//!
//! Digitization: tag bit k is the parity of the column-k load current
//! quantized at a per-bit step calibrated during chip provisioning
//! (IQR over random memory states divided by 2^adc_bits). Reads are
//! noiseless, so regeneration over an untouched memory is bit-exact, while
//! any rewrite moves the currents by many quantization steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::device::{ChipInstance, CycleContext, MemristorState, VariationSpec};

/// Integrity tag over the NVM analog state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag(pub Bits);

/// Static tag-generation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    /// Tag width; 6 and 8 are the studied sizes.
    pub tag_bits: usize,
    /// Row-drive steps per tag generation.
    pub read_steps: usize,
    /// Read voltage on driven rows (volt).
    pub v_read: f64,
    /// ADC resolution: the quantization step is spread / 2^adc_bits.
    pub adc_bits: u32,
    /// Random memory states sampled during provisioning calibration.
    pub calibration_samples: usize,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            tag_bits: 8,
            read_steps: 3,
            v_read: 0.2,
            adc_bits: 12,
            calibration_samples: 256,
        }
    }
}

impl TagConfig {
    pub fn validate(&self, nvm_cols: usize) -> Result<(), TagError> {
        if self.tag_bits == 0 || self.tag_bits > nvm_cols {
            return Err(TagError::BadConfig("tag_bits must be in 1..=nvm columns"));
        }
        if self.read_steps == 0 {
            return Err(TagError::BadConfig("read_steps must be >= 1"));
        }
        if self.calibration_samples < 2 {
            return Err(TagError::BadConfig("calibration needs >= 2 samples"));
        }
        Ok(())
    }

    /// Load resistor value: sqrt(HRS * LRS).
    pub fn load_ohm(spec: &VariationSpec) -> f64 {
        (spec.hrs_ohm * spec.lrs_ohm).sqrt()
    }

    /// Read step that produces tag bit `k`.
    pub fn step_of_bit(&self, k: usize) -> usize {
        k % self.read_steps
    }
}

/// Per-chip provisioning artifact: the quantization step of each tag bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagCalibration {
    pub quanta: Vec<f64>,
}

/// Solve the crossbar nodal system.
///
/// `conductance[r][c]` connects row r to column c; rows with `driven` true
/// sit at `v_drive`, the rest float; every column is terminated through
/// `loads[c]` to ground. Returns the per-column load currents. The direct
/// solve is exact to LU roundoff; the residual is checked against 1e-10
/// relative.
pub fn solve_crossbar_currents(
    conductance: &[Vec<f64>],
    driven: &[bool],
    loads: &[f64],
    v_drive: f64,
) -> Result<Vec<f64>, TagError> {
    let rows = conductance.len();
    if rows == 0 || conductance[0].is_empty() {
        return Err(TagError::BadConfig("empty conductance grid"));
    }
    let cols = conductance[0].len();
    if driven.len() != rows || loads.len() != cols {
        return Err(TagError::BadConfig("driven/loads shape mismatch"));
    }
    if !driven.iter().any(|&d| d) {
        return Err(TagError::BadConfig("at least one row must be driven"));
    }
    for row in conductance {
        if row.len() != cols {
            return Err(TagError::BadConfig("ragged conductance grid"));
        }
        if row.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(TagError::BadConfig("conductances must be positive"));
        }
    }

    let undriven: Vec<usize> = (0..rows).filter(|&r| !driven[r]).collect();
    let n = undriven.len() + cols;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    // KCL at each floating row r: sum_c g[r][c] (V_r - U_c) = 0.
    for (i, &r) in undriven.iter().enumerate() {
        let mut diag = 0.0;
        for c in 0..cols {
            diag += conductance[r][c];
            a[(i, undriven.len() + c)] -= conductance[r][c];
        }
        a[(i, i)] = diag;
    }
    // KCL at each column node c: sum_r g[r][c] (V_r - U_c) = U_c / load_c.
    for c in 0..cols {
        let row_idx = undriven.len() + c;
        let mut diag = 1.0 / loads[c];
        for r in 0..rows {
            diag += conductance[r][c];
            if driven[r] {
                b[row_idx] += conductance[r][c] * v_drive;
            }
        }
        for (i, &r) in undriven.iter().enumerate() {
            a[(row_idx, i)] -= conductance[r][c];
        }
        a[(row_idx, row_idx)] = diag;
    }

    let lu = a.clone().lu();
    let x = lu
        .solve(&b)
        .expect("nodal matrix is nonsingular for positive conductances");
    // Residual check: the system is well-conditioned enough that LU lands
    // far below the contract bound.
    let residual = (&a * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    assert!(
        residual <= 1e-10,
        "nodal solve residual {residual} exceeds 1e-10"
    );
    Ok((0..cols)
        .map(|c| x[undriven.len() + c] / loads[c])
        .collect())
}

/// The per-bit load currents feeding the tag ADCs: bit k reads column k in
/// step k mod read_steps, where step s drives rows {r : r mod read_steps = s}.
pub fn tag_currents(
    chip: &ChipInstance,
    cfg: &TagConfig,
    spec: &VariationSpec,
    temperature_k: f64,
) -> Result<Vec<f64>, TagError> {
    cfg.validate(chip.layout.nvm_cols)?;
    let g = chip.nvm.conductance_matrix(spec, temperature_k);
    let loads = vec![TagConfig::load_ohm(spec); chip.layout.nvm_cols];
    let mut out = vec![0.0; cfg.tag_bits];
    for step in 0..cfg.read_steps {
        if !(0..cfg.tag_bits).any(|k| cfg.step_of_bit(k) == step) {
            continue;
        }
        let driven: Vec<bool> = (0..chip.layout.nvm_rows)
            .map(|r| r % cfg.read_steps == step)
            .collect();
        let currents = solve_crossbar_currents(&g, &driven, &loads, cfg.v_read)?;
        for (k, slot) in out.iter_mut().enumerate() {
            if cfg.step_of_bit(k) == step {
                *slot = currents[k];
            }
        }
    }
    Ok(out)
}

/// Provision the per-bit quantization steps: interquartile range of each
/// bit's current over random memory states, divided by 2^adc_bits. The
/// provisioning writes perturb the NVM; it runs before deployment.
pub fn provision_tag_calibration(
    chip: &mut ChipInstance,
    cfg: &TagConfig,
    spec: &VariationSpec,
    ctx: &mut CycleContext,
) -> Result<TagCalibration, TagError> {
    use rand::Rng;
    cfg.validate(chip.layout.nvm_cols)?;
    let cells = chip.layout.nvm_cells();
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(cfg.calibration_samples);
    for _ in 0..cfg.calibration_samples {
        for i in 0..cells {
            let bit: bool = ctx.rng.gen();
            chip.nvm
                .cell_mut(i)
                .write(MemristorState::from_bit(bit), spec, ctx);
        }
        samples.push(tag_currents(chip, cfg, spec, ctx.temperature_k)?);
    }
    let quanta = (0..cfg.tag_bits)
        .map(|k| {
            let mut vals: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = |frac: f64| vals[((vals.len() - 1) as f64 * frac).round() as usize];
            let iqr = q(0.75) - q(0.25);
            iqr.max(f64::MIN_POSITIVE) / f64::from(1u32 << cfg.adc_bits.min(30))
        })
        .collect();
    Ok(TagCalibration { quanta })
}

/// Generate the tag over the current analog NVM state. Deterministic as
/// long as no cell has been rewritten.
pub fn generate_tag(
    chip: &ChipInstance,
    calib: &TagCalibration,
    cfg: &TagConfig,
    spec: &VariationSpec,
    temperature_k: f64,
) -> Result<Tag, TagError> {
    if calib.quanta.len() != cfg.tag_bits {
        return Err(TagError::BadConfig("calibration width != tag_bits"));
    }
    let currents = tag_currents(chip, cfg, spec, temperature_k)?;
    let bits = currents
        .iter()
        .zip(&calib.quanta)
        .map(|(i, q)| ((i / q).floor() as i64) & 1 == 1)
        .collect();
    Ok(Tag(Bits::new(bits)))
}

/// Regenerate and compare. True iff bitwise equal; a stored tag of the
/// wrong width is a contract error.
pub fn verify(
    chip: &ChipInstance,
    calib: &TagCalibration,
    cfg: &TagConfig,
    spec: &VariationSpec,
    temperature_k: f64,
    stored: &Tag,
) -> Result<bool, TagError> {
    if stored.0.len() != cfg.tag_bits {
        return Err(TagError::WrongTagLength {
            expected: cfg.tag_bits,
            got: stored.0.len(),
        });
    }
    let fresh = generate_tag(chip, calib, cfg, spec, temperature_k)?;
    Ok(fresh == *stored)
}

#[derive(Debug, Error, PartialEq)]
pub enum TagError {
    #[error("invalid tag configuration: {0}")]
    BadConfig(&'static str),
    #[error("stored tag has {got} bits, expected {expected}")]
    WrongTagLength { expected: usize, got: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{sample_chip, ChipLayout};
    use rand::Rng;

    #[test]
    fn single_cell_series_circuit() {
        // 1x1 grid: I = V / (1/G + R_load).
        let g = 1e-4;
        let load = 1e5;
        let v = 0.2;
        let i = solve_crossbar_currents(&[vec![g]], &[true], &[load], v).unwrap();
        let expected = v / (1.0 / g + load);
        assert!((i[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_hand_nodal_solution() {
        // Row 0 driven at 1 V, row 1 floating; unit loads. Unknowns
        // (V1, U0, U1) with conductances g00=1, g01=2, g10=3, g11=4 S and
        // loads 1 ohm:
        //   row 1:     7 V1 - 3 U0 - 4 U1 = 0
        //   column 0:  (1+3+1) U0 - 3 V1 = 1
        //   column 1:  (2+4+1) U1 - 4 V1 = 2
        // Solving by hand: V1 = (3/5(1+... ) use substitution:
        //   U0 = (1 + 3 V1)/5, U1 = (2 + 4 V1)/7
        //   7 V1 = 3(1+3V1)/5 + 4(2+4V1)/7
        //   245 V1 = 21(1+3V1) + 20(2+4V1) = 61 + 143 V1 -> V1 = 61/102
        let v1 = 61.0 / 102.0;
        let u0 = (1.0 + 3.0 * v1) / 5.0;
        let u1 = (2.0 + 4.0 * v1) / 7.0;
        let i = solve_crossbar_currents(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[true, false],
            &[1.0, 1.0],
            1.0,
        )
        .unwrap();
        assert!((i[0] - u0).abs() < 1e-9);
        assert!((i[1] - u1).abs() < 1e-9);
    }

    #[test]
    fn added_conductance_raises_own_column_current() {
        // All-HRS grid vs one cell flipped to LRS: that column's current
        // strictly increases.
        let spec = VariationSpec::default();
        let hrs_g = 1.0 / spec.hrs_ohm;
        let lrs_g = 1.0 / spec.lrs_ohm;
        let mut grid = vec![vec![hrs_g; 12]; 5];
        let loads = vec![TagConfig::load_ohm(&spec); 12];
        let driven = vec![true, false, false, true, false];
        let before = solve_crossbar_currents(&grid, &driven, &loads, 0.2).unwrap();
        grid[2][7] = lrs_g;
        let after = solve_crossbar_currents(&grid, &driven, &loads, 0.2).unwrap();
        assert!(after[7] > before[7]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_crossbar_currents(&[vec![1.0]], &[false], &[1.0], 1.0).is_err());
        assert!(solve_crossbar_currents(&[vec![-1.0]], &[true], &[1.0], 1.0).is_err());
        assert!(solve_crossbar_currents(&[], &[], &[], 1.0).is_err());
    }

    /// Independent oracle: Gaussian elimination with partial pivoting over
    /// the full nodal assembly, written without nalgebra.
    fn oracle_solve(g: &[Vec<f64>], driven: &[bool], loads: &[f64], v: f64) -> Vec<f64> {
        let rows = g.len();
        let cols = g[0].len();
        let und: Vec<usize> = (0..rows).filter(|&r| !driven[r]).collect();
        let n = und.len() + cols;
        let mut m = vec![vec![0.0f64; n + 1]; n];
        for (i, &r) in und.iter().enumerate() {
            for c in 0..cols {
                m[i][i] += g[r][c];
                m[i][und.len() + c] -= g[r][c];
            }
        }
        for c in 0..cols {
            let ri = und.len() + c;
            m[ri][ri] += 1.0 / loads[c];
            for r in 0..rows {
                m[ri][ri] += g[r][c];
                if driven[r] {
                    m[ri][n] += g[r][c] * v;
                }
            }
            for (i, &r) in und.iter().enumerate() {
                m[ri][i] -= g[r][c];
            }
        }
        // forward elimination with partial pivoting
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut x = vec![0.0f64; n];
        for row in (0..n).rev() {
            let mut s = m[row][n];
            for k in row + 1..n {
                s -= m[row][k] * x[k];
            }
            x[row] = s / m[row][row];
        }
        (0..cols).map(|c| x[und.len() + c] / loads[c]).collect()
    }

    #[test]
    fn solver_matches_independent_elimination_on_random_grids() {
        let mut rng = crate::seed::derive_rng(31, &[1]);
        let spec = VariationSpec::default();
        for trial in 0..25 {
            let grid: Vec<Vec<f64>> = (0..5)
                .map(|_| {
                    (0..12)
                        .map(|_| {
                            let lrs: bool = rng.gen();
                            let base = if lrs { 1e-4 } else { 1e-6 };
                            base * (0.5 + rng.gen::<f64>())
                        })
                        .collect()
                })
                .collect();
            let driven: Vec<bool> = (0..5).map(|r| r % 3 == trial % 3).collect();
            if !driven.iter().any(|&d| d) {
                continue;
            }
            let loads = vec![TagConfig::load_ohm(&spec); 12];
            let a = solve_crossbar_currents(&grid, &driven, &loads, 0.2).unwrap();
            let b = oracle_solve(&grid, &driven, &loads, 0.2);
            for (x, y) in a.iter().zip(&b) {
                assert!(
                    (x - y).abs() <= 1e-9 * y.abs().max(1e-30),
                    "solver {x} vs oracle {y}"
                );
            }
        }
    }

    fn provisioned_chip(seed: u64) -> (ChipInstance, TagCalibration, TagConfig, VariationSpec) {
        let spec = VariationSpec::default();
        let cfg = TagConfig::default();
        let mut chip = sample_chip(&spec, &ChipLayout::default(), seed).unwrap();
        let mut ctx = CycleContext::new(spec.temp_k, seed ^ 0xABCD);
        let calib = provision_tag_calibration(&mut chip, &cfg, &spec, &mut ctx).unwrap();
        (chip, calib, cfg, spec)
    }

    #[test]
    fn tag_is_deterministic_without_writes() {
        let (chip, calib, cfg, spec) = provisioned_chip(8);
        let a = generate_tag(&chip, &calib, &cfg, &spec, spec.temp_k).unwrap();
        let b = generate_tag(&chip, &calib, &cfg, &spec, spec.temp_k).unwrap();
        assert_eq!(a, b);
        assert!(verify(&chip, &calib, &cfg, &spec, spec.temp_k, &a).unwrap());
    }

    #[test]
    fn wrong_length_tag_is_a_contract_error() {
        let (chip, calib, cfg, spec) = provisioned_chip(9);
        let bad = Tag(Bits::zeros(5));
        assert_eq!(
            verify(&chip, &calib, &cfg, &spec, spec.temp_k, &bad).unwrap_err(),
            TagError::WrongTagLength {
                expected: 8,
                got: 5
            }
        );
    }

    #[test]
    fn data_flip_scrambles_about_half_the_tag() {
        // Desk-scale avalanche check; the full Table-I campaign runs in the
        // acceptance suite.
        let (mut chip, calib, cfg, spec) = provisioned_chip(10);
        let mut ctx = CycleContext::new(spec.temp_k, 77);
        let mut flipped_fraction = 0.0;
        let mut unchanged = 0usize;
        let trials = 120;
        for _ in 0..trials {
            for i in 0..chip.layout.nvm_cells() {
                let bit: bool = ctx.rng.gen();
                chip.nvm
                    .cell_mut(i)
                    .write(MemristorState::from_bit(bit), &spec, &mut ctx);
            }
            let before = generate_tag(&chip, &calib, &cfg, &spec, spec.temp_k).unwrap();
            let cell = ctx.rng.gen_range(0..chip.layout.nvm_cells());
            let target = !chip.nvm.cell(cell).state.to_bit();
            chip.nvm
                .cell_mut(cell)
                .write(MemristorState::from_bit(target), &spec, &mut ctx);
            let after = generate_tag(&chip, &calib, &cfg, &spec, spec.temp_k).unwrap();
            flipped_fraction += before.0.normalized_hamming(&after.0);
            if before == after {
                unchanged += 1;
            }
        }
        let avalanche = flipped_fraction / trials as f64;
        assert!(
            (0.35..0.65).contains(&avalanche),
            "avalanche {avalanche} at desk scale"
        );
        // P[tag unchanged | cell value rewritten] <= 2^-8 + epsilon.
        assert!(
            (unchanged as f64 / trials as f64) <= 1.0 / 256.0 + 0.05,
            "{unchanged}/{trials} tampers left the tag unchanged"
        );
    }
}
