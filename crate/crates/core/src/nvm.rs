//! 1T1R resistive NVM model and the persistent image layout.
//!
//! Data and timestamp cells live in the memristor grid and are covered by
//! the integrity tag; the challenge, the stored tag and the key-position
//! bitmap live in a separate secure region that the tag does not cover
//! (and that the pessimistic attacker model can still read and write).
//! Bits map 1:1 onto device states, HRS = 0 and LRS = 1; a digital read
//! thresholds the effective resistance at sqrt(HRS*LRS).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::device::{ChipInstance, CycleContext, MemristorState, VariationSpec};
use crate::tag::Tag;

/// A contiguous run of grid cells, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRange {
    pub start: usize,
    pub len: usize,
}

impl CellRange {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    fn overlaps(&self, other: &CellRange) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

/// Placement of the tagged regions inside the NVM grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NvmLayout {
    pub data: CellRange,
    pub timestamp: CellRange,
    /// Cells written per clock cycle; 1 in the prototype, configurable for
    /// byte-wide access. Affects only cycle accounting.
    pub access_bits_per_cycle: usize,
}

impl Default for NvmLayout {
    /// 16 data cells and 8 reserved timestamp cells inside the 5x12 grid.
    fn default() -> Self {
        NvmLayout {
            data: CellRange { start: 0, len: 16 },
            timestamp: CellRange { start: 16, len: 8 },
            access_bits_per_cycle: 1,
        }
    }
}

impl NvmLayout {
    pub fn validate(&self, grid_cells: usize) -> Result<(), NvmError> {
        if self.data.len == 0 {
            return Err(NvmError::BadLayout("data region must be nonempty"));
        }
        if self.access_bits_per_cycle == 0 {
            return Err(NvmError::BadLayout("access width must be >= 1"));
        }
        if self.data.end() > grid_cells || self.timestamp.end() > grid_cells {
            return Err(NvmError::BadLayout("region exceeds the grid"));
        }
        if self.data.overlaps(&self.timestamp) {
            return Err(NvmError::BadLayout("data and timestamp regions overlap"));
        }
        Ok(())
    }
}

/// Write a bit string into a grid region, one device write per cell (fresh
/// analog noise each). Returns the charged clock cycles.
pub fn write_bits(
    chip: &mut ChipInstance,
    range: &CellRange,
    bits: &Bits,
    spec: &VariationSpec,
    ctx: &mut CycleContext,
    access_bits_per_cycle: usize,
) -> Result<f64, NvmError> {
    if bits.len() > range.len {
        return Err(NvmError::RegionOverflow {
            region: range.len,
            bits: bits.len(),
        });
    }
    if range.end() > chip.layout.nvm_cells() {
        return Err(NvmError::BadLayout("region exceeds the grid"));
    }
    for (i, b) in bits.iter().enumerate() {
        chip.nvm
            .cell_mut(range.start + i)
            .write(MemristorState::from_bit(b), spec, ctx);
    }
    Ok((bits.len() as f64 / access_bits_per_cycle as f64).ceil())
}

/// Nondestructive digital read of a grid region: effective resistance below
/// the cell's sqrt(HRS*LRS) midpoint reads as 1.
pub fn read_bits(
    chip: &ChipInstance,
    range: &CellRange,
    len: usize,
    spec: &VariationSpec,
    temperature_k: f64,
) -> Result<Bits, NvmError> {
    if len > range.len || range.end() > chip.layout.nvm_cells() {
        return Err(NvmError::BadLayout("read exceeds the region"));
    }
    Ok(Bits::new(
        (0..len)
            .map(|i| {
                let cell = chip.nvm.cell(range.start + i);
                cell.effective_resistance(spec, temperature_k)
                    < cell.read_threshold_ohm(spec, temperature_k)
            })
            .collect(),
    ))
}

/// The persistent image: tagged grid regions plus the secure side store.
#[derive(Debug, Clone, Default)]
pub struct NvmImage {
    pub layout_valid: bool,
    /// Secure region: the challenge used for the backup key.
    pub challenge_store: Option<Bits>,
    /// Secure region: the stored integrity tag.
    pub tag_store: Option<Tag>,
    /// Secure region: bitmap of the response positions that formed the key.
    pub key_positions: Option<Bits>,
    /// VALID_KEY token recorded at backup.
    pub key_valid: bool,
    /// True once a backup committed data + tag.
    pub committed: bool,
    pub data_written: bool,
    pub timestamp_written: bool,
}

impl NvmImage {
    pub fn flush(&mut self) {
        *self = NvmImage::default();
    }
}

/// JSON fixture form of an image: region name -> bit string.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NvmDump {
    pub data: Bits,
    pub timestamp: Bits,
    pub challenge: Option<Bits>,
    pub tag: Option<Bits>,
    pub key_positions: Option<Bits>,
    pub key_valid: bool,
}

/// Dump the digital view of a chip's image.
pub fn dump_image(
    chip: &ChipInstance,
    layout: &NvmLayout,
    image: &NvmImage,
    spec: &VariationSpec,
    temperature_k: f64,
) -> Result<NvmDump, NvmError> {
    Ok(NvmDump {
        data: read_bits(chip, &layout.data, layout.data.len, spec, temperature_k)?,
        timestamp: read_bits(
            chip,
            &layout.timestamp,
            layout.timestamp.len,
            spec,
            temperature_k,
        )?,
        challenge: image.challenge_store.clone(),
        tag: image.tag_store.as_ref().map(|t| t.0.clone()),
        key_positions: image.key_positions.clone(),
        key_valid: image.key_valid,
    })
}

/// Load a dump back into the chip (fresh write noise on every cell) and the
/// image side store. Test-fixture path and the replay attacker's tool.
pub fn load_image(
    chip: &mut ChipInstance,
    layout: &NvmLayout,
    image: &mut NvmImage,
    dump: &NvmDump,
    spec: &VariationSpec,
    ctx: &mut CycleContext,
) -> Result<(), NvmError> {
    write_bits(chip, &layout.data, &dump.data, spec, ctx, layout.access_bits_per_cycle)?;
    write_bits(
        chip,
        &layout.timestamp,
        &dump.timestamp,
        spec,
        ctx,
        layout.access_bits_per_cycle,
    )?;
    image.challenge_store = dump.challenge.clone();
    image.tag_store = dump.tag.clone().map(Tag);
    image.key_positions = dump.key_positions.clone();
    image.key_valid = dump.key_valid;
    image.committed = dump.tag.is_some();
    image.data_written = true;
    image.timestamp_written = true;
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum NvmError {
    #[error("invalid NVM layout: {0}")]
    BadLayout(&'static str),
    #[error("region holds {region} cells, got {bits} bits")]
    RegionOverflow { region: usize, bits: usize },
    #[error("region not written")]
    Unwritten,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{sample_chip, ChipLayout};
    use crate::trng::RandomSource;

    fn setup(seed: u64) -> (ChipInstance, VariationSpec, CycleContext) {
        let spec = VariationSpec::default();
        let chip = sample_chip(&spec, &ChipLayout::default(), seed).unwrap();
        let ctx = CycleContext::new(spec.temp_k, seed ^ 0x55);
        (chip, spec, ctx)
    }

    #[test]
    fn digital_roundtrip_is_exact() {
        let (mut chip, spec, mut ctx) = setup(1);
        let layout = NvmLayout::default();
        let bits = RandomSource::seeded(2).next_bits(16);
        let cycles =
            write_bits(&mut chip, &layout.data, &bits, &spec, &mut ctx, 1).unwrap();
        assert_eq!(cycles, 16.0);
        let back = read_bits(&chip, &layout.data, 16, &spec, spec.temp_k).unwrap();
        assert_eq!(back, bits);
    }

    #[test]
    fn reads_survive_noise_and_temperature() {
        // 10% write noise and a 50 K shift are dwarfed by the 100x window.
        let (mut chip, spec, mut ctx) = setup(3);
        let layout = NvmLayout::default();
        let bits = RandomSource::seeded(4).next_bits(16);
        for _ in 0..50 {
            write_bits(&mut chip, &layout.data, &bits, &spec, &mut ctx, 1).unwrap();
            let back = read_bits(&chip, &layout.data, 16, &spec, spec.temp_k + 50.0).unwrap();
            assert_eq!(back, bits);
        }
    }

    #[test]
    fn overlapping_regions_rejected() {
        let layout = NvmLayout {
            data: CellRange { start: 0, len: 16 },
            timestamp: CellRange { start: 10, len: 8 },
            access_bits_per_cycle: 1,
        };
        assert!(matches!(
            layout.validate(60).unwrap_err(),
            NvmError::BadLayout(_)
        ));
        assert!(NvmLayout::default().validate(60).is_ok());
    }

    #[test]
    fn oversized_write_rejected() {
        let (mut chip, spec, mut ctx) = setup(5);
        let layout = NvmLayout::default();
        let bits = RandomSource::seeded(6).next_bits(17);
        assert!(matches!(
            write_bits(&mut chip, &layout.data, &bits, &spec, &mut ctx, 1).unwrap_err(),
            NvmError::RegionOverflow { .. }
        ));
    }

    #[test]
    fn byte_wide_access_changes_only_accounting() {
        let (mut chip, spec, mut ctx) = setup(7);
        let layout = NvmLayout::default();
        let bits = RandomSource::seeded(8).next_bits(16);
        let cycles =
            write_bits(&mut chip, &layout.data, &bits, &spec, &mut ctx, 8).unwrap();
        assert_eq!(cycles, 2.0);
        let back = read_bits(&chip, &layout.data, 16, &spec, spec.temp_k).unwrap();
        assert_eq!(back, bits);
    }

    #[test]
    fn dump_and_load_fixture_roundtrip() {
        let (mut chip, spec, mut ctx) = setup(9);
        let layout = NvmLayout::default();
        let mut image = NvmImage::default();
        let data = RandomSource::seeded(10).next_bits(16);
        let ts = RandomSource::seeded(11).next_bits(8);
        write_bits(&mut chip, &layout.data, &data, &spec, &mut ctx, 1).unwrap();
        write_bits(&mut chip, &layout.timestamp, &ts, &spec, &mut ctx, 1).unwrap();
        image.challenge_store = Some(RandomSource::seeded(12).next_bits(32));
        image.key_valid = true;
        let dump = dump_image(&chip, &layout, &image, &spec, spec.temp_k).unwrap();
        assert_eq!(dump.data, data);
        assert_eq!(dump.timestamp, ts);
        let json = serde_json::to_string(&dump).unwrap();
        let parsed: NvmDump = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, dump);

        let (mut chip2, spec2, mut ctx2) = setup(13);
        let mut image2 = NvmImage::default();
        load_image(&mut chip2, &layout, &mut image2, &parsed, &spec2, &mut ctx2).unwrap();
        let back = dump_image(&chip2, &layout, &image2, &spec2, spec2.temp_k).unwrap();
        assert_eq!(back.data, data);
        assert_eq!(back.timestamp, ts);
    }
}
