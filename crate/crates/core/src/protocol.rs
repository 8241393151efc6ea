//! The backup/restore state machine with power-event handling and clock
//! cycle accounting.
//!
//! Backup (on a low-power warning): draw a fresh challenge, run the
//! screening pre-pass and two SRAM-sampled PUF passes, extract the first 16
//! clean bits as the key, XOR-encrypt, write the ciphertext and a fresh
//! random timestamp into the NVM, then generate and store the tag together
//! with the challenge and the key-position bitmap. Restore (once power is
//! back above threshold): regenerate the tag and compare; on a match and a
//! valid key token, rerun two PUF passes with the stored challenge, demand
//! all-agreement at the stored key positions, decrypt and hand the data
//! back. A tag mismatch or a key-regeneration failure flushes the data —
//! decryption never runs after a tag mismatch, and the key itself is never
//! persisted anywhere.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::bits::Bits;
use crate::device::{
    sample_chip, ChipInstance, ChipLayout, CycleContext, DeviceError, VariationSpec,
};
use crate::nvm::{self, NvmDump, NvmError, NvmImage, NvmLayout};
use crate::otp::{self, OtpError};
use crate::puf::{self, Challenge, MitigationConfig, PufError, Response};
use crate::reliability::{self, ExtractError, Key, KeyExtractionParams};
use crate::seed::{self, tags};
use crate::tag::{self, TagCalibration, TagConfig, TagError};
use crate::trng::RandomSource;

/// States of the security block. The hardware enforces that no two are
/// active at once; the enum representation carries the same invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolState {
    Idle,
    BackupPufPass1,
    BackupPufPass2,
    KeyAndEncrypt,
    TagGenerate,
    PoweredDown,
    RestoreTagCheck,
    RestorePufPass1,
    RestorePufPass2,
    RestoreDecrypt,
    Rejected,
    Restored,
}

impl ProtocolState {
    /// Legal successor states.
    pub fn can_go(self, next: ProtocolState) -> bool {
        use ProtocolState::*;
        matches!(
            (self, next),
            (Idle, BackupPufPass1)
                | (Idle, PoweredDown)
                | (BackupPufPass1, BackupPufPass2)
                | (BackupPufPass2, KeyAndEncrypt)
                | (KeyAndEncrypt, TagGenerate)
                | (KeyAndEncrypt, PoweredDown)
                | (TagGenerate, PoweredDown)
                | (PoweredDown, RestoreTagCheck)
                | (RestoreTagCheck, RestorePufPass1)
                | (RestoreTagCheck, Rejected)
                | (RestorePufPass1, RestorePufPass2)
                | (RestorePufPass2, RestoreDecrypt)
                | (RestorePufPass2, Rejected)
                | (RestoreDecrypt, Restored)
                | (Restored, Idle)
                | (Rejected, Idle)
        )
    }
}

/// Power-rail events driving the state machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerEvent {
    LowPowerWarning,
    PowerFail,
    PowerRestored { available_power: f64 },
}

/// Cycle-accounting phases (the delay-table rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclePhase {
    PufReset,
    PufChallenge,
    PufRead,
    SramWrite,
    RramWrite,
    RramRead,
    TagGeneration,
}

pub type CycleLedger = BTreeMap<CyclePhase, f64>;

/// Total clock cycles of a completed backup or restore.
pub fn cycle_cost(cycles: &CycleLedger) -> f64 {
    cycles.values().sum()
}

/// Ledger for a two-pass key generation: per block and pass, RESET 0.5,
/// challenge 0.25, read 0.25; SRAM writes overlap the read phase and charge
/// nothing.
fn puf_cycles(layout: &ChipLayout, passes: usize) -> CycleLedger {
    let mut ledger = CycleLedger::new();
    let mut reset = 0.0;
    let mut chal = 0.0;
    let mut read = 0.0;
    for _ in 0..passes {
        for (_, phase) in puf::block_schedule(layout) {
            match phase {
                puf::PufPhase::ResetAll => reset += phase.cycle_cost(),
                puf::PufPhase::ApplyChallenge => chal += phase.cycle_cost(),
                puf::PufPhase::Read => read += phase.cycle_cost(),
            }
        }
    }
    ledger.insert(CyclePhase::PufReset, reset);
    ledger.insert(CyclePhase::PufChallenge, chal);
    ledger.insert(CyclePhase::PufRead, read);
    ledger.insert(CyclePhase::SramWrite, 0.0);
    ledger
}

/// Outcome of a backup run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackupReport {
    pub key_valid: bool,
    /// Positions scanned and skipped before the key filled (the `x` of the
    /// 16+x RRAM-write row).
    pub discarded_bits: usize,
    pub cycles: CycleLedger,
    pub nvm_image: Option<NvmDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RejectReason {
    TagMismatch,
    InvalidKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RestoreOutcome {
    Restored(Bits),
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestoreResult {
    pub outcome: RestoreOutcome,
    pub cycles: CycleLedger,
}

/// Static configuration of one system instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub variation: VariationSpec,
    pub chip_layout: ChipLayout,
    pub nvm_layout: NvmLayout,
    pub tag: TagConfig,
    pub key: KeyExtractionParams,
    /// Screening evaluations per backup; positions showing any disagreement
    /// are masked before run-time extraction.
    pub screening_samples: usize,
    pub mitigations: MitigationConfig,
    pub power_threshold: f64,
    pub temperature_k: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let variation = VariationSpec::default();
        SystemConfig {
            variation,
            chip_layout: ChipLayout::default(),
            nvm_layout: NvmLayout::default(),
            tag: TagConfig::default(),
            key: KeyExtractionParams::default(),
            screening_samples: 256,
            mitigations: MitigationConfig::disabled(),
            power_threshold: 1.0,
            temperature_k: variation.temp_k,
        }
    }
}

/// One device plus its protocol engine.
#[derive(Debug, Clone)]
pub struct SecureSystem {
    pub cfg: SystemConfig,
    pub chip: ChipInstance,
    pub image: NvmImage,
    pub tag_calibration: TagCalibration,
    state: ProtocolState,
    trng: RandomSource,
    ctx: CycleContext,
    transitions: Vec<(ProtocolState, ProtocolState)>,
    decrypt_invocations: usize,
}

impl SecureSystem {
    /// Build and provision a system: chip sampling, tag calibration and the
    /// seeded challenge source all derive from `master_seed`.
    pub fn new(cfg: SystemConfig, master_seed: u64) -> Result<Self, ProtocolError> {
        cfg.variation.validate()?;
        cfg.chip_layout.validate()?;
        cfg.nvm_layout.validate(cfg.chip_layout.nvm_cells())?;
        cfg.tag.validate(cfg.chip_layout.nvm_cols)?;
        cfg.key.validate()?;
        cfg.mitigations
            .validate(cfg.chip_layout.response_bits_per_block)?;
        if cfg.screening_samples < cfg.key.samples {
            return Err(ProtocolError::BadConfig(
                "screening_samples must be >= key.samples",
            ));
        }
        let mut chip = sample_chip(
            &cfg.variation,
            &cfg.chip_layout,
            seed::derive_seed(master_seed, &[tags::CHIP]),
        )?;
        let mut cal_ctx = CycleContext::with_rng(
            cfg.temperature_k,
            seed::derive_rng(master_seed, &[tags::TAG_CAL]),
        );
        let tag_calibration =
            tag::provision_tag_calibration(&mut chip, &cfg.tag, &cfg.variation, &mut cal_ctx)?;
        let trng = RandomSource::seeded(seed::derive_seed(master_seed, &[tags::TRNG]));
        let ctx = CycleContext::with_rng(
            cfg.temperature_k,
            seed::derive_rng(master_seed, &[tags::CYCLE]),
        );
        Ok(SecureSystem {
            cfg,
            chip,
            image: NvmImage::default(),
            tag_calibration,
            state: ProtocolState::Idle,
            trng,
            ctx,
            transitions: Vec::new(),
            decrypt_invocations: 0,
        })
    }

    pub fn state(&self) -> ProtocolState {
        self.state
    }

    pub fn decrypt_invocations(&self) -> usize {
        self.decrypt_invocations
    }

    /// Transition log accumulated since the last drain.
    pub fn drain_transitions(&mut self) -> Vec<(ProtocolState, ProtocolState)> {
        std::mem::take(&mut self.transitions)
    }

    /// Attacker-context RNG derived from a caller seed; keeps adversary
    /// writes off the device's own noise stream.
    pub fn attacker_context(&self, seed_value: u64) -> CycleContext {
        CycleContext::with_rng(
            self.cfg.temperature_k,
            seed::derive_rng(seed_value, &[tags::ATTACK]),
        )
    }

    fn go(&mut self, next: ProtocolState) {
        assert!(
            self.state.can_go(next),
            "illegal transition {:?} -> {:?}",
            self.state,
            next
        );
        self.transitions.push((self.state, next));
        self.state = next;
    }

    /// Ready the machine for the next power cycle after a terminal state.
    pub fn acknowledge_outcome(&mut self) {
        if matches!(self.state, ProtocolState::Restored | ProtocolState::Rejected) {
            self.go(ProtocolState::Idle);
        }
    }

    fn effective_response(&mut self, challenge: &Challenge) -> Result<Response, ProtocolError> {
        let raw = puf::generate_response(
            &mut self.chip,
            challenge,
            &self.cfg.variation,
            &mut self.ctx,
        )?;
        Ok(puf::apply_mitigations(
            &raw,
            &self.cfg.mitigations,
            challenge,
            &self.cfg.chip_layout,
        )?)
    }

    /// Key generation: screening pre-pass, then the two SRAM-sampled passes
    /// and the clean-bit scan over unmasked positions.
    fn generate_key(
        &mut self,
        challenge: &Challenge,
    ) -> Result<reliability::KeyExtraction, ProtocolError> {
        let width = puf::mitigated_width(&self.cfg.mitigations, &self.cfg.chip_layout);
        if self.cfg.key.response_bits != width {
            return Err(ProtocolError::BadConfig(
                "key.response_bits must match the (mitigated) response width",
            ));
        }
        let n_screen = self
            .cfg
            .screening_samples
            .saturating_sub(self.cfg.key.samples);
        let mask = if n_screen > 0 {
            let screen: Vec<Bits> = (0..n_screen)
                .map(|_| self.effective_response(challenge).map(|r| r.0))
                .collect::<Result<_, _>>()?;
            Some(reliability::screening_mask(&screen))
        } else {
            None
        };
        let samples: Vec<Bits> = (0..self.cfg.key.samples)
            .map(|_| self.effective_response(challenge).map(|r| r.0))
            .collect::<Result<_, _>>()?;
        Ok(reliability::extract_key(
            &samples,
            mask.as_ref(),
            &self.cfg.key,
        )?)
    }

    /// Key generation, OTP encryption, NVM write, timestamp randomization,
    /// tag generation and storage of (challenge, tag, positions). Requires
    /// a low-power warning, modeled as: callable from Idle. On an invalid
    /// key the backup aborts without touching the NVM.
    pub fn secure_backup(&mut self, data: &Bits) -> Result<BackupReport, ProtocolError> {
        if self.state != ProtocolState::Idle {
            return Err(ProtocolError::WrongState {
                expected: "Idle",
                got: self.state,
            });
        }
        if data.len() != self.cfg.key.key_bits {
            return Err(ProtocolError::BadConfig(
                "data length must equal the key length (block-wise backups split upstream)",
            ));
        }
        let challenge = Challenge(self.trng.next_bits(self.cfg.chip_layout.challenge_bits));
        self.go(ProtocolState::BackupPufPass1);
        self.go(ProtocolState::BackupPufPass2);
        let extraction = self.generate_key(&challenge)?;
        self.go(ProtocolState::KeyAndEncrypt);

        let mut cycles = puf_cycles(&self.cfg.chip_layout, self.cfg.key.samples);
        if !extraction.key.valid {
            // Not enough clean bits: abort, leaving the NVM untouched; the
            // processor falls back to a cold restart.
            cycles.insert(CyclePhase::RramWrite, 0.0);
            self.image.key_valid = false;
            self.image.committed = false;
            self.go(ProtocolState::PoweredDown);
            return Ok(BackupReport {
                key_valid: false,
                discarded_bits: extraction.discarded,
                cycles,
                nvm_image: None,
            });
        }

        let cipher = otp::encrypt(data, &extraction.key)?;
        let write_cycles = nvm::write_bits(
            &mut self.chip,
            &self.cfg.nvm_layout.data,
            &cipher,
            &self.cfg.variation,
            &mut self.ctx,
            self.cfg.nvm_layout.access_bits_per_cycle,
        )?;
        // Each skipped scan position costs one extra cycle in the bit-serial
        // write path: the 16+x row of the delay table.
        cycles.insert(
            CyclePhase::RramWrite,
            write_cycles + extraction.discarded as f64,
        );
        self.image.data_written = true;

        self.randomize_timestamp()?;
        self.go(ProtocolState::TagGenerate);
        let fresh_tag = tag::generate_tag(
            &self.chip,
            &self.tag_calibration,
            &self.cfg.tag,
            &self.cfg.variation,
            self.ctx.temperature_k,
        )?;
        cycles.insert(CyclePhase::TagGeneration, 3.0);

        let mut positions = Bits::zeros(self.cfg.key.response_bits);
        for &p in &extraction.positions {
            positions.set(p, true);
        }
        self.image.challenge_store = Some(challenge.0.clone());
        self.image.tag_store = Some(fresh_tag);
        self.image.key_positions = Some(positions);
        self.image.key_valid = true;
        self.image.committed = true;
        self.go(ProtocolState::PoweredDown);

        let dump = nvm::dump_image(
            &self.chip,
            &self.cfg.nvm_layout,
            &self.image,
            &self.cfg.variation,
            self.ctx.temperature_k,
        )?;
        Ok(BackupReport {
            key_valid: true,
            discarded_bits: extraction.discarded,
            cycles,
            nvm_image: Some(dump),
        })
    }

    /// Rewrite the reserved timestamp cells with fresh random bits (fresh
    /// write noise), so every backup gets a new tag even for identical data.
    pub fn randomize_timestamp(&mut self) -> Result<(), ProtocolError> {
        let len = self.cfg.nvm_layout.timestamp.len;
        if len == 0 {
            return Ok(());
        }
        let stamp = self.trng.next_bits(len);
        nvm::write_bits(
            &mut self.chip,
            &self.cfg.nvm_layout.timestamp,
            &stamp,
            &self.cfg.variation,
            &mut self.ctx,
            self.cfg.nvm_layout.access_bits_per_cycle,
        )?;
        self.image.timestamp_written = true;
        Ok(())
    }

    /// Wait for power, check the regenerated tag against the stored one,
    /// regenerate the key with the stored challenge and decrypt. Rejection
    /// flushes the image and restarts the processor.
    pub fn secure_restore(
        &mut self,
        available_power: f64,
    ) -> Result<RestoreResult, ProtocolError> {
        if self.state != ProtocolState::PoweredDown {
            return Err(ProtocolError::WrongState {
                expected: "PoweredDown",
                got: self.state,
            });
        }
        if available_power < self.cfg.power_threshold {
            // Algorithm 3's wait loop: no state change.
            return Err(ProtocolError::PowerBelowThreshold {
                available: available_power,
                threshold: self.cfg.power_threshold,
            });
        }
        self.go(ProtocolState::RestoreTagCheck);
        let mut cycles = CycleLedger::new();
        cycles.insert(CyclePhase::TagGeneration, 3.0);

        let stored_tag = self.image.tag_store.clone();
        let tag_ok = match &stored_tag {
            Some(stored) => tag::verify(
                &self.chip,
                &self.tag_calibration,
                &self.cfg.tag,
                &self.cfg.variation,
                self.ctx.temperature_k,
                stored,
            )?,
            None => false,
        };
        if !tag_ok {
            self.image.flush();
            self.go(ProtocolState::Rejected);
            return Ok(RestoreResult {
                outcome: RestoreOutcome::Rejected(RejectReason::TagMismatch),
                cycles,
            });
        }
        if !self.image.key_valid {
            self.image.flush();
            self.go(ProtocolState::Rejected);
            return Ok(RestoreResult {
                outcome: RestoreOutcome::Rejected(RejectReason::InvalidKey),
                cycles,
            });
        }

        let challenge = Challenge(
            self.image
                .challenge_store
                .clone()
                .ok_or(ProtocolError::MissingImage("challenge"))?,
        );
        let positions = self
            .image
            .key_positions
            .clone()
            .ok_or(ProtocolError::MissingImage("key positions"))?;

        self.go(ProtocolState::RestorePufPass1);
        self.go(ProtocolState::RestorePufPass2);
        let samples: Vec<Bits> = (0..self.cfg.key.samples)
            .map(|_| self.effective_response(&challenge).map(|r| r.0))
            .collect::<Result<_, _>>()?;
        for (phase, v) in puf_cycles(&self.cfg.chip_layout, self.cfg.key.samples) {
            cycles.insert(phase, v);
        }

        // All samples must agree at every stored key position; any
        // disagreement means the key cannot be regenerated faithfully.
        let mut key_bits = Bits::default();
        let mut agree = true;
        for k in 0..self.cfg.key.response_bits {
            if positions.get(k) {
                let first = samples[0].get(k);
                if samples.iter().any(|s| s.get(k) != first) {
                    agree = false;
                    break;
                }
                key_bits.push(first);
            }
        }
        if !agree || key_bits.len() != self.cfg.key.key_bits {
            self.image.flush();
            self.go(ProtocolState::Rejected);
            return Ok(RestoreResult {
                outcome: RestoreOutcome::Rejected(RejectReason::InvalidKey),
                cycles,
            });
        }
        let key = Key {
            bits: key_bits,
            valid: true,
        };

        let cipher = nvm::read_bits(
            &self.chip,
            &self.cfg.nvm_layout.data,
            self.cfg.key.key_bits,
            &self.cfg.variation,
            self.ctx.temperature_k,
        )?;
        cycles.insert(CyclePhase::RramRead, self.cfg.key.key_bits as f64);
        self.go(ProtocolState::RestoreDecrypt);
        self.decrypt_invocations += 1;
        let data = otp::decrypt(&cipher, &key)?;
        self.go(ProtocolState::Restored);
        Ok(RestoreResult {
            outcome: RestoreOutcome::Restored(data),
            cycles,
        })
    }

    /// Force the machine into PoweredDown from Idle (a power failure with
    /// nothing staged).
    fn power_fail(&mut self) {
        self.go(ProtocolState::PoweredDown);
    }
}

/// Events accepted by the trace runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// Stage plaintext for the next backup.
    SetData { bits: Bits },
    Power(PowerEvent),
    /// Attacker flips the digital value of one data cell while powered down.
    TamperDataCell { index: usize },
}

/// One line of the replayed-trace log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub event: String,
    pub from_state: ProtocolState,
    pub to_state: ProtocolState,
    pub detail: String,
    pub cycles: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
    pub final_state: ProtocolState,
    pub total_cycles: f64,
}

/// Replay a power/data trace through the state machine, logging every
/// transition and cycle cost.
pub fn run_power_trace(
    system: &mut SecureSystem,
    events: &[TraceEvent],
) -> Result<TraceLog, ProtocolError> {
    use rand::Rng;
    let mut records = Vec::new();
    let mut staged: Option<Bits> = None;
    let mut total_cycles = 0.0;
    for (step, ev) in events.iter().enumerate() {
        let from = system.state();
        let detail: String;
        let mut cycles = 0.0;
        match ev {
            TraceEvent::SetData { bits } => {
                if from != ProtocolState::Idle {
                    return Err(ProtocolError::MalformedTrace {
                        step,
                        reason: "data can only be staged while the processor runs",
                    });
                }
                staged = Some(bits.clone());
                detail = format!("staged {} bits", bits.len());
            }
            TraceEvent::Power(PowerEvent::LowPowerWarning) => match from {
                ProtocolState::Idle => {
                    let data = staged.clone().ok_or(ProtocolError::MalformedTrace {
                        step,
                        reason: "low-power warning with no staged data",
                    })?;
                    let report = system.secure_backup(&data)?;
                    cycles = cycle_cost(&report.cycles);
                    detail = format!(
                        "backup key_valid={} x={}",
                        report.key_valid, report.discarded_bits
                    );
                }
                // A second warning while already powered down is ignored.
                ProtocolState::PoweredDown => detail = "ignored (already powered down)".into(),
                _ => detail = "ignored".into(),
            },
            TraceEvent::Power(PowerEvent::PowerFail) => match from {
                ProtocolState::Idle => {
                    // No warning was raised first: nothing was backed up.
                    system.power_fail();
                    detail = "power failed without backup".into();
                }
                ProtocolState::PoweredDown => detail = "already powered down".into(),
                _ => detail = "ignored".into(),
            },
            TraceEvent::Power(PowerEvent::PowerRestored { available_power }) => match from {
                ProtocolState::PoweredDown => match system.secure_restore(*available_power) {
                    Ok(result) => {
                        cycles = cycle_cost(&result.cycles);
                        detail = match &result.outcome {
                            RestoreOutcome::Restored(_) => "restored".into(),
                            RestoreOutcome::Rejected(r) => format!("rejected {r:?}"),
                        };
                        system.acknowledge_outcome();
                    }
                    Err(ProtocolError::PowerBelowThreshold { .. }) => {
                        detail = "waiting (power below threshold)".into();
                    }
                    Err(e) => return Err(e),
                },
                _ => detail = "ignored".into(),
            },
            TraceEvent::TamperDataCell { index } => {
                if from != ProtocolState::PoweredDown {
                    return Err(ProtocolError::MalformedTrace {
                        step,
                        reason: "tampering happens while powered down",
                    });
                }
                let range = system.cfg.nvm_layout.data;
                if *index >= range.len {
                    return Err(ProtocolError::MalformedTrace {
                        step,
                        reason: "tamper index outside the data region",
                    });
                }
                let cell = range.start + index;
                let target = !system.chip.nvm.cell(cell).state.to_bit();
                let spec = system.cfg.variation;
                let attacker_seed = system.ctx.rng.gen();
                let mut attacker = system.attacker_context(attacker_seed);
                system.chip.nvm.cell_mut(cell).write(
                    crate::device::MemristorState::from_bit(target),
                    &spec,
                    &mut attacker,
                );
                detail = format!("flipped data cell {index}");
            }
        }
        total_cycles += cycles;
        let to = system.state();
        records.push(TraceRecord {
            step,
            event: format!("{ev:?}"),
            from_state: from,
            to_state: to,
            detail,
            cycles,
        });
    }
    Ok(TraceLog {
        final_state: system.state(),
        records,
        total_cycles,
    })
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("operation requires state {expected}, machine is in {got:?}")]
    WrongState {
        expected: &'static str,
        got: ProtocolState,
    },
    #[error("available power {available} below threshold {threshold}")]
    PowerBelowThreshold { available: f64, threshold: f64 },
    #[error("invalid system configuration: {0}")]
    BadConfig(&'static str),
    #[error("image is missing its {0}")]
    MissingImage(&'static str),
    #[error("malformed trace at step {step}: {reason}")]
    MalformedTrace { step: usize, reason: &'static str },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Otp(#[from] OtpError),
    #[error(transparent)]
    Nvm(#[from] NvmError),
    #[error(transparent)]
    Tag(#[from] TagError),
}
