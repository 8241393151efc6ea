//! Experiment configuration, loaded from JSON. Every field has a
//! calibrated default, so the empty object `{}` runs the paper-scale
//! campaigns; the master seed comes from the file or the CLI flag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{ChipLayout, VariationSpec};
use crate::nvm::NvmLayout;
use crate::protocol::SystemConfig;
use crate::puf::MitigationConfig;
use crate::reliability::KeyExtractionParams;
use crate::tag::TagConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; mandatory for reproducible runs (may instead come from
    /// the CLI `--seed` flag, which takes precedence).
    pub seed: Option<u64>,
    pub variation: VariationSpec,
    pub chip_layout: ChipLayout,
    pub nvm_layout: NvmLayout,
    pub tag: TagConfig,
    pub key: KeyExtractionParams,
    pub screening_samples: usize,
    pub power_threshold: f64,
    pub voting: VotingCampaign,
    pub puf_metrics: PufMetricsCampaign,
    pub tag_metrics: TagMetricsCampaign,
    pub clean_bits: CleanBitsCampaign,
    pub spoofing: SpoofingCampaign,
    pub model_attack: ModelAttackCampaign,
    pub protocol: ProtocolCampaign,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            variation: VariationSpec::default(),
            chip_layout: ChipLayout::default(),
            nvm_layout: NvmLayout::default(),
            tag: TagConfig::default(),
            key: KeyExtractionParams::default(),
            screening_samples: 256,
            power_threshold: 1.0,
            voting: VotingCampaign::default(),
            puf_metrics: PufMetricsCampaign::default(),
            tag_metrics: TagMetricsCampaign::default(),
            clean_bits: CleanBitsCampaign::default(),
            spoofing: SpoofingCampaign::default(),
            model_attack: ModelAttackCampaign::default(),
            protocol: ProtocolCampaign::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.variation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.chip_layout
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.nvm_layout
            .validate(self.chip_layout.nvm_cells())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.tag
            .validate(self.chip_layout.nvm_cols)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.key
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let counts = [
            self.voting.trials as usize,
            self.puf_metrics.uniqueness_chips,
            self.puf_metrics.challenges,
            self.puf_metrics.reliability_chips,
            self.puf_metrics.reliability_cycles,
            self.tag_metrics.trials,
            self.clean_bits.chips,
            self.clean_bits.challenges_per_chip,
            self.spoofing.campaigns as usize,
            self.model_attack.crps,
            self.protocol.roundtrip_trials,
            self.protocol.tamper_trials,
        ];
        if counts.iter().any(|&c| c == 0) {
            return Err(ConfigError::Invalid("all trial counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolve the master seed from the CLI flag or the file.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, ConfigError> {
        flag.or(self.seed).ok_or(ConfigError::MissingSeed)
    }

    /// System configuration for protocol-level campaigns.
    pub fn system(&self, mitigations: MitigationConfig) -> SystemConfig {
        SystemConfig {
            variation: self.variation,
            chip_layout: self.chip_layout,
            nvm_layout: self.nvm_layout,
            tag: self.tag,
            key: self.key,
            screening_samples: self.screening_samples,
            mitigations,
            power_threshold: self.power_threshold,
            temperature_k: self.variation.temp_k,
        }
    }
}

/// Voting-curve sweep (the two reliability-enhancement figures).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VotingCampaign {
    pub sample_counts: Vec<u32>,
    /// p grid: 0..=1 in steps of `p_step`.
    pub p_step: f64,
    pub trials: u64,
}

impl Default for VotingCampaign {
    fn default() -> Self {
        VotingCampaign {
            sample_counts: vec![1, 2, 4, 8, 16],
            p_step: 0.01,
            trials: 100_000,
        }
    }
}

/// PUF metric campaign sizes (uniqueness/bit-aliasing over many chips,
/// uniformity/diffuseness across challenges, reliability over cycles).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PufMetricsCampaign {
    pub uniqueness_chips: usize,
    pub challenges: usize,
    pub reliability_chips: usize,
    pub reliability_challenges: usize,
    pub reliability_cycles: usize,
    pub delta_t_k: f64,
}

impl Default for PufMetricsCampaign {
    fn default() -> Self {
        PufMetricsCampaign {
            uniqueness_chips: 500,
            challenges: 25,
            reliability_chips: 25,
            reliability_challenges: 25,
            reliability_cycles: 500,
            delta_t_k: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagMetricsCampaign {
    pub tag_sizes: Vec<usize>,
    pub trials: usize,
}

impl Default for TagMetricsCampaign {
    fn default() -> Self {
        TagMetricsCampaign {
            tag_sizes: vec![6, 8],
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanBitsCampaign {
    pub chips: usize,
    pub challenges_per_chip: usize,
    pub sigma_c2c_sweep: Vec<f64>,
    pub delta_t_k: f64,
    /// Challenges plotted in the per-bit flip-probability histograms.
    pub histogram_challenges: usize,
    pub histogram_cycles: usize,
}

impl Default for CleanBitsCampaign {
    fn default() -> Self {
        CleanBitsCampaign {
            chips: 50,
            challenges_per_chip: 20,
            sigma_c2c_sweep: vec![0.02, 0.05, 0.10],
            delta_t_k: 50.0,
            histogram_challenges: 10,
            histogram_cycles: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpoofingCampaign {
    pub probe_counts: Vec<u64>,
    pub campaigns: u64,
}

impl Default for SpoofingCampaign {
    fn default() -> Self {
        SpoofingCampaign {
            probe_counts: vec![1, 16, 256],
            campaigns: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelAttackCampaign {
    pub crps: usize,
}

impl Default for ModelAttackCampaign {
    fn default() -> Self {
        ModelAttackCampaign { crps: 5000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolCampaign {
    pub roundtrip_trials: usize,
    pub tamper_trials: usize,
}

impl Default for ProtocolCampaign {
    fn default() -> Self {
        ProtocolCampaign {
            roundtrip_trials: 1000,
            tamper_trials: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("a master seed is required (config `seed` or --seed)")]
    MissingSeed,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_calibrated_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg.variation.sigma_process, 1.9);
        assert_eq!(cfg.puf_metrics.uniqueness_chips, 500);
        assert!(cfg.resolve_seed(None).is_err());
        assert_eq!(cfg.resolve_seed(Some(7)).unwrap(), 7);
    }

    #[test]
    fn variation_keys_match_the_external_schema() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 3, "variation": {"hrs_ohm": 2e6, "lrs_ohm": 2e4,
                "sigma_process": 1.5, "sigma_c2c": 0.05,
                "temp_coeff_per_k": 0.001, "temp_k": 300.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.variation.hrs_ohm, 2e6);
        assert_eq!(cfg.resolve_seed(None).unwrap(), 3);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"unknown_field": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"variation": {"hrs_ohm": 1.0, "lrs_ohm": 2.0,
                "sigma_process": 0.1, "sigma_c2c": 0.1,
                "temp_coeff_per_k": 0.0, "temp_k": 300.0}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(r#"{"tag_metrics": {"trials": 0}}"#).is_err());
    }
}
