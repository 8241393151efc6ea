//! Deterministic experiment campaigns: every function is a pure function of
//! (config, master seed) producing typed results plus CSV/JSON bytes.
//! Trials parallelize over rayon with per-trial derived seeds and are merged
//! in trial order, so the output bytes do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{self, Learner};
use crate::bits::Bits;
use crate::config::ExperimentConfig;
use crate::device::{sample_chip, CycleContext, VariationSpec};
use crate::metrics::{self, TagMetrics};
use crate::protocol::{
    cycle_cost, RejectReason, RestoreOutcome, SecureSystem, TraceEvent, TraceLog,
};
use crate::puf::{self, Challenge, MitigationConfig, Response};
use crate::reliability::{self, VotingScheme};
use crate::seed::{self, tags};
use crate::tag;
use crate::trng::RandomSource;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Device(#[from] crate::device::DeviceError),
    #[error(transparent)]
    Puf(#[from] crate::puf::PufError),
    #[error(transparent)]
    Voting(#[from] crate::reliability::VotingError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Tag(#[from] crate::tag::TagError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Attack(#[from] crate::attacks::AttackError),
    #[error(transparent)]
    Extract(#[from] crate::reliability::ExtractError),
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// voting-curves

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VotingCurveRow {
    pub p: f64,
    pub n: u32,
    pub scheme: VotingScheme,
    pub analytic: f64,
    pub empirical: f64,
}

pub fn voting_curves(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Vec<VotingCurveRow>, CampaignError> {
    let steps = (1.0 / cfg.voting.p_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * cfg.voting.p_step).collect();
    let mut jobs = Vec::new();
    for &n in &cfg.voting.sample_counts {
        for &p in &grid {
            jobs.push((p.min(1.0), n, VotingScheme::AllAgree));
            if n % 2 == 1 {
                jobs.push((p.min(1.0), n, VotingScheme::Majority));
            }
        }
    }
    let trials = cfg.voting.trials;
    jobs.into_par_iter()
        .map(|(p, n, scheme)| {
            let analytic = match scheme {
                VotingScheme::AllAgree => reliability::all_agree_undetected_prob(p, n)?,
                VotingScheme::Majority => reliability::majority_correct_prob(p, n)?,
            };
            let empirical = reliability::simulate_voting(
                p,
                n,
                scheme,
                trials,
                seed::derive_seed(master_seed, &[tags::TRIAL, n as u64, p.to_bits()]),
            )?;
            Ok(VotingCurveRow {
                p,
                n,
                scheme,
                analytic,
                empirical,
            })
        })
        .collect()
}

pub fn voting_curves_csv(rows: &[VotingCurveRow]) -> String {
    let mut out = String::from("p,n,scheme,analytic,empirical\n");
    for r in rows {
        let scheme = match r.scheme {
            VotingScheme::AllAgree => "all_agree",
            VotingScheme::Majority => "majority",
        };
        out.push_str(&format!(
            "{},{},{scheme},{},{}\n",
            fmt(r.p),
            r.n,
            fmt(r.analytic),
            fmt(r.empirical)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// puf-metrics

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PufMetricsResult {
    pub uniqueness_per_challenge: Vec<f64>,
    /// Per bit, averaged over the challenge set.
    pub bit_aliasing_per_bit: Vec<f64>,
    pub uniformity_per_chip: Vec<f64>,
    pub diffuseness_per_chip: Vec<f64>,
    pub reliability_per_chip_challenge: Vec<f64>,
    pub steadiness_per_chip_challenge: Vec<f64>,
}

fn shared_challenges(cfg: &ExperimentConfig, master_seed: u64, count: usize) -> Vec<Challenge> {
    let mut src = RandomSource::seeded(seed::derive_seed(master_seed, &[tags::TRNG]));
    (0..count)
        .map(|_| Challenge(src.next_bits(cfg.chip_layout.challenge_bits)))
        .collect()
}

fn chip_responses(
    cfg: &ExperimentConfig,
    master_seed: u64,
    chip_idx: u64,
    challenges: &[Challenge],
) -> Result<Vec<Response>, CampaignError> {
    let mut chip = sample_chip(
        &cfg.variation,
        &cfg.chip_layout,
        seed::derive_seed(master_seed, &[tags::CHIP, chip_idx]),
    )?;
    let mut ctx = CycleContext::with_rng(
        cfg.variation.temp_k,
        seed::derive_rng(master_seed, &[tags::CYCLE, chip_idx]),
    );
    challenges
        .iter()
        .map(|ch| Ok(puf::generate_response(&mut chip, ch, &cfg.variation, &mut ctx)?))
        .collect()
}

pub fn puf_metrics(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<PufMetricsResult, CampaignError> {
    let pm = &cfg.puf_metrics;
    let challenges = shared_challenges(cfg, master_seed, pm.challenges);

    // Cross-chip campaign: uniqueness + bit-aliasing + uniformity +
    // diffuseness over `uniqueness_chips` chips.
    let per_chip: Vec<Vec<Response>> = (0..pm.uniqueness_chips as u64)
        .into_par_iter()
        .map(|i| chip_responses(cfg, master_seed, i, &challenges))
        .collect::<Result<_, _>>()?;

    let uniqueness_per_challenge: Vec<f64> = (0..pm.challenges)
        .into_par_iter()
        .map(|c| {
            let responses: Vec<Response> =
                per_chip.iter().map(|chip| chip[c].clone()).collect();
            metrics::uniqueness(&responses)
        })
        .collect();

    let width = cfg.chip_layout.response_bits();
    let mut bit_aliasing_per_bit = vec![0.0; width];
    for c in 0..pm.challenges {
        let responses: Vec<Response> = per_chip.iter().map(|chip| chip[c].clone()).collect();
        for (k, v) in metrics::bit_aliasing(&responses).into_iter().enumerate() {
            bit_aliasing_per_bit[k] += v;
        }
    }
    for v in &mut bit_aliasing_per_bit {
        *v /= pm.challenges as f64;
    }

    let uniformity_per_chip: Vec<f64> = per_chip
        .iter()
        .map(|rs| rs.iter().map(metrics::uniformity).sum::<f64>() / rs.len() as f64)
        .collect();
    let diffuseness_per_chip: Vec<f64> = per_chip
        .iter()
        .map(|rs| metrics::diffuseness(rs))
        .collect();

    // Intra-chip campaign: reliability + steadiness over cycles, with the
    // temperature alternating between ambient and ambient + delta_t.
    let jobs: Vec<(u64, usize)> = (0..pm.reliability_chips as u64)
        .flat_map(|chip| (0..pm.reliability_challenges).map(move |ch| (chip, ch)))
        .collect();
    let rel_challenges = shared_challenges(cfg, master_seed ^ 0x5A5A, pm.reliability_challenges);
    let cycles = pm.reliability_cycles;
    let delta_t = pm.delta_t_k;
    let rel_steady: Vec<(f64, f64)> = jobs
        .into_par_iter()
        .map(|(chip_idx, ch_idx)| {
            let mut chip = sample_chip(
                &cfg.variation,
                &cfg.chip_layout,
                seed::derive_seed(master_seed, &[tags::CHIP, 1_000_000 + chip_idx]),
            )?;
            let mut ctx = CycleContext::with_rng(
                cfg.variation.temp_k,
                seed::derive_rng(master_seed, &[tags::CYCLE, chip_idx, ch_idx as u64]),
            );
            let ch = &rel_challenges[ch_idx];
            let mut responses = Vec::with_capacity(cycles);
            for t in 0..cycles {
                ctx.temperature_k = cfg.variation.temp_k + if t % 2 == 1 { delta_t } else { 0.0 };
                responses.push(puf::generate_response(
                    &mut chip,
                    ch,
                    &cfg.variation,
                    &mut ctx,
                )?);
            }
            Ok((
                metrics::reliability(&responses)?,
                metrics::steadiness(&responses)?,
            ))
        })
        .collect::<Result<_, CampaignError>>()?;

    Ok(PufMetricsResult {
        uniqueness_per_challenge,
        bit_aliasing_per_bit,
        uniformity_per_chip,
        diffuseness_per_chip,
        reliability_per_chip_challenge: rel_steady.iter().map(|x| x.0).collect(),
        steadiness_per_chip_challenge: rel_steady.iter().map(|x| x.1).collect(),
    })
}

pub fn puf_metrics_csv(r: &PufMetricsResult) -> String {
    let mut out = String::from("metric,unit,value\n");
    let mut emit = |name: &str, prefix: &str, values: &[f64]| {
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("{name},{prefix}{i:04},{}\n", fmt(*v)));
        }
        let rep = metrics::MetricReport::summarize(name, values.to_vec());
        out.push_str(&format!("{name},mean,{}\n", fmt(rep.mean)));
        out.push_str(&format!("{name},min,{}\n", fmt(rep.min)));
        out.push_str(&format!("{name},max,{}\n", fmt(rep.max)));
    };
    emit("uniqueness", "challenge_", &r.uniqueness_per_challenge);
    emit("bit_aliasing", "bit_", &r.bit_aliasing_per_bit);
    emit("uniformity", "chip_", &r.uniformity_per_chip);
    emit("diffuseness", "chip_", &r.diffuseness_per_chip);
    emit(
        "reliability",
        "chip_challenge_",
        &r.reliability_per_chip_challenge,
    );
    emit(
        "steadiness",
        "chip_challenge_",
        &r.steadiness_per_chip_challenge,
    );
    out
}

// ---------------------------------------------------------------------------
// tag-metrics

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagMetricsRow {
    pub tag_size: usize,
    pub metrics: TagMetrics,
}

pub fn tag_metrics_campaign(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Vec<TagMetricsRow>, CampaignError> {
    cfg.tag_metrics
        .tag_sizes
        .par_iter()
        .map(|&tag_size| {
            let tag_cfg = crate::tag::TagConfig {
                tag_bits: tag_size,
                ..cfg.tag
            };
            let mut chip = sample_chip(
                &cfg.variation,
                &cfg.chip_layout,
                seed::derive_seed(master_seed, &[tags::CHIP, tag_size as u64]),
            )?;
            let mut ctx = CycleContext::with_rng(
                cfg.variation.temp_k,
                seed::derive_rng(master_seed, &[tags::TAG_CAL, tag_size as u64]),
            );
            let calib =
                tag::provision_tag_calibration(&mut chip, &tag_cfg, &cfg.variation, &mut ctx)?;
            let m = metrics::tag_metrics(
                &mut chip,
                &calib,
                &tag_cfg,
                &cfg.variation,
                cfg.tag_metrics.trials,
                &mut ctx,
            )?;
            Ok(TagMetricsRow {
                tag_size,
                metrics: m,
            })
        })
        .collect()
}

pub fn tag_metrics_csv(rows: &[TagMetricsRow]) -> String {
    let mut out = String::from("tag_size,uniformity,avalanche,diffusion\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.tag_size,
            fmt(r.metrics.uniformity),
            fmt(r.metrics.avalanche),
            fmt(r.metrics.diffusion)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// clean-bits

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanBitsVariationRow {
    pub sigma_c2c: f64,
    /// Mean positions scanned to assemble 16 clean bits (16 + x).
    pub mean_bits_consumed: f64,
    pub mean_extra_bits: f64,
    /// Mean count of two-sample-agreeing positions per 32-bit response.
    pub mean_clean_bits_per_response: f64,
    pub aborted_extractions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlipHistogramRow {
    pub sigma_c2c: f64,
    pub challenge: usize,
    pub bit: usize,
    pub flip_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanBitsResult {
    pub per_variation: Vec<CleanBitsVariationRow>,
    pub histograms: Vec<FlipHistogramRow>,
}

pub fn clean_bits(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<CleanBitsResult, CampaignError> {
    let cb = &cfg.clean_bits;
    let mut per_variation = Vec::new();
    for (vi, &sigma) in cb.sigma_c2c_sweep.iter().enumerate() {
        let spec = VariationSpec {
            sigma_c2c: sigma,
            ..cfg.variation
        };
        let stats: Vec<(f64, f64, usize)> = (0..cb.chips as u64)
            .into_par_iter()
            .map(|chip_idx| {
                let mut chip = sample_chip(
                    &spec,
                    &cfg.chip_layout,
                    seed::derive_seed(master_seed, &[tags::CHIP, vi as u64, chip_idx]),
                )?;
                let mut ctx = CycleContext::with_rng(
                    spec.temp_k,
                    seed::derive_rng(master_seed, &[tags::CYCLE, vi as u64, chip_idx]),
                );
                let mut src = RandomSource::seeded(seed::derive_seed(
                    master_seed,
                    &[tags::TRNG, vi as u64, chip_idx],
                ));
                let mut consumed = 0.0;
                let mut clean = 0.0;
                let mut aborted = 0usize;
                for _ in 0..cb.challenges_per_chip {
                    let ch = Challenge(src.next_bits(cfg.chip_layout.challenge_bits));
                    // Two passes, the second at the shifted temperature.
                    ctx.temperature_k = spec.temp_k;
                    let r1 = puf::generate_response(&mut chip, &ch, &spec, &mut ctx)?;
                    ctx.temperature_k = spec.temp_k + cb.delta_t_k;
                    let r2 = puf::generate_response(&mut chip, &ch, &spec, &mut ctx)?;
                    let ext = reliability::extract_key(
                        &[r1.0.clone(), r2.0.clone()],
                        None,
                        &cfg.key,
                    )?;
                    clean += (cfg.chip_layout.response_bits() - r1.0.hamming(&r2.0)) as f64;
                    if ext.key.valid {
                        consumed += (cfg.key.key_bits + ext.discarded) as f64;
                    } else {
                        aborted += 1;
                        consumed += cfg.chip_layout.response_bits() as f64;
                    }
                }
                let n = cb.challenges_per_chip as f64;
                Ok((consumed / n, clean / n, aborted))
            })
            .collect::<Result<_, CampaignError>>()?;
        let n = stats.len() as f64;
        let mean_consumed = stats.iter().map(|s| s.0).sum::<f64>() / n;
        let mean_clean = stats.iter().map(|s| s.1).sum::<f64>() / n;
        per_variation.push(CleanBitsVariationRow {
            sigma_c2c: sigma,
            mean_bits_consumed: mean_consumed,
            mean_extra_bits: mean_consumed - cfg.key.key_bits as f64,
            mean_clean_bits_per_response: mean_clean,
            aborted_extractions: stats.iter().map(|s| s.2).sum(),
        });
    }

    // Per-bit flip-probability histograms: one chip, several challenges,
    // many cycles, at the last sweep point.
    let mut histograms = Vec::new();
    if let Some(&sigma) = cb.sigma_c2c_sweep.last() {
        let spec = VariationSpec {
            sigma_c2c: sigma,
            ..cfg.variation
        };
        let width = cfg.chip_layout.response_bits();
        let rows: Vec<Vec<f64>> = (0..cb.histogram_challenges as u64)
            .into_par_iter()
            .map(|ch_idx| {
                let mut chip = sample_chip(
                    &spec,
                    &cfg.chip_layout,
                    seed::derive_seed(master_seed, &[tags::CHIP, 77, 0]),
                )?;
                let mut ctx = CycleContext::with_rng(
                    spec.temp_k,
                    seed::derive_rng(master_seed, &[tags::CYCLE, 77, ch_idx]),
                );
                let mut src = RandomSource::seeded(seed::derive_seed(
                    master_seed,
                    &[tags::TRNG, 77, ch_idx],
                ));
                let ch = Challenge(src.next_bits(cfg.chip_layout.challenge_bits));
                let mut responses = Vec::with_capacity(cb.histogram_cycles);
                for t in 0..cb.histogram_cycles {
                    ctx.temperature_k =
                        spec.temp_k + if t % 2 == 1 { cb.delta_t_k } else { 0.0 };
                    responses.push(puf::generate_response(&mut chip, &ch, &spec, &mut ctx)?);
                }
                let reference = metrics::majority_response(&responses);
                let mut flips = vec![0.0f64; width];
                for r in &responses {
                    for (k, f) in flips.iter_mut().enumerate() {
                        if r.0.get(k) != reference.0.get(k) {
                            *f += 1.0;
                        }
                    }
                }
                for f in &mut flips {
                    *f /= responses.len() as f64;
                }
                Ok(flips)
            })
            .collect::<Result<_, CampaignError>>()?;
        for (c, flips) in rows.into_iter().enumerate() {
            for (b, f) in flips.into_iter().enumerate() {
                histograms.push(FlipHistogramRow {
                    sigma_c2c: sigma,
                    challenge: c,
                    bit: b,
                    flip_probability: f,
                });
            }
        }
    }
    Ok(CleanBitsResult {
        per_variation,
        histograms,
    })
}

pub fn clean_bits_csv(r: &CleanBitsResult) -> String {
    let mut out = String::from(
        "sigma_c2c,mean_bits_consumed,mean_extra_bits,mean_clean_bits_per_response,aborted\n",
    );
    for row in &r.per_variation {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(row.sigma_c2c),
            fmt(row.mean_bits_consumed),
            fmt(row.mean_extra_bits),
            fmt(row.mean_clean_bits_per_response),
            row.aborted_extractions
        ));
    }
    out
}

pub fn flip_histogram_csv(r: &CleanBitsResult) -> String {
    let mut out = String::from("sigma_c2c,challenge,bit,flip_probability\n");
    for row in &r.histograms {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(row.sigma_c2c),
            row.challenge,
            row.bit,
            fmt(row.flip_probability)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// spoof-curve

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpoofCurveRow {
    pub probes: u64,
    pub timestamp_refresh: bool,
    pub analytic: f64,
    pub empirical: f64,
    pub campaigns: u64,
}

pub fn spoof_curve(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Vec<SpoofCurveRow>, CampaignError> {
    let sys_cfg = cfg.system(MitigationConfig::disabled());
    let mut jobs: Vec<(u64, bool)> = cfg
        .spoofing
        .probe_counts
        .iter()
        .map(|&k| (k, false))
        .collect();
    if let Some(&k) = cfg.spoofing.probe_counts.iter().max() {
        jobs.push((k, true));
    }
    jobs.into_par_iter()
        .map(|(probes, refresh)| {
            let outcome = attacks::run_spoofing(
                &sys_cfg,
                probes,
                cfg.spoofing.campaigns,
                refresh,
                seed::derive_seed(master_seed, &[tags::ATTACK, probes, refresh as u64]),
            )?;
            let analytic = if refresh {
                attacks::spoofing_success_prob(cfg.tag.tag_bits as u32, 1)
            } else {
                attacks::spoofing_success_prob(cfg.tag.tag_bits as u32, probes)
            };
            Ok(SpoofCurveRow {
                probes,
                timestamp_refresh: refresh,
                analytic,
                empirical: outcome.probability(),
                campaigns: outcome.trials,
            })
        })
        .collect()
}

pub fn spoof_curve_csv(rows: &[SpoofCurveRow]) -> String {
    let mut out = String::from("probes,timestamp_refresh,analytic,empirical,campaigns\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.probes,
            r.timestamp_refresh,
            fmt(r.analytic),
            fmt(r.empirical),
            r.campaigns
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// model-attack

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelAttackRow {
    pub mitigations: bool,
    pub learner: Learner,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub fn model_attack(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Vec<ModelAttackRow>, CampaignError> {
    let arms: Vec<(bool, MitigationConfig)> = vec![
        (false, MitigationConfig::disabled()),
        (
            true,
            MitigationConfig::full(cfg.chip_layout.response_bits_per_block),
        ),
    ];
    let mut rows = Vec::new();
    for (mitigated, mit) in arms {
        let ds = attacks::harvest_crps(
            &cfg.variation,
            &cfg.chip_layout,
            &mit,
            cfg.model_attack.crps,
            seed::derive_seed(master_seed, &[tags::CHIP]),
        )?;
        for learner in [Learner::LogisticRegression, Learner::Perceptron] {
            let (train, test) = attacks::train_model(&ds, learner)?;
            rows.push(ModelAttackRow {
                mitigations: mitigated,
                learner,
                train_accuracy: train,
                test_accuracy: test,
            });
        }
    }
    Ok(rows)
}

pub fn model_attack_csv(rows: &[ModelAttackRow]) -> String {
    let mut out = String::from("mitigations,learner,train_accuracy,test_accuracy\n");
    for r in rows {
        let learner = match r.learner {
            Learner::LogisticRegression => "logistic_regression",
            Learner::Perceptron => "perceptron",
        };
        out.push_str(&format!(
            "{},{learner},{},{}\n",
            r.mitigations,
            fmt(r.train_accuracy),
            fmt(r.test_accuracy)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// protocol round-trip statistics

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoundTripStats {
    pub trials: usize,
    pub restored_correct: usize,
    /// Restores that returned data different from the original (silent
    /// wrong restores: the tag passed, the regenerated key differed).
    pub restored_wrong: usize,
    pub rejected_invalid_key: usize,
    pub rejected_tag_mismatch: usize,
    pub backup_aborts: usize,
    /// Backups observed with zero discarded bits, and their cycle cost.
    pub x0_backups: usize,
    pub x0_backup_cycles: f64,
    /// Mean cycles of restores that completed (rejections cost only the
    /// phases they reached).
    pub completed_restore_cycles: f64,
    pub mean_discarded_bits: f64,
}

/// No-tamper round trips at the configured spec.
pub fn protocol_roundtrip(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<RoundTripStats, CampaignError> {
    let sys_cfg = cfg.system(MitigationConfig::disabled());
    let trials = cfg.protocol.roundtrip_trials;
    let per_trial: Vec<RoundTripStats> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut stats = RoundTripStats {
                trials: 1,
                ..Default::default()
            };
            let mut sys = SecureSystem::new(
                sys_cfg.clone(),
                seed::derive_seed(master_seed, &[tags::TRIAL, t]),
            )?;
            let data = Bits::random(
                &mut seed::derive_rng(master_seed, &[tags::DATA, t]),
                sys_cfg.key.key_bits,
            );
            let report = sys.secure_backup(&data)?;
            stats.mean_discarded_bits = report.discarded_bits as f64;
            if !report.key_valid {
                stats.backup_aborts = 1;
                return Ok(stats);
            }
            if report.discarded_bits == 0 {
                stats.x0_backups = 1;
                stats.x0_backup_cycles = cycle_cost(&report.cycles);
            }
            let result = sys.secure_restore(f64::INFINITY)?;
            if matches!(result.outcome, RestoreOutcome::Restored(_)) {
                stats.completed_restore_cycles = cycle_cost(&result.cycles);
            }
            match result.outcome {
                RestoreOutcome::Restored(bits) if bits == data => stats.restored_correct = 1,
                RestoreOutcome::Restored(_) => stats.restored_wrong = 1,
                RestoreOutcome::Rejected(RejectReason::InvalidKey) => {
                    stats.rejected_invalid_key = 1
                }
                RestoreOutcome::Rejected(RejectReason::TagMismatch) => {
                    stats.rejected_tag_mismatch = 1
                }
            }
            Ok(stats)
        })
        .collect::<Result<_, CampaignError>>()?;
    let mut total = RoundTripStats::default();
    let mut restore_cycles_sum = 0.0;
    let mut restores = 0usize;
    for s in &per_trial {
        total.trials += s.trials;
        total.restored_correct += s.restored_correct;
        total.restored_wrong += s.restored_wrong;
        total.rejected_invalid_key += s.rejected_invalid_key;
        total.rejected_tag_mismatch += s.rejected_tag_mismatch;
        total.backup_aborts += s.backup_aborts;
        total.x0_backups += s.x0_backups;
        total.x0_backup_cycles = total.x0_backup_cycles.max(s.x0_backup_cycles);
        if s.completed_restore_cycles > 0.0 {
            restore_cycles_sum += s.completed_restore_cycles;
            restores += 1;
        }
        total.mean_discarded_bits += s.mean_discarded_bits;
    }
    total.completed_restore_cycles = if restores > 0 {
        restore_cycles_sum / restores as f64
    } else {
        0.0
    };
    total.mean_discarded_bits /= trials.max(1) as f64;
    Ok(total)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TamperStats {
    pub trials: usize,
    pub rejected: usize,
    /// Tampered images that still verified and restored.
    pub undetected: usize,
}

/// Single-cell tamper while powered down, then restore.
pub fn tamper_detection(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<TamperStats, CampaignError> {
    let sys_cfg = cfg.system(MitigationConfig::disabled());
    let trials = cfg.protocol.tamper_trials;
    let per_trial: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut sys = SecureSystem::new(
                sys_cfg.clone(),
                seed::derive_seed(master_seed, &[tags::TRIAL, 50_000 + t]),
            )?;
            let mut data_rng = seed::derive_rng(master_seed, &[tags::DATA, 50_000 + t]);
            let data = Bits::random(&mut data_rng, sys_cfg.key.key_bits);
            let report = sys.secure_backup(&data)?;
            if !report.key_valid {
                return Ok((false, false));
            }
            use rand::Rng;
            let mut attacker = seed::derive_rng(master_seed, &[tags::ATTACK, t]);
            let idx = attacker.gen_range(0..sys_cfg.nvm_layout.data.len);
            let log = crate::protocol::run_power_trace(
                &mut sys,
                &[TraceEvent::TamperDataCell { index: idx }],
            )?;
            debug_assert_eq!(log.records.len(), 1);
            let result = sys.secure_restore(f64::INFINITY)?;
            match result.outcome {
                RestoreOutcome::Rejected(_) => Ok((true, false)),
                RestoreOutcome::Restored(_) => Ok((false, true)),
            }
        })
        .collect::<Result<_, CampaignError>>()?;
    let mut stats = TamperStats {
        trials,
        ..Default::default()
    };
    for (rejected, undetected) in per_trial {
        stats.rejected += rejected as usize;
        stats.undetected += undetected as usize;
    }
    Ok(stats)
}

pub fn protocol_stats_csv(rt: &RoundTripStats, tamper: &TamperStats) -> String {
    let mut out = String::from("stat,value\n");
    out.push_str(&format!("roundtrip_trials,{}\n", rt.trials));
    out.push_str(&format!("restored_correct,{}\n", rt.restored_correct));
    out.push_str(&format!("restored_wrong,{}\n", rt.restored_wrong));
    out.push_str(&format!("rejected_invalid_key,{}\n", rt.rejected_invalid_key));
    out.push_str(&format!(
        "rejected_tag_mismatch,{}\n",
        rt.rejected_tag_mismatch
    ));
    out.push_str(&format!("backup_aborts,{}\n", rt.backup_aborts));
    out.push_str(&format!("x0_backups,{}\n", rt.x0_backups));
    out.push_str(&format!("x0_backup_cycles,{}\n", fmt(rt.x0_backup_cycles)));
    out.push_str(&format!(
        "completed_restore_cycles,{}\n",
        fmt(rt.completed_restore_cycles)
    ));
    out.push_str(&format!(
        "mean_discarded_bits,{}\n",
        fmt(rt.mean_discarded_bits)
    ));
    out.push_str(&format!("tamper_trials,{}\n", tamper.trials));
    out.push_str(&format!("tamper_rejected,{}\n", tamper.rejected));
    out.push_str(&format!("tamper_undetected,{}\n", tamper.undetected));
    out
}

// ---------------------------------------------------------------------------
// replay + malicious read

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReplayStats {
    pub trials: usize,
    pub detected: usize,
}

/// Stale-image replays against the current timestamped state.
pub fn replay_campaign(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<ReplayStats, CampaignError> {
    let sys_cfg = cfg.system(MitigationConfig::disabled());
    let trials = cfg.protocol.tamper_trials;
    let detections: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            attacks::replay_attack(&sys_cfg, seed::derive_seed(master_seed, &[tags::TRIAL, t]))
                .map_err(CampaignError::from)
        })
        .collect::<Result<_, _>>()?;
    Ok(ReplayStats {
        trials,
        detected: detections.iter().filter(|&&d| d).count(),
    })
}

pub fn replay_csv(r: &ReplayStats) -> String {
    format!(
        "stat,value\ntrials,{}\ndetected,{}\ndetection_rate,{}\n",
        r.trials,
        r.detected,
        fmt(r.detected as f64 / r.trials.max(1) as f64)
    )
}

/// Malicious read leakage at protocol scale.
pub fn malicious_read_campaign(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<attacks::LeakageReport, CampaignError> {
    let sys_cfg = cfg.system(MitigationConfig::disabled());
    Ok(attacks::malicious_read(
        &sys_cfg,
        cfg.protocol.roundtrip_trials,
        master_seed,
    )?)
}

pub fn malicious_read_csv(r: &attacks::LeakageReport) -> String {
    let mut out = String::from("stat,value\n");
    out.push_str(&format!("trials,{}\n", r.trials));
    out.push_str(&format!("chi_square,{}\n", fmt(r.chi_square)));
    out.push_str(&format!(
        "chi_square_critical_999,{}\n",
        fmt(r.chi_square_critical_999)
    ));
    out.push_str(&format!("rejects_uniformity,{}\n", r.rejects_uniformity));
    out.push_str(&format!("mi_bits_per_bit,{}\n", fmt(r.mi_bits_per_bit)));
    for (i, f) in r.per_bit_freq.iter().enumerate() {
        out.push_str(&format!("cipher_bit_freq_{i:02},{}\n", fmt(*f)));
    }
    out
}

// ---------------------------------------------------------------------------
// simulate-protocol (trace replay)

/// Replay a JSON trace on a freshly provisioned system.
pub fn simulate_protocol(
    cfg: &ExperimentConfig,
    master_seed: u64,
    events: &[TraceEvent],
) -> Result<TraceLog, CampaignError> {
    let mut sys = SecureSystem::new(cfg.system(MitigationConfig::disabled()), master_seed)?;
    Ok(crate::protocol::run_power_trace(&mut sys, events)?)
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub sigma_process: f64,
    pub reliability_mean: f64,
    pub reliability_min: f64,
    pub mean_extra_bits: f64,
    pub mean_clean_bits: f64,
    pub tag_avalanche: f64,
    pub tag_balance: f64,
    pub in_window: bool,
}

/// Sweep sigma_process and measure the acceptance quantities at reduced
/// trial counts; report which grid points land every window.
pub fn calibrate(
    cfg: &ExperimentConfig,
    grid: &[f64],
    master_seed: u64,
) -> Result<Vec<CalibrationRow>, CampaignError> {
    let mut rows = Vec::new();
    for &sigma_p in grid {
        let mut sub = cfg.clone();
        sub.variation.sigma_process = sigma_p;
        sub.puf_metrics.uniqueness_chips = 40;
        sub.puf_metrics.reliability_chips = 12;
        sub.puf_metrics.reliability_challenges = 12;
        sub.puf_metrics.reliability_cycles = 120;
        sub.clean_bits.chips = 20;
        sub.clean_bits.sigma_c2c_sweep = vec![0.10];
        sub.clean_bits.histogram_challenges = 1;
        sub.clean_bits.histogram_cycles = 2;
        sub.tag_metrics.tag_sizes = vec![8];
        sub.tag_metrics.trials = 300;
        let pm = puf_metrics(&sub, master_seed)?;
        let rel = metrics::MetricReport::summarize(
            "reliability",
            pm.reliability_per_chip_challenge.clone(),
        );
        let cb = clean_bits(&sub, master_seed)?;
        let tm = tag_metrics_campaign(&sub, master_seed)?;
        let row = CalibrationRow {
            sigma_process: sigma_p,
            reliability_mean: rel.mean,
            reliability_min: rel.min,
            mean_extra_bits: cb.per_variation[0].mean_extra_bits,
            mean_clean_bits: cb.per_variation[0].mean_clean_bits_per_response,
            tag_avalanche: tm[0].metrics.avalanche,
            tag_balance: tm[0].metrics.uniformity,
            in_window: rel.mean >= 0.96
                && rel.mean <= 1.0
                && cb.per_variation[0].mean_extra_bits >= 0.3
                && cb.per_variation[0].mean_extra_bits <= 1.5
                && cb.per_variation[0].mean_clean_bits_per_response >= 29.0
                && cb.per_variation[0].mean_clean_bits_per_response <= 31.0
                && tm[0].metrics.avalanche >= 0.445
                && tm[0].metrics.avalanche <= 0.545
                && tm[0].metrics.uniformity >= 0.90,
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn calibrate_csv(rows: &[CalibrationRow]) -> String {
    let mut out = String::from(
        "sigma_process,reliability_mean,reliability_min,mean_extra_bits,mean_clean_bits,tag_avalanche,tag_balance,in_window\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(r.sigma_process),
            fmt(r.reliability_mean),
            fmt(r.reliability_min),
            fmt(r.mean_extra_bits),
            fmt(r.mean_clean_bits),
            fmt(r.tag_avalanche),
            fmt(r.tag_balance),
            r.in_window
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.voting.sample_counts = vec![1, 3];
        cfg.voting.p_step = 0.25;
        cfg.voting.trials = 20_000;
        cfg.puf_metrics.uniqueness_chips = 20;
        cfg.puf_metrics.challenges = 4;
        cfg.puf_metrics.reliability_chips = 3;
        cfg.puf_metrics.reliability_challenges = 3;
        cfg.puf_metrics.reliability_cycles = 30;
        cfg.tag_metrics.trials = 60;
        cfg.clean_bits.chips = 4;
        cfg.clean_bits.challenges_per_chip = 4;
        cfg.clean_bits.histogram_challenges = 2;
        cfg.clean_bits.histogram_cycles = 20;
        cfg.spoofing.probe_counts = vec![1, 4];
        cfg.spoofing.campaigns = 20;
        cfg.protocol.roundtrip_trials = 6;
        cfg.protocol.tamper_trials = 6;
        cfg.screening_samples = 24;
        cfg
    }

    #[test]
    fn voting_curves_enumerate_the_grid() {
        let cfg = small_cfg();
        let rows = voting_curves(&cfg, 1).unwrap();
        // n=1: 5 all-agree + 5 majority; n=3: same. p grid 0,0.25,..,1.
        assert_eq!(rows.len(), 20);
        let csv = voting_curves_csv(&rows);
        assert!(csv.starts_with("p,n,scheme,analytic,empirical\n"));
        assert_eq!(csv.lines().count(), 21);
    }

    #[test]
    fn campaigns_are_deterministic_across_thread_counts() {
        let cfg = small_cfg();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let v = voting_curves_csv(&voting_curves(&cfg, 9).unwrap());
                let p = puf_metrics_csv(&puf_metrics(&cfg, 9).unwrap());
                let c = clean_bits_csv(&clean_bits(&cfg, 9).unwrap());
                (v, p, c)
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn clean_bits_with_zero_noise_consumes_exactly_sixteen() {
        let mut cfg = small_cfg();
        cfg.clean_bits.sigma_c2c_sweep = vec![0.0];
        let r = clean_bits(&cfg, 3).unwrap();
        assert_eq!(r.per_variation[0].mean_bits_consumed, 16.0);
        assert_eq!(r.per_variation[0].mean_extra_bits, 0.0);
        assert_eq!(r.per_variation[0].mean_clean_bits_per_response, 32.0);
        assert_eq!(r.per_variation[0].aborted_extractions, 0);
    }

    #[test]
    fn roundtrip_stats_add_up() {
        let cfg = small_cfg();
        let rt = protocol_roundtrip(&cfg, 5).unwrap();
        assert_eq!(
            rt.trials,
            rt.restored_correct
                + rt.restored_wrong
                + rt.rejected_invalid_key
                + rt.rejected_tag_mismatch
                + rt.backup_aborts
        );
        assert!(rt.restored_correct > 0);
    }
}
