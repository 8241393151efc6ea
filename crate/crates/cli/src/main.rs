//! `nvshield` — experiment runner for the PUF-secured NVM backup simulator.
//!
//! Every subcommand is a pure function of (config, seed): rerunning with the
//! same master seed produces byte-identical output files regardless of
//! thread count. `NVSHIELD_THREADS` caps the rayon pool. Exit codes: 2 for
//! a bad config or arguments, 3 for an invariant violation inside a
//! campaign, 1 for I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvshield_core::campaigns::{self, CampaignError};
use nvshield_core::config::{ConfigError, ExperimentConfig};
use nvshield_core::protocol::TraceEvent;

#[derive(Parser)]
#[command(
    name = "nvshield",
    about = "Behavioral simulator for a memristor-PUF secured NVM backup/restore system"
)]
struct Cli {
    /// Experiment config JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic vs Monte Carlo voting curves (all-agree and majority).
    VotingCurves,
    /// Uniqueness, bit-aliasing, uniformity, diffuseness, reliability and
    /// steadiness campaigns.
    PufMetrics,
    /// Tag uniformity/avalanche/diffusion per tag size.
    TagMetrics,
    /// Bits consumed to assemble a clean key, per cycle-to-cycle variation,
    /// plus per-bit flip-probability histograms.
    CleanBits,
    /// Spoofing success probability vs number of trials.
    SpoofCurve,
    /// Logistic-regression / perceptron modeling attacks.
    ModelAttack,
    /// Backup/restore round trips and single-cell tamper detection.
    ProtocolStats,
    /// Adversary simulations.
    Attack {
        #[command(subcommand)]
        mode: AttackMode,
    },
    /// Replay a power-event trace (JSON file) through one system.
    SimulateProtocol {
        /// JSON array of trace events.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Sweep sigma_process and report the acceptance windows.
    Calibrate {
        #[arg(long, value_delimiter = ',', default_value = "1.5,1.7,1.9,2.1")]
        grid: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum AttackMode {
    /// Spoofing success vs trials (same output as spoof-curve).
    Spoof,
    /// Stale-image replay detection rate.
    Replay,
    /// Malicious read: ciphertext uniformity and plaintext leakage.
    Read,
    /// Machine-learning modeling attack (same output as model-attack).
    Model,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("NVSHIELD_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvshield: {e:#}");
            match e.downcast_ref::<AppError>() {
                Some(AppError::BadConfig(_)) => ExitCode::from(2),
                Some(AppError::Invariant(_)) => ExitCode::from(3),
                None => ExitCode::from(1),
            }
        }
    }
}

#[derive(Debug)]
enum AppError {
    BadConfig(String),
    Invariant(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::BadConfig(msg) => write!(f, "{msg}"),
            AppError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl std::error::Error for AppError {}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, anyhow::Error> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| AppError::BadConfig(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)
                .map_err(|e: ConfigError| AppError::BadConfig(e.to_string()).into())
        }
    }
}

fn write_out(dir: &Path, name: &str, bytes: &str) -> Result<(), anyhow::Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn campaign_err(e: CampaignError) -> anyhow::Error {
    AppError::Invariant(e.to_string()).into()
}

fn run(cli: Cli) -> Result<(), anyhow::Error> {
    let cfg = load_config(&cli.config)?;
    let seed = cfg
        .resolve_seed(cli.seed)
        .map_err(|e| AppError::BadConfig(e.to_string()))?;
    match cli.command {
        Command::VotingCurves => {
            let rows = campaigns::voting_curves(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "voting_curves.csv", &campaigns::voting_curves_csv(&rows))?;
        }
        Command::PufMetrics => {
            let r = campaigns::puf_metrics(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "puf_metrics.csv", &campaigns::puf_metrics_csv(&r))?;
        }
        Command::TagMetrics => {
            let rows = campaigns::tag_metrics_campaign(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "tag_metrics.csv", &campaigns::tag_metrics_csv(&rows))?;
        }
        Command::CleanBits => {
            let r = campaigns::clean_bits(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "clean_bits.csv", &campaigns::clean_bits_csv(&r))?;
            write_out(
                &cli.out,
                "flip_histograms.csv",
                &campaigns::flip_histogram_csv(&r),
            )?;
        }
        Command::SpoofCurve => {
            let rows = campaigns::spoof_curve(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "spoof_curve.csv", &campaigns::spoof_curve_csv(&rows))?;
        }
        Command::ModelAttack => {
            let rows = campaigns::model_attack(&cfg, seed).map_err(campaign_err)?;
            write_out(&cli.out, "model_attack.csv", &campaigns::model_attack_csv(&rows))?;
        }
        Command::ProtocolStats => {
            let rt = campaigns::protocol_roundtrip(&cfg, seed).map_err(campaign_err)?;
            let tamper = campaigns::tamper_detection(&cfg, seed).map_err(campaign_err)?;
            write_out(
                &cli.out,
                "protocol_stats.csv",
                &campaigns::protocol_stats_csv(&rt, &tamper),
            )?;
        }
        Command::Attack { mode } => match mode {
            AttackMode::Spoof => {
                let rows = campaigns::spoof_curve(&cfg, seed).map_err(campaign_err)?;
                write_out(&cli.out, "spoof_curve.csv", &campaigns::spoof_curve_csv(&rows))?;
            }
            AttackMode::Replay => {
                let r = campaigns::replay_campaign(&cfg, seed).map_err(campaign_err)?;
                write_out(&cli.out, "replay.csv", &campaigns::replay_csv(&r))?;
            }
            AttackMode::Read => {
                let r = campaigns::malicious_read_campaign(&cfg, seed).map_err(campaign_err)?;
                write_out(
                    &cli.out,
                    "malicious_read.csv",
                    &campaigns::malicious_read_csv(&r),
                )?;
            }
            AttackMode::Model => {
                let rows = campaigns::model_attack(&cfg, seed).map_err(campaign_err)?;
                write_out(&cli.out, "model_attack.csv", &campaigns::model_attack_csv(&rows))?;
            }
        },
        Command::SimulateProtocol { trace } => {
            let text = fs::read_to_string(&trace).map_err(|e| {
                AppError::BadConfig(format!("cannot read {}: {e}", trace.display()))
            })?;
            let events: Vec<TraceEvent> = serde_json::from_str(&text)
                .map_err(|e| AppError::BadConfig(format!("bad trace: {e}")))?;
            let log = campaigns::simulate_protocol(&cfg, seed, &events)
                .map_err(campaign_err)?;
            let json = serde_json::to_string_pretty(&log)?;
            write_out(&cli.out, "trace_log.json", &json)?;
        }
        Command::Calibrate { grid } => {
            let rows = campaigns::calibrate(&cfg, &grid, seed).map_err(campaign_err)?;
            write_out(&cli.out, "calibration.csv", &campaigns::calibrate_csv(&rows))?;
            if let Some(best) = rows.iter().find(|r| r.in_window) {
                let mut chosen = cfg.clone();
                chosen.variation.sigma_process = best.sigma_process;
                chosen.seed = Some(seed);
                let json = serde_json::to_string_pretty(&chosen)?;
                write_out(&cli.out, "calibrated.json", &json)?;
            } else {
                return Err(AppError::Invariant(
                    "no grid point landed every acceptance window".into(),
                )
                .into());
            }
        }
    }
    Ok(())
}
