//! Behavioral simulator and analysis library for a PUF-secured backup/restore
//! system protecting the non-volatile memory of resource-constrained devices.
//!
//! The library models, at desk scale:
//! - memristor devices with process and cycle-to-cycle variation ([`device`]),
//! - a time-multiplexed memristive crossbar PUF ([`puf`]),
//! - voting-based reliability enhancement and clean-key extraction
//!   ([`reliability`]),
//! - one-time-pad encryption ([`otp`]),
//! - a resistive NVM with sneak-path tag generation for integrity checking
//!   ([`nvm`], [`tag`]),
//! - the full backup/restore state machine with clock-cycle accounting
//!   ([`protocol`]),
//! - PUF/tag quality metrics and adversary simulations ([`metrics`],
//!   [`attacks`]),
//! - deterministic experiment campaigns emitting CSV/JSON ([`campaigns`]).
//!
//! All randomness flows from explicit 64-bit seeds; replaying a seed replays
//! every device resistance, response bit and output byte exactly, independent
//! of thread count.

pub mod attacks;
pub mod bits;
pub mod campaigns;
pub mod config;
pub mod device;
pub mod metrics;
pub mod nvm;
pub mod otp;
pub mod protocol;
pub mod puf;
pub mod reliability;
pub mod seed;
pub mod tag;
pub mod trng;

pub use bits::Bits;
pub use device::{ChipInstance, ChipLayout, CycleContext, MemristorState, VariationSpec};
pub use protocol::{ProtocolState, RestoreOutcome, SecureSystem, SystemConfig};
pub use reliability::{Key, KeyExtractionParams};
