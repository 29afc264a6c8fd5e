//! Cyclic block filtered multitone (CB-FMT) modulation library.
//!
//! CB-FMT is a filter-bank multicarrier scheme that replaces the linear
//! convolution of conventional filtered multitone with a per-block cyclic
//! convolution, so the whole transceiver reduces to a concatenation of DFTs.
//! This crate implements the transceiver, the orthogonality theory (time
//! domain, frequency domain, matrix form with its gcd reduction), optimal
//! prototype-pulse search on hyper-spherical coordinates, time-variant
//! Rayleigh-fading channel simulation, one-tap frequency-domain equalization,
//! and the link-quality metrics (in-band-to-out-of-band energy ratio and
//! achievable rate).
//!
//! Modules follow the processing chain:
//! [`transforms`] -> [`filterbank`] -> [`orthogonality`] / [`pulse_design`]
//! -> [`channel`] -> [`equalization`] -> [`metrics`].

pub mod channel;
pub mod equalization;
pub mod error;
pub mod filterbank;
pub mod metrics;
pub mod optim;
pub mod orthogonality;
pub mod pulse_design;
pub mod transforms;

pub use error::{Error, Result};
pub use filterbank::{FilterBankParams, PrototypePulse};
