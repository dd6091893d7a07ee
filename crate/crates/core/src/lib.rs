//! Asymptotic key-rate analysis for reference-frame-independent
//! measurement-device-independent QKD with flawed four-state sources.
//!
//! The pipeline runs source preparation ([`source`]) through a simulated
//! relay ([`channel`]), rebuilds the relay's Pauli transfer rates from the
//! observed statistics ([`reconstruct`]), bounds them under decoy-state
//! uncertainty ([`decoy`], backed by [`lpcore`]), and evaluates the key rate
//! ([`rate`]). [`cli`] wires the pieces into sweeps and a self-check.

pub mod channel;
pub mod cli;
pub mod decoy;
pub mod error;
pub mod lpcore;
pub mod oracle;
pub mod qalg;
pub mod rate;
pub mod reconstruct;
pub mod source;

pub use error::Error;
