//! Data-driven minimum-variance hedge ratios for European index options.
//!
//! The crate learns hedge ratios that minimize the mean squared local
//! hedging error `ΔV − δ·ΔS` from panels of daily option quotes. It ships
//!
//! * closed-form Black-Scholes quantities and the Hull-White hedge-ratio
//!   formula ([`market_math`]),
//! * quote ingestion, filtering, pairing and feature construction
//!   ([`data`]),
//! * a stochastic-volatility quote generator with a brute-force
//!   variance-minimizing oracle ([`synth`]),
//! * a small deterministic neural-network engine ([`nn`]),
//! * the feedforward, GRU and Hull-White hedge models ([`models`]),
//! * the training loop and the gain evaluation ([`train`], [`eval`]),
//! * the command-line front end used by the `mvhedge` binary ([`cli`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod market_math;
pub mod models;
pub mod nn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
