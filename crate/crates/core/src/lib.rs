//! Joint channel, CFO and phase-noise estimation for amplify-and-forward
//! OFDM relaying, with the matching data-phase receiver and a hybrid
//! Cramér–Rao bound.

pub mod ambiguity;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod hcrlb;
pub mod linalg;
pub mod metrics;
pub mod pn_subspace;
pub mod receiver;
pub mod signal_model;

pub use error::{Error, Result};
