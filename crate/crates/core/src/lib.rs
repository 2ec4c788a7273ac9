//! Seeded simulation of Kirchhoff-law-Johnson-noise (KLJN) key exchange and
//! of its use for key donation in a vehicular network.
//!
//! - [`noise`]: band-limited Johnson noise and the quasi-static wire loop.
//! - [`protocol`]: bit-sharing periods, level classification, keys.
//! - [`adversary`]: passive eavesdropping and current-injection attacks.
//! - [`lifetime`]: bandwidth, secure bit rate and key-lifetime planning.
//! - [`vanet`]: discrete-event model of CA, RSDs, lane pads and vehicles.
//!
//! All randomness is driven by explicit `u64` seeds; identical inputs give
//! bit-identical outputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod lifetime;
pub mod noise;
pub mod protocol;
pub mod vanet;

pub use error::{KljnError, Result};
