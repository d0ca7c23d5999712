//! Decoder for the LTE downlink control channel working on baseband I/Q
//! traces.
//!
//! The crate recovers every downlink control message of a cell, keeps the
//! list of active RNTIs through the random-access procedure, checks decoded
//! schedules against measured shared-channel power, and ships a synthetic
//! cell generator so the whole chain can run without radio hardware.

pub mod cellsim;
pub mod coding;
pub mod dcilog;
pub mod errlog;
pub mod error;
pub mod grid;
pub mod pdcch;
pub mod pipeline;
pub mod sync;
pub mod tables;
pub mod tracker;
pub mod tuner;
pub mod verifier;

pub use error::{Error, Result};
