//! Coordinated multi-cell downlink beamforming with long-term channel
//! statistics: dual fixed-point solving, primal recovery, feasibility
//! checks and an asynchronous protocol simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asyncsim;
pub mod channel;
pub mod dualsolve;
pub mod error;
pub mod experiments;
pub mod feasibility;
pub mod hermlin;
pub mod primal;

pub use error::{Error, Result};
