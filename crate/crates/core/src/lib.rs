//! Site-specific millimeter-wave channel simulation.
//!
//! The pipeline traces 2D rays over a 2.5D building map with a fast
//! shooting-bouncing-rays pass, associates them to user positions, refines
//! every captured reflection path with the method of images, lifts paths into
//! 3D (with an optional ground bounce), evaluates GO/UTD/RET path gains,
//! expands specular paths into stochastic sub-ray clusters and finally
//! synthesizes the wide-band MIMO-OFDM channel.
//!
//! ```no_run
//! use mmray::scenario::{ScenarioConfig, Simulator};
//!
//! let cfg = ScenarioConfig::from_file("scenario.json").unwrap();
//! let sim = Simulator::new(cfg).unwrap();
//! let ue = sim.ue_states().unwrap()[0];
//! let result = sim.simulate_ue(0, &ue).unwrap();
//! println!("{} paths", result.paths.len());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
#[cfg(feature = "cli")]
pub mod cli;
pub mod cluster;
mod degrees;
pub mod em;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod oracle;
pub mod scenario;
pub mod tracer;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
