//! Federated next-location training, gradient inversion (ST-GIA) and
//! metric differential-privacy defenses, at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! * [`geo`]: planar geometry, road networks, shortest paths, projection onto the network.
//! * [`mobimodel`]: a one-hidden-layer tanh classifier with exact first- and
//!   second-order gradients.
//! * [`fedsim`]: local SGD, FedAvg and transcripts of shared gradients.
//! * [`stgia`]: the gradient-matching attack with warm start, mapping and calibration.
//! * [`privdef`]: DP-SGD, GeoI, GeoGI, PGEM and adaptive budget allocation.
//! * [`dataio`]: check-in ingestion, resampling and synthetic trajectories.

pub mod dataio;
pub mod error;
pub mod fedsim;
pub mod geo;
pub mod mobimodel;
pub mod privdef;
pub mod rng;
pub mod stgia;

pub use error::{Error, Result};
