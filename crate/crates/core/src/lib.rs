//! Distortion-rate evaluation of compress-and-forward strategies for receive
//! beamforming over a cascade of radio remote units (RRUs) with finite-rate
//! fronthaul links.
//!
//! The pipeline is: draw a [`system::SystemInstance`], build a
//! [`schemes::SchemeContext`] over it, and evaluate standard routing,
//! improved routing, in-network processing and the cut-set lower bound at a
//! fronthaul tuple. [`experiment`] runs the Monte Carlo sweep on top.

pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod parse;
pub mod rng;
pub mod schemes;
pub mod system;
pub mod waterfill;

pub use error::{Error, Result};
pub use schemes::{RateAllocation, SchemeContext, SchemeEvaluation, SchemeId};
pub use system::{sample_instance, SystemInstance, Topology};
