//! Singular-value jamming detectors for a fusion-center sensor network.
//!
//! The crate covers the full pipeline: synthetic signal generation under
//! jamming hypotheses ([`signal`]), the SSV / KSV / RSV / GRSV / energy
//! detector bank ([`detectors`]), analytic false-alarm probabilities from the
//! correlated complex Wishart eigenvalue distribution ([`wishart`]),
//! Monte-Carlo threshold calibration ([`calibration`]), and the experiment
//! harness plus CLI plumbing ([`harness`], [`config`], [`matfile`]).

pub mod calibration;
pub mod config;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod matfile;
pub mod quad;
pub mod rng;
pub mod signal;
pub mod wishart;

pub use error::{JamdetError, Result};
