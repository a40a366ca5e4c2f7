//! Visual speech recognition from face videos.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`segmentation`] finds the face symmetry axis, tracks the inner lower
//!    lip and the mouth corners with small HMMs and cuts out a normalised
//!    mouth volume.
//! 2. [`features`] turns every feasible sub-sequence of that volume into a
//!    short vector of low-frequency 3D-DCT amplitudes plus its length.
//! 3. [`svm`] scores each vector with one-vs-rest RBF SVMs whose outputs are
//!    calibrated to probabilities.
//! 4. [`decoder`] arranges the scores into a (class, start, duration) grid and
//!    extracts the best tiling of the video with a duration-exact HMM.
//!
//! [`eval`] aligns decoded sequences against references, and [`fixtures`]
//! renders synthetic talking faces with known ground truth.

pub mod config;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod image;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod segmentation;
pub mod svm;

pub use error::{Error, Result};
