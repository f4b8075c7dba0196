//! Coordinate-network species distribution models used as a geographic prior
//! for fine-grained image classification.
//!
//! The crate is organised around the pipeline it supports:
//!
//! - [`geo`] and [`model`]: location encoding and the residual coordinate
//!   network that maps a location to independent per-species presence
//!   probabilities.
//! - [`train`]: presence-only training with the full assume-negative loss,
//!   exact backpropagation and Adam.
//! - [`fusion`]: turns model output into a prior over a vision taxonomy
//!   (with a delta floor and a constant for unmapped species) and multiplies
//!   it into classifier probabilities.
//! - [`eval`]: Top-1 gain of the fused classifier, mean average precision of
//!   range predictions against presence rasters, and parameter sweeps.
//! - [`synth`]: seeded synthetic worlds used as ground truth.
//! - [`io`] and [`cli`]: file formats and the command line front end.

pub mod cli;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geo;
pub mod io;
pub mod matrix;
pub mod model;
pub mod raster;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use fusion::{FusionConfig, TaxonomyMap};
pub use geo::{EncodedLocation, GeoCoordinate};
pub use matrix::Matrix;
pub use model::{ModelConfig, ModelShape, Network, SinrModel, SpeciesScorer};

/// Random generator used everywhere a seed is accepted. ChaCha output is
/// specified independently of platform, which keeps seeded runs reproducible.
pub type SeededRng = rand_chacha::ChaCha8Rng;
