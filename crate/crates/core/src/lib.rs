//! Static video summarisation with bag-of-textures frame signatures.
//!
//! Frames are sampled, converted to grayscale and halved in size, then cut
//! into overlapping 8x8 blocks whose low-frequency DCT coefficients are
//! quantised against a small k-means dictionary. Each frame becomes a
//! histogram of codewords, optionally paired with a 16-bin hue histogram.
//! Keyframes are chosen by clustering these signatures, and the [`eval`]
//! module scores the resulting summaries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codebook;
pub mod error;
pub mod eval;
pub mod features;
pub mod histograms;
pub mod ingest;
pub mod io;
pub mod kmeans;
pub mod manifest;
pub mod summarizer;
pub mod synthetic;

pub use error::{Error, Result, Stage};
