//! Information-theoretic similarity between feature-vector time series,
//! applied to cover-song retrieval.
//!
//! The crate covers the full pipeline:
//!
//! - [`features`]: beat-synchronous chroma sequences (resampling, beat
//!   averaging, square-root compression, OTI key invariance).
//! - [`quantize`]: seeded K-means codebooks, symbol strings, codeword
//!   histograms.
//! - [`compress`]: internal code lengths (sequential dictionary, PPM coder,
//!   pluggable block-sorting backend), the alignment transform, NCD and NCDA.
//! - [`predict_discrete`]: sequential symbol predictors (PPMC, LZ78) with
//!   average log-loss; log-loss NCD/NCDA, the cross-prediction distance D×,
//!   and the Jensen-Shannon divergence baseline.
//! - [`predict_continuous`]: time-delay embedding, correlation-based
//!   nearest-neighbor prediction (self / cross / conditional), Gaussian
//!   entropy of rescaled prediction errors, and the continuous NID, D× and
//!   NMSE distances.
//! - [`retrieval`]: two-stage filter-and-refine retrieval, distance
//!   normalization, rank-based combination, baselines, MAP / precision@r /
//!   Friedman evaluation.
//! - [`synth`]: a seeded synthetic cover-set generator for desk-scale
//!   experiments.
//! - [`io`]: the on-disk formats (track JSON, codebook CSV, distance CSV,
//!   metrics JSON).

pub mod compress;
pub mod error;
pub mod features;
pub mod io;
pub mod ppm;
pub mod predict_continuous;
pub mod predict_discrete;
pub mod quantize;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
