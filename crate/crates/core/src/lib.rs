//! Batch prosody analysis: automatic prosodic annotation and parametric
//! feature extraction from speech audio, f0 tracks, and tier annotations.
//!
//! The crate stylizes f0 as the superposition of a slowly varying register
//! (base/mid/topline plus range) and local polynomial contour shapes,
//! quantifies boundaries, standard distributions, rhythm, and voice quality,
//! optionally bootstraps its own segmentation (chunks, syllable nuclei,
//! phrase and accent candidates), clusters the resulting contour classes,
//! and exports everything as CSV tables and derived f0 tracks.

pub mod annot;
pub mod augment;
pub mod bnd;
pub mod cluster;
pub mod config;
pub mod dsp;
pub mod error;
pub mod gnl;
pub mod loc;
pub mod preproc;
pub mod register;
pub mod rhy;
pub mod sigio;
pub mod voice;
pub mod stats;

pub use error::{Error, Result};
