//! Synthetic dermoscopy toolkit: procedural multi-layer skin models with
//! stochastically grown lesions, spectral volumetric Monte Carlo rendering,
//! and the analysis metrics used to characterize the generated datasets.
//!
//! The crate is organized around the generation pipeline:
//!
//! * [`lesion`] — probabilistic 3D growing-lesion automaton on a voxel grid.
//! * [`anatomy`] — layer stacks with rough boundaries, blood networks baked
//!   to volumetric fields, hair strands, and lesion placement.
//! * [`optics`] — spectral absorption/scattering materials per tissue layer.
//! * [`render`] — spectral volumetric path tracer producing RGB images and
//!   pixel-exact lesion masks.
//! * [`metrics`] — skin-tone (ITA), circularity, relative area, Dice, and
//!   the center-crop augmentation.
//! * [`pipeline`] — configuration, batch generation, sweeps, and manifests.

pub mod anatomy;
pub mod error;
pub mod lesion;
pub mod mask;
pub mod metrics;
pub mod optics;
pub mod pfm;
pub mod pipeline;
pub mod render;
pub mod rng;

pub use error::{Error, Result};
