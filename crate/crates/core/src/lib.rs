//! Perceptual crack detection for rendered snapshots of 3D textured meshes.
//!
//! Given a reference snapshot and a distorted snapshot taken from the same
//! viewpoint, [`pcd::compute_crack_map`] produces a per-pixel crack
//! likelihood map. The map can be summarized as a crack artifact score
//! ([`pcd::crack_artifact_score`]) or turned into pooling weights that
//! emphasize cracks in a base quality model's map ([`integration`]).
//! [`eval`] correlates sequence-level predictions with subjective scores.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the CLI and the evaluation
//! harness use.

pub mod error;
pub mod eval;
pub mod imgproc;
pub mod integration;
pub mod io;
pub mod parallel;
pub mod pcd;
pub mod qa_models;
pub mod scalar;
pub mod synth;

pub use error::{PcdError, Result};
pub use imgproc::Raster;
pub use integration::{Background, CropRect, FrameScores};
pub use qa_models::{Polarity, QualityModel};
pub use scalar::Scalar;

pub type GrayFrame = imgproc::GrayFrame<f64>;
pub type RealField = imgproc::RealField<f64>;
pub type Kernel = imgproc::Kernel<f64>;
pub type CrackMap = pcd::CrackMap<f64>;
pub type PcdConfig = pcd::PcdConfig<f64>;
pub type QualityMap = qa_models::QualityMap<f64>;
pub type WeightMap = integration::WeightMap<f64>;
pub type IntegrationConfig = integration::IntegrationConfig<f64>;

pub type GrayFrame32 = imgproc::GrayFrame<f32>;
pub type CrackMap32 = pcd::CrackMap<f32>;
pub type PcdConfig32 = pcd::PcdConfig<f32>;
