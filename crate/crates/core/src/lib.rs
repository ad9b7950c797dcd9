//! Vision task outputs as decodable RGB images.
//!
//! Codecs turn metric depth, surface normals and segmentation masks into
//! ordinary RGB pictures and back, so that any image generator can be scored
//! on standard benchmarks by decoding what it draws.

pub mod degrade;
pub mod depth_codec;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod normal_codec;
pub mod raster;
pub mod seg_codec;

pub use error::{Error, Result};
pub use raster::{DepthMap, NormalMap, Rgb, RgbImage};

/// Identifies the codec conventions; echoed into every report.
pub const CODEC_VERSION: &str = concat!("taskviz-codec/", env!("CARGO_PKG_VERSION"));
