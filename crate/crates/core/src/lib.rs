//! Joint image and binary local feature coding.
//!
//! A stream carries up to three layers: a lossy image, the quarter-pel
//! locations of selected keypoints, and an enhancement layer holding the
//! XOR residuals between descriptors computed on the original image and
//! on the decoded image. The decoder recomputes the predictors from the
//! decoded image and restores the original descriptors exactly.

mod bitio;
pub mod bits;
pub mod codec;
pub mod coder;
pub mod container;
pub mod corpus;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod features;
pub mod fsutil;
pub mod image;
pub mod location;
pub mod pipeline;
pub mod train;
mod wire;

pub use bits::{BinaryDescriptor, DESCRIPTOR_BITS};
pub use error::{Error, Result};
pub use features::{extract, FeatureSet, Keypoint};
pub use image::Image;
