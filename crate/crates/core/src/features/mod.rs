//! Keypoint detection and binary description.
//!
//! The detector scores every pixel of a four-octave pyramid with a
//! 16-pixel circle test, keeps 3x3 maxima above the threshold, suppresses
//! weaker responses in neighbouring octaves and refines positions to
//! quarter-pel. The descriptor compares 512 pairs of box-smoothed samples
//! over a 60-point ring pattern rotated to the keypoint's dominant
//! gradient direction.

mod describe;
mod detect;
pub mod pattern;

use std::cmp::Ordering;

pub use crate::bits::{BinaryDescriptor, DESCRIPTOR_BITS};
pub use describe::{border_margin, describe, Description};
pub use detect::{detect, MAX_SCORE};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::wire::{put_u16, put_u32, Reader};

/// Number of pyramid octaves.
pub const OCTAVES: u32 = 4;
/// Smallest keypoint scale (finest octave).
pub const SCALE_MIN: f32 = 1.0;
/// Largest keypoint scale (coarsest octave).
pub const SCALE_MAX: f32 = 8.0;
/// Minimum width and height accepted by the extractor.
pub const MIN_IMAGE_SIDE: u32 = 32;

pub(crate) fn octave_scale(octave: u32) -> f32 {
    (1u32 << octave) as f32
}

/// Nearest pyramid octave for a (possibly dequantized) scale.
pub fn octave_for_scale(scale: f32) -> u32 {
    let mut octave = 0;
    let mut bound = std::f32::consts::SQRT_2;
    while octave + 1 < OCTAVES && scale >= bound {
        octave += 1;
        bound *= 2.0;
    }
    octave
}

/// A detected interest point. Coordinates are in quarter pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Keypoint {
    pub x: u32,
    pub y: u32,
    pub scale: f32,
    /// Radians in [0, 2π).
    pub orientation: f32,
    pub response: f32,
}

/// Canonical keypoint order: response descending, then y, x, scale ascending.
pub fn canonical_cmp(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
        .then(a.scale.total_cmp(&b.scale))
}

pub(crate) fn canonical_sort(keypoints: &mut Vec<Keypoint>) {
    keypoints.sort_by(canonical_cmp);
    keypoints.dedup_by(|a, b| canonical_cmp(a, b) == Ordering::Equal);
}

/// Keypoints with their descriptors, in canonical order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<BinaryDescriptor>,
}

const FEATURE_MAGIC: &[u8; 4] = b"HFTS";

impl FeatureSet {
    pub fn new(keypoints: Vec<Keypoint>, descriptors: Vec<BinaryDescriptor>) -> Result<Self> {
        if keypoints.len() != descriptors.len() {
            return Err(Error::DimensionMismatch {
                expected: keypoints.len(),
                found: descriptors.len(),
            });
        }
        Ok(FeatureSet { keypoints, descriptors })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Descriptor length, or [`DESCRIPTOR_BITS`] for an empty set.
    pub fn dimension(&self) -> usize {
        self.descriptors.first().map_or(DESCRIPTOR_BITS, |d| d.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dimension();
        let mut out = Vec::with_capacity(10 + self.len() * (16 + dim / 8));
        out.extend_from_slice(FEATURE_MAGIC);
        put_u16(&mut out, dim as u16);
        put_u32(&mut out, self.len() as u32);
        for (kp, d) in self.keypoints.iter().zip(&self.descriptors) {
            put_u32(&mut out, kp.x);
            put_u32(&mut out, kp.y);
            put_u16(&mut out, (kp.scale * 256.0).round().clamp(0.0, u16::MAX as f32) as u16);
            let turns = (kp.orientation / std::f32::consts::TAU * 65536.0).round() as i64;
            put_u16(&mut out, turns.rem_euclid(65536) as u16);
            out.extend_from_slice(&kp.response.to_le_bytes());
            out.extend_from_slice(&d.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(FEATURE_MAGIC)?;
        let dim = r.u16()? as usize;
        let count = r.u32()? as usize;
        let mut set = FeatureSet::default();
        for _ in 0..count {
            let x = r.u32()?;
            let y = r.u32()?;
            let scale = r.u16()? as f32 / 256.0;
            let orientation = r.u16()? as f32 / 65536.0 * std::f32::consts::TAU;
            let response = r.f32()?;
            let d = BinaryDescriptor::from_bytes(dim, r.take(dim.div_ceil(8))?)?;
            set.keypoints.push(Keypoint {
                x,
                y,
                scale,
                orientation,
                response,
            });
            set.descriptors.push(d);
        }
        if r.remaining() != 0 {
            return Err(Error::MalformedPayload(format!(
                "{} trailing bytes after feature set",
                r.remaining()
            )));
        }
        Ok(set)
    }
}

/// Detects keypoints and describes those that fit inside the image.
pub fn extract(image: &Image, threshold: u32) -> Result<FeatureSet> {
    let keypoints = detect(image, threshold)?;
    let d = describe(image, &keypoints);
    Ok(FeatureSet {
        keypoints: d.keypoints,
        descriptors: d.descriptors,
    })
}
