//! Fixed-rate coding of keypoint positions and scales.
//!
//! Each keypoint costs `ceil(log2 4N_x) + ceil(log2 4N_y) + S` bits: the
//! quarter-pel coordinates as fixed-width integers and the scale as an
//! `S`-bit index on a logarithmic grid over the detector's scale range.
//! Orientation is not sent; the decoder recomputes it from the image.

use crate::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::features::{Keypoint, SCALE_MAX, SCALE_MIN};
use crate::wire::{put_u16, u16_field, Reader};

/// Default number of bits per scale code.
pub const DEFAULT_SCALE_BITS: u8 = 8;

/// Bits needed for a quarter-pel coordinate along an axis of `pixels` pixels.
pub fn coordinate_bits(pixels: u32) -> u32 {
    if pixels == 0 {
        return 0;
    }
    let levels = 4 * pixels as u64;
    64 - (levels - 1).leading_zeros()
}

/// Size in bits of the location payload for `count` keypoints.
pub fn location_rate(count: u64, width: u32, height: u32, scale_bits: u8) -> u64 {
    count * (coordinate_bits(width) + coordinate_bits(height) + scale_bits as u32) as u64
}

/// Logarithmic scale quantizer over `[SCALE_MIN, SCALE_MAX]`.
#[derive(Clone, Copy, Debug)]
pub struct ScaleGrid {
    bits: u8,
}

impl ScaleGrid {
    pub fn new(bits: u8) -> Result<Self> {
        if bits > 16 {
            return Err(Error::InvalidConfig(format!("scale bits {bits} exceeds 16")));
        }
        Ok(ScaleGrid { bits })
    }

    fn levels(self) -> u32 {
        (1u32 << self.bits) - 1
    }

    fn span() -> f64 {
        (SCALE_MAX as f64 / SCALE_MIN as f64).log2()
    }

    /// Width of one grid step in log2 units.
    pub fn step_log2(self) -> f64 {
        if self.levels() == 0 {
            Self::span()
        } else {
            Self::span() / self.levels() as f64
        }
    }

    pub fn quantize(self, scale: f32) -> u32 {
        let l = self.levels();
        if l == 0 {
            return 0;
        }
        let t = (scale as f64 / SCALE_MIN as f64).max(f64::MIN_POSITIVE).log2() / Self::span();
        (t * l as f64).round().clamp(0.0, l as f64) as u32
    }

    pub fn dequantize(self, code: u32) -> f32 {
        let l = self.levels();
        if l == 0 {
            return SCALE_MIN;
        }
        (SCALE_MIN as f64 * (code as f64 * Self::span() / l as f64).exp2()) as f32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocationLayer {
    pub count: u16,
    pub image_width: u16,
    pub image_height: u16,
    pub scale_bits: u8,
    pub payload: Vec<u8>,
}

const LOCATION_MAGIC: &[u8; 4] = b"HLOC";
const HEADER_LEN: usize = 4 + 2 + 2 + 2 + 1;

impl LocationLayer {
    pub fn payload_bits(&self) -> u64 {
        location_rate(
            self.count as u64,
            self.image_width as u32,
            self.image_height as u32,
            self.scale_bits,
        )
    }

    pub fn byte_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(LOCATION_MAGIC);
        put_u16(&mut out, self.count);
        put_u16(&mut out, self.image_width);
        put_u16(&mut out, self.image_height);
        out.push(self.scale_bits);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(LOCATION_MAGIC)?;
        let mut layer = LocationLayer {
            count: r.u16()?,
            image_width: r.u16()?,
            image_height: r.u16()?,
            scale_bits: r.u8()?,
            payload: Vec::new(),
        };
        let expected = layer.payload_bits().div_ceil(8) as usize;
        layer.payload = r.take(expected)?.to_vec();
        if r.remaining() != 0 {
            return Err(Error::MalformedLayer(format!("{} trailing bytes", r.remaining())));
        }
        Ok(layer)
    }
}

pub fn encode_locations(keypoints: &[Keypoint], width: u32, height: u32, scale_bits: u8) -> Result<LocationLayer> {
    let grid = ScaleGrid::new(scale_bits)?;
    let (bx, by) = (coordinate_bits(width), coordinate_bits(height));
    let mut w = BitWriter::new();
    for kp in keypoints {
        if kp.x >= 4 * width || kp.y >= 4 * height {
            return Err(Error::OutOfBoundsKeypoint {
                x: kp.x,
                y: kp.y,
                width,
                height,
            });
        }
        w.put(kp.x, bx);
        w.put(kp.y, by);
        w.put(grid.quantize(kp.scale), scale_bits as u32);
    }
    Ok(LocationLayer {
        count: u16_field(keypoints.len(), "keypoint count")?,
        image_width: u16_field(width as usize, "image width")?,
        image_height: u16_field(height as usize, "image height")?,
        scale_bits,
        payload: w.finish(),
    })
}

/// Restores positions and dequantized scales; orientation and response are zero.
pub fn decode_locations(layer: &LocationLayer) -> Result<Vec<Keypoint>> {
    let grid = ScaleGrid::new(layer.scale_bits).map_err(|e| Error::MalformedLayer(e.to_string()))?;
    let expected = layer.payload_bits().div_ceil(8) as usize;
    if layer.payload.len() != expected {
        return Err(Error::MalformedLayer(format!(
            "payload holds {} bytes, {} keypoints need {}",
            layer.payload.len(),
            layer.count,
            expected
        )));
    }
    let (width, height) = (layer.image_width as u32, layer.image_height as u32);
    let (bx, by) = (coordinate_bits(width), coordinate_bits(height));
    let mut r = BitReader::new(&layer.payload);
    let truncated = || Error::MalformedLayer("payload ends early".into());
    let mut out = Vec::with_capacity(layer.count as usize);
    for _ in 0..layer.count {
        let x = r.get(bx).ok_or_else(truncated)?;
        let y = r.get(by).ok_or_else(truncated)?;
        let code = r.get(layer.scale_bits as u32).ok_or_else(truncated)?;
        if x >= 4 * width || y >= 4 * height {
            return Err(Error::MalformedLayer(format!("coordinate ({x}, {y}) outside image")));
        }
        out.push(Keypoint {
            x,
            y,
            scale: grid.dequantize(code),
            orientation: 0.0,
            response: 0.0,
        });
    }
    Ok(out)
}
