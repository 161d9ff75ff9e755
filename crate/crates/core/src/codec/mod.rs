//! Lossy grayscale image layer and PSNR measurement.
//!
//! The reference codec is a baseline block transform coder: 8x8 integer
//! DCT, the standard luminance quantization table scaled by quality,
//! zigzag scan, differential DC, run-length AC and the standard canonical
//! prefix codes. Other codecs plug in through [`ImageCodec`] and are
//! identified in the container by their id byte.

mod dct;
mod huffman;

use std::sync::OnceLock;

use crate::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::wire::{put_u16, put_u32, u16_field, Reader};
use huffman::{PrefixCode, LUMA_AC_LENGTHS, LUMA_AC_VALUES, LUMA_DC_LENGTHS, LUMA_DC_VALUES};

/// JPEG-style quality knob in `1..=100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityFactor(u8);

impl QualityFactor {
    pub fn new(q: u32) -> Result<Self> {
        if (1..=100).contains(&q) {
            Ok(QualityFactor(q as u8))
        } else {
            Err(Error::InvalidQuality(q))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl Default for QualityFactor {
    fn default() -> Self {
        QualityFactor(50)
    }
}

impl std::fmt::Display for QualityFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A coded image layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedImage {
    pub codec_id: u8,
    pub quality: QualityFactor,
    pub width: u16,
    pub height: u16,
    pub payload: Vec<u8>,
}

const IMAGE_MAGIC: &[u8; 4] = b"HIMG";

impl CodedImage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.payload.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.push(self.codec_id);
        out.push(self.quality.get());
        put_u16(&mut out, self.width);
        put_u16(&mut out, self.height);
        put_u32(&mut out, self.payload.len() as u32);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(IMAGE_MAGIC)?;
        let codec_id = r.u8()?;
        let quality = QualityFactor::new(r.u8()? as u32)?;
        let width = r.u16()?;
        let height = r.u16()?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?.to_vec();
        if r.remaining() != 0 {
            return Err(Error::MalformedPayload(format!(
                "{} trailing bytes after image layer",
                r.remaining()
            )));
        }
        Ok(CodedImage {
            codec_id,
            quality,
            width,
            height,
            payload,
        })
    }

    /// Serialized size in bytes, including the layer header.
    pub fn byte_len(&self) -> usize {
        14 + self.payload.len()
    }
}

pub trait ImageCodec: Send + Sync {
    fn id(&self) -> u8;
    fn encode(&self, image: &Image, quality: QualityFactor) -> Result<CodedImage>;
    fn decode(&self, coded: &CodedImage) -> Result<Image>;
}

/// Stores samples verbatim; useful as a lossless reference point.
pub struct RawCodec;

/// Baseline block-DCT codec.
pub struct BlockDctCodec;

pub const RAW_CODEC_ID: u8 = 0;
pub const BLOCK_DCT_CODEC_ID: u8 = 1;

pub fn codec_for_id(id: u8) -> Result<&'static dyn ImageCodec> {
    match id {
        RAW_CODEC_ID => Ok(&RawCodec),
        BLOCK_DCT_CODEC_ID => Ok(&BlockDctCodec),
        other => Err(Error::MalformedPayload(format!("unknown codec id {other}"))),
    }
}

/// Encodes with the reference block-DCT codec.
pub fn encode_image(image: &Image, quality: QualityFactor) -> Result<CodedImage> {
    BlockDctCodec.encode(image, quality)
}

/// Decodes with whichever codec produced the layer.
pub fn decode_image(coded: &CodedImage) -> Result<Image> {
    codec_for_id(coded.codec_id)?.decode(coded)
}

fn dimensions(image: &Image) -> Result<(u16, u16)> {
    Ok((
        u16_field(image.width() as usize, "image width")?,
        u16_field(image.height() as usize, "image height")?,
    ))
}

impl ImageCodec for RawCodec {
    fn id(&self) -> u8 {
        RAW_CODEC_ID
    }

    fn encode(&self, image: &Image, quality: QualityFactor) -> Result<CodedImage> {
        let (width, height) = dimensions(image)?;
        Ok(CodedImage {
            codec_id: RAW_CODEC_ID,
            quality,
            width,
            height,
            payload: image.samples().to_vec(),
        })
    }

    fn decode(&self, coded: &CodedImage) -> Result<Image> {
        Image::new(coded.width as u32, coded.height as u32, coded.payload.clone())
            .map_err(|e| Error::MalformedPayload(e.to_string()))
    }
}

const LUMA_QUANT: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Natural (row-major) index of each zigzag position.
const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

/// Quantization steps in natural order for a quality factor.
pub fn quant_table(quality: QualityFactor) -> [u16; 64] {
    let q = quality.get() as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    LUMA_QUANT.map(|base| ((base as u32 * scale + 50) / 100).clamp(1, 255) as u16)
}

struct Tables {
    dc: PrefixCode,
    ac: PrefixCode,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| Tables {
        dc: PrefixCode::new(&LUMA_DC_LENGTHS, &LUMA_DC_VALUES),
        ac: PrefixCode::new(&LUMA_AC_LENGTHS, &LUMA_AC_VALUES),
    })
}

/// Rounds `num / den` half away from zero for `den > 0`.
fn round_quotient(num: i64, den: i64) -> i64 {
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

fn magnitude_category(v: i32) -> u32 {
    32 - v.unsigned_abs().leading_zeros()
}

fn put_magnitude(w: &mut BitWriter, v: i32, size: u32) {
    let bits = if v < 0 { v - 1 } else { v } as u32 & ((1u32 << size) - 1);
    w.put(bits, size);
}

fn get_magnitude(r: &mut BitReader<'_>, size: u32) -> Option<i32> {
    if size == 0 {
        return Some(0);
    }
    let bits = r.get(size)? as i32;
    Some(if bits < 1 << (size - 1) {
        bits - (1 << size) + 1
    } else {
        bits
    })
}

const AC_LIMIT: i32 = 1023;

impl ImageCodec for BlockDctCodec {
    fn id(&self) -> u8 {
        BLOCK_DCT_CODEC_ID
    }

    fn encode(&self, image: &Image, quality: QualityFactor) -> Result<CodedImage> {
        let (width, height) = dimensions(image)?;
        let steps = quant_table(quality);
        let t = tables();
        let (w, h) = (image.width() as usize, image.height() as usize);
        let mut writer = BitWriter::new();
        let mut prev_dc = 0i32;
        let mut block = [0i32; 64];
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                // edge replication pads partial blocks
                for y in 0..8 {
                    let sy = (by + y).min(h - 1);
                    for x in 0..8 {
                        let sx = (bx + x).min(w - 1);
                        block[y * 8 + x] = image.samples()[sy * w + sx] as i32 - 128;
                    }
                }
                let f = dct::forward(&block);
                let mut zz = [0i32; 64];
                for (k, &nat) in ZIGZAG.iter().enumerate() {
                    let q = round_quotient(f[nat], (steps[nat] as i64) << dct::SHIFT) as i32;
                    zz[k] = if k == 0 { q } else { q.clamp(-AC_LIMIT, AC_LIMIT) };
                }

                let diff = zz[0] - prev_dc;
                prev_dc = zz[0];
                let size = magnitude_category(diff);
                t.dc.put(&mut writer, size as u8);
                put_magnitude(&mut writer, diff, size);

                let mut run = 0u32;
                for &c in &zz[1..] {
                    if c == 0 {
                        run += 1;
                        continue;
                    }
                    while run > 15 {
                        t.ac.put(&mut writer, 0xF0);
                        run -= 16;
                    }
                    let size = magnitude_category(c);
                    t.ac.put(&mut writer, ((run << 4) | size) as u8);
                    put_magnitude(&mut writer, c, size);
                    run = 0;
                }
                if run > 0 {
                    t.ac.put(&mut writer, 0x00);
                }
            }
        }
        Ok(CodedImage {
            codec_id: BLOCK_DCT_CODEC_ID,
            quality,
            width,
            height,
            payload: writer.finish(),
        })
    }

    fn decode(&self, coded: &CodedImage) -> Result<Image> {
        let malformed = || Error::MalformedPayload("block data ends early or holds an invalid code".into());
        let steps = quant_table(coded.quality);
        let t = tables();
        let (w, h) = (coded.width as usize, coded.height as usize);
        let mut samples = vec![0u8; w * h];
        let mut reader = BitReader::new(&coded.payload);
        let mut prev_dc = 0i32;
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                let mut coeffs = [0i32; 64];
                let size = t.dc.get(&mut reader).ok_or_else(malformed)? as u32;
                if size > 11 {
                    return Err(malformed());
                }
                prev_dc += get_magnitude(&mut reader, size).ok_or_else(malformed)?;
                coeffs[0] = prev_dc * steps[0] as i32;
                let mut k = 1usize;
                while k < 64 {
                    let sym = t.ac.get(&mut reader).ok_or_else(malformed)?;
                    let run = (sym >> 4) as usize;
                    let size = (sym & 15) as u32;
                    if size == 0 {
                        if run == 15 {
                            k += 16;
                            continue;
                        }
                        break;
                    }
                    k += run;
                    if k >= 64 {
                        return Err(malformed());
                    }
                    let v = get_magnitude(&mut reader, size).ok_or_else(malformed)?;
                    let nat = ZIGZAG[k];
                    coeffs[nat] = v * steps[nat] as i32;
                    k += 1;
                }
                if k > 64 {
                    return Err(malformed());
                }
                let pixels = dct::inverse(&coeffs);
                for y in 0..8.min(h - by) {
                    for x in 0..8.min(w - bx) {
                        samples[(by + y) * w + bx + x] = (pixels[y * 8 + x] + 128).clamp(0, 255) as u8;
                    }
                }
            }
        }
        Image::new(w as u32, h as u32, samples)
    }
}

/// PSNR cap reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB, `10·log10(255² / MSE)`, capped at 99 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            expected: a.samples().len(),
            found: b.samples().len(),
        });
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}
