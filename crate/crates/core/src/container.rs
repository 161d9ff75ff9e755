//! Multiplexing of the image, location and enhancement layers.
//!
//! Layout: a 16-byte header (magic "HATC", version, layer count, two
//! reserved zero bytes, total stream length, four reserved zero bytes),
//! then one 12-byte table entry per layer (tag, absolute offset, length),
//! then the layer bodies in table order. The table lets a reader pull the
//! image layer without touching the feature layers.

use crate::codec::CodedImage;
use crate::coder::CodedDescriptorBlock;
use crate::error::{Error, Result};
use crate::location::LocationLayer;
use crate::wire::{put_u16, put_u32, Reader};

const STREAM_MAGIC: &[u8; 4] = b"HATC";
const STREAM_VERSION: u8 = 1;

pub const HEADER_LEN: usize = 16;
pub const TABLE_ENTRY_LEN: usize = 12;

pub const IMAGE_TAG: [u8; 4] = *b"HIMG";
pub const LOCATION_TAG: [u8; 4] = *b"HLOC";
pub const ENHANCEMENT_TAG: [u8; 4] = *b"HENH";

/// Serialized size of each layer present in a stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerSizes {
    pub header: usize,
    pub image: usize,
    pub location: usize,
    pub enhancement: usize,
}

impl LayerSizes {
    pub fn total(&self) -> usize {
        self.header + self.image + self.location + self.enhancement
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HatcStream {
    pub image: Option<CodedImage>,
    pub location: Option<LocationLayer>,
    pub enhancement: Option<CodedDescriptorBlock>,
}

impl HatcStream {
    fn layers(&self) -> Vec<([u8; 4], Vec<u8>)> {
        let mut out = Vec::with_capacity(3);
        if let Some(l) = &self.image {
            out.push((IMAGE_TAG, l.to_bytes()));
        }
        if let Some(l) = &self.location {
            out.push((LOCATION_TAG, l.to_bytes()));
        }
        if let Some(l) = &self.enhancement {
            out.push((ENHANCEMENT_TAG, l.to_bytes()));
        }
        out
    }

    /// Byte accounting without serializing.
    pub fn layer_sizes(&self) -> LayerSizes {
        let n = self.image.is_some() as usize + self.location.is_some() as usize + self.enhancement.is_some() as usize;
        LayerSizes {
            header: HEADER_LEN + n * TABLE_ENTRY_LEN,
            image: self.image.as_ref().map_or(0, |l| l.byte_len()),
            location: self.location.as_ref().map_or(0, |l| l.byte_len()),
            enhancement: self.enhancement.as_ref().map_or(0, |l| l.byte_len()),
        }
    }
}

pub fn mux(stream: &HatcStream) -> Result<Vec<u8>> {
    let layers = stream.layers();
    if layers.is_empty() {
        return Err(Error::NoLayers);
    }
    let table_end = HEADER_LEN + layers.len() * TABLE_ENTRY_LEN;
    let total = table_end + layers.iter().map(|(_, b)| b.len()).sum::<usize>();
    let total32 =
        u32::try_from(total).map_err(|_| Error::InvalidConfig(format!("stream of {total} bytes is too large")))?;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(STREAM_MAGIC);
    out.push(STREAM_VERSION);
    out.push(layers.len() as u8);
    put_u16(&mut out, 0);
    put_u32(&mut out, total32);
    put_u32(&mut out, 0);
    let mut offset = table_end;
    for (tag, body) in &layers {
        out.extend_from_slice(tag);
        put_u32(&mut out, offset as u32);
        put_u32(&mut out, body.len() as u32);
        offset += body.len();
    }
    for (_, body) in &layers {
        out.extend_from_slice(body);
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

pub fn demux(bytes: &[u8]) -> Result<HatcStream> {
    let mut r = Reader::new(bytes);
    r.magic(STREAM_MAGIC)?;
    let version = r.u8()?;
    if version != STREAM_VERSION {
        return Err(Error::MalformedPayload(format!("unsupported stream version {version}")));
    }
    let count = r.u8()? as usize;
    r.u16()?;
    let total = r.u32()? as usize;
    r.u32()?;
    if total > bytes.len() {
        return Err(Error::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    if count == 0 {
        return Err(Error::NoLayers);
    }
    let mut stream = HatcStream::default();
    for _ in 0..count {
        let tag = r.array::<4>()?;
        let offset = r.u32()? as usize;
        let len = r.u32()? as usize;
        let end = offset
            .checked_add(len)
            .filter(|&e| e <= total)
            .ok_or(Error::Truncated {
                needed: offset.saturating_add(len),
                available: total,
            })?;
        let body = &bytes[offset..end];
        match tag {
            IMAGE_TAG if stream.image.is_none() => stream.image = Some(CodedImage::from_bytes(body)?),
            LOCATION_TAG if stream.location.is_none() => stream.location = Some(LocationLayer::from_bytes(body)?),
            ENHANCEMENT_TAG if stream.enhancement.is_none() => {
                stream.enhancement = Some(CodedDescriptorBlock::from_bytes(body)?)
            }
            IMAGE_TAG | LOCATION_TAG | ENHANCEMENT_TAG => return Err(Error::DuplicateLayer(tag)),
            other => return Err(Error::UnknownLayer(other)),
        }
    }
    Ok(stream)
}
