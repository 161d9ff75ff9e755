//! Prediction residuals and lossless coding of descriptor blocks.

pub mod range;

use crate::bits::BinaryDescriptor;
use crate::entropy::{DexelOrderModel, SourceKind};
use crate::error::{Error, Result};
use crate::wire::{put_u16, put_u32, u16_field, Reader};
use range::{RangeDecoder, RangeEncoder};

/// XOR of an original descriptor with its predictor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResidualVector(pub BinaryDescriptor);

impl ResidualVector {
    pub fn bits(&self) -> &BinaryDescriptor {
        &self.0
    }

    /// Number of dexels the predictor got wrong.
    pub fn weight(&self) -> u32 {
        self.0.count_ones()
    }
}

pub fn residual(original: &BinaryDescriptor, predictor: &BinaryDescriptor) -> Result<ResidualVector> {
    original.xor(predictor).map(ResidualVector)
}

pub fn apply_residual(predictor: &BinaryDescriptor, residual: &ResidualVector) -> Result<BinaryDescriptor> {
    predictor.xor(&residual.0)
}

/// An entropy-coded run of equal-length vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedDescriptorBlock {
    pub count: u16,
    pub kind: SourceKind,
    pub quality_bucket: u8,
    pub payload: Vec<u8>,
    /// CRC-32 of the packed vectors.
    pub checksum: u32,
}

const BLOCK_MAGIC: &[u8; 4] = b"HENH";

/// Bytes of header and trailer around the payload.
pub const BLOCK_OVERHEAD: usize = 4 + 2 + 1 + 1 + 4 + 4;

fn checksum(vectors: &[BinaryDescriptor]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for v in vectors {
        h.update(&v.to_bytes());
    }
    h.finalize()
}

impl CodedDescriptorBlock {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BLOCK_OVERHEAD + self.payload.len());
        out.extend_from_slice(BLOCK_MAGIC);
        put_u16(&mut out, self.count);
        out.push(self.kind.code());
        out.push(self.quality_bucket);
        put_u32(&mut out, self.payload.len() as u32);
        out.extend_from_slice(&self.payload);
        put_u32(&mut out, self.checksum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(BLOCK_MAGIC)?;
        let count = r.u16()?;
        let kind = SourceKind::from_code(r.u8()?)?;
        let quality_bucket = r.u8()?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?.to_vec();
        let checksum = r.u32()?;
        if r.remaining() != 0 {
            return Err(Error::MalformedPayload(format!(
                "{} trailing bytes after descriptor block",
                r.remaining()
            )));
        }
        Ok(CodedDescriptorBlock {
            count,
            kind,
            quality_bucket,
            payload,
            checksum,
        })
    }

    pub fn byte_len(&self) -> usize {
        BLOCK_OVERHEAD + self.payload.len()
    }
}

/// Codes each vector's dexels in model order, each under the context of the
/// previously coded dexel.
pub fn encode_block(vectors: &[BinaryDescriptor], model: &DexelOrderModel) -> Result<CodedDescriptorBlock> {
    let count = u16_field(vectors.len(), "descriptor count")?;
    let d = model.dimension();
    let mut enc = RangeEncoder::new();
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let mut prev = false;
        for (k, &j) in model.order.iter().enumerate() {
            let bit = v.get(j as usize);
            enc.encode(bit, model.prob_one(k, prev));
            prev = bit;
        }
    }
    Ok(CodedDescriptorBlock {
        count,
        kind: model.kind,
        quality_bucket: model.quality_bucket,
        payload: enc.finish(),
        checksum: checksum(vectors),
    })
}

pub fn decode_block(block: &CodedDescriptorBlock, model: &DexelOrderModel) -> Result<Vec<BinaryDescriptor>> {
    if block.kind != model.kind || block.quality_bucket != model.quality_bucket {
        return Err(Error::ModelMismatch(format!(
            "block coded with {} model at q={}, decoder holds {} model at q={}",
            block.kind, block.quality_bucket, model.kind, model.quality_bucket
        )));
    }
    let d = model.dimension();
    let mut dec = RangeDecoder::new(&block.payload);
    let mut out = Vec::with_capacity(block.count as usize);
    for _ in 0..block.count {
        let mut v = BinaryDescriptor::zeros(d);
        let mut prev = false;
        for (k, &j) in model.order.iter().enumerate() {
            let bit = dec.decode(model.prob_one(k, prev));
            v.set(j as usize, bit);
            prev = bit;
        }
        out.push(v);
    }
    let computed = checksum(&out);
    if computed != block.checksum {
        return Err(Error::Checksum {
            stored: block.checksum,
            computed,
        });
    }
    Ok(out)
}

/// Coded payload bits per vector, excluding block header and checksum.
pub fn measured_rate(vectors: &[BinaryDescriptor], model: &DexelOrderModel) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let block = encode_block(vectors, model)?;
    Ok(block.payload.len() as f64 * 8.0 / vectors.len() as f64)
}
