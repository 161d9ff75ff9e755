//! Training of residual and intra descriptor models from a set of images.

use rayon::prelude::*;

use crate::codec::{decode_image, encode_image, QualityFactor};
use crate::coder::residual;
use crate::entropy::{DexelOrderModel, DexelStats, SourceKind, MIN_TRAINING_VECTORS};
use crate::error::{Error, Result};
use crate::features::extract;
use crate::image::Image;
use crate::pipeline::{refined_pair, EncodeConfig};
use crate::{BinaryDescriptor, DESCRIPTOR_BITS};

/// Diagnostics printed after training a model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub kind: SourceKind,
    pub quality_bucket: u8,
    pub vectors: u64,
    /// Bits per vector under the first-order chain with the learned order.
    pub chain_bound: f64,
    /// The same bound with dexels coded in their natural order.
    pub identity_bound: f64,
    /// Sum of per-dexel entropies, ignoring dependencies.
    pub independent_bound: f64,
}

/// XOR residuals between original-image and decoded-image descriptors at
/// every describable keypoint of `image`, exactly as the HATC encoder forms them.
pub fn residual_vectors(
    image: &Image,
    quality: QualityFactor,
    threshold: u32,
    scale_bits: u8,
) -> Result<Vec<BinaryDescriptor>> {
    let decoded = decode_image(&encode_image(image, quality)?)?;
    let config = EncodeConfig {
        threshold,
        scale_bits,
        ..EncodeConfig::hatc(quality, usize::MAX)
    };
    let pair = refined_pair(image, &decoded, &config)?;
    pair.original
        .descriptors
        .iter()
        .zip(&pair.predicted)
        .map(|(o, p)| residual(o, p).map(|r| r.0))
        .collect()
}

fn merged(per_image: Vec<DexelStats>) -> Result<DexelStats> {
    let mut total = DexelStats::new(DESCRIPTOR_BITS);
    for s in &per_image {
        total.merge(s)?;
    }
    if total.sample_count() < MIN_TRAINING_VECTORS as u64 {
        return Err(Error::InsufficientData {
            found: total.sample_count() as usize,
            needed: MIN_TRAINING_VECTORS,
        });
    }
    Ok(total)
}

fn stats(vectors: &[BinaryDescriptor]) -> Result<DexelStats> {
    let mut s = DexelStats::new(DESCRIPTOR_BITS);
    for v in vectors {
        s.accumulate(v)?;
    }
    Ok(s)
}

fn finish(total: &DexelStats, kind: SourceKind, quality_bucket: u8) -> Result<(DexelOrderModel, TrainSummary)> {
    let model = DexelOrderModel::from_stats(total, kind, quality_bucket)?;
    let order: Vec<usize> = model.order.iter().map(|&j| j as usize).collect();
    let identity: Vec<usize> = (0..total.dimension()).collect();
    let independent = (0..total.dimension())
        .map(|j| total.marginal_entropy(j))
        .sum::<Result<f64>>()?;
    let summary = TrainSummary {
        kind,
        quality_bucket,
        vectors: total.sample_count(),
        chain_bound: total.chain_bound(&order)?,
        identity_bound: total.chain_bound(&identity)?,
        independent_bound: independent,
    };
    Ok((model, summary))
}

/// Statistics of decoded-image prediction residuals at quality `quality`.
pub fn residual_stats(images: &[Image], quality: QualityFactor, threshold: u32, scale_bits: u8) -> Result<DexelStats> {
    merged(
        images
            .par_iter()
            .map(|img| stats(&residual_vectors(img, quality, threshold, scale_bits)?))
            .collect::<Result<_>>()?,
    )
}

pub fn train_residual(
    images: &[Image],
    quality: QualityFactor,
    threshold: u32,
    scale_bits: u8,
) -> Result<(DexelOrderModel, TrainSummary)> {
    finish(
        &residual_stats(images, quality, threshold, scale_bits)?,
        SourceKind::Residual,
        quality.get(),
    )
}

/// Trains on descriptors of the original images; no image coding involved.
pub fn train_intra(images: &[Image], threshold: u32) -> Result<(DexelOrderModel, TrainSummary)> {
    let total = merged(
        images
            .par_iter()
            .map(|img| stats(&extract(img, threshold)?.descriptors))
            .collect::<Result<_>>()?,
    )?;
    finish(&total, SourceKind::Intra, 0)
}

/// Conventional file name for a model.
pub fn model_file_name(kind: SourceKind, quality_bucket: u8) -> String {
    match kind {
        SourceKind::Residual => format!("residual_q{quality_bucket:03}.hmdl"),
        SourceKind::Intra => "intra.hmdl".to_string(),
    }
}
