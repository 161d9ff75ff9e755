//! End-to-end encoders and decoders for the three transmission paradigms.
//!
//! * CTA ships the coded image only; the receiver extracts features from
//!   the decoded pixels.
//! * ATC ships keypoint locations and losslessly coded descriptors only.
//! * HATC ships the coded image, the locations of the `Z` strongest
//!   keypoints, and XOR residuals that upgrade descriptors computed on the
//!   decoded image to those of the original.

use std::fmt;
use std::str::FromStr;

use crate::codec::{decode_image, encode_image, CodedImage, QualityFactor};
use crate::coder::{apply_residual, decode_block, encode_block, residual, CodedDescriptorBlock, ResidualVector};
use crate::container::{HatcStream, LayerSizes};
use crate::entropy::{DexelOrderModel, ModelSet, SourceKind};
use crate::error::{Error, Result};
use crate::features::{describe, extract, FeatureSet, Keypoint};
use crate::image::Image;
use crate::location::{decode_locations, encode_locations, LocationLayer, DEFAULT_SCALE_BITS};
use crate::BinaryDescriptor;

/// Detector threshold used when none is given.
pub const DEFAULT_THRESHOLD: u32 = 70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cta,
    Atc,
    Hatc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cta => "CTA",
            Method::Atc => "ATC",
            Method::Hatc => "HATC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cta" => Ok(Method::Cta),
            "atc" => Ok(Method::Atc),
            "hatc" => Ok(Method::Hatc),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeConfig {
    pub method: Method,
    /// Image quality (CTA and HATC).
    pub quality: QualityFactor,
    /// Detector threshold (ATC and HATC at the encoder, CTA at the decoder).
    pub threshold: u32,
    /// Number of refined features (HATC).
    pub refine_count: usize,
    pub scale_bits: u8,
}

impl EncodeConfig {
    pub fn cta(quality: QualityFactor) -> Self {
        EncodeConfig {
            method: Method::Cta,
            quality,
            threshold: DEFAULT_THRESHOLD,
            refine_count: 0,
            scale_bits: DEFAULT_SCALE_BITS,
        }
    }

    pub fn atc(threshold: u32) -> Self {
        EncodeConfig {
            method: Method::Atc,
            threshold,
            ..Self::cta(QualityFactor::default())
        }
    }

    pub fn hatc(quality: QualityFactor, refine_count: usize) -> Self {
        EncodeConfig {
            method: Method::Hatc,
            refine_count,
            ..Self::cta(quality)
        }
    }
}

/// Encoder output: the stream and the features it lets the receiver rebuild
/// (empty for CTA, whose features depend on the receiver's threshold).
#[derive(Clone, Debug)]
pub struct Encoded {
    pub stream: HatcStream,
    pub features: FeatureSet,
}

impl Encoded {
    pub fn rate(&self) -> LayerSizes {
        self.stream.layer_sizes()
    }
}

#[derive(Clone, Debug)]
pub struct DecodedResult {
    /// Reconstructed pixels; absent for ATC.
    pub image: Option<Image>,
    pub features: FeatureSet,
    pub rate: LayerSizes,
}

/// The `z` features with the highest response, in canonical order.
pub fn select_top_z(features: &FeatureSet, z: usize) -> FeatureSet {
    let n = z.min(features.len());
    FeatureSet {
        keypoints: features.keypoints[..n].to_vec(),
        descriptors: features.descriptors[..n].to_vec(),
    }
}

fn require_kind(model: &DexelOrderModel, kind: SourceKind) -> Result<()> {
    if model.kind != kind {
        return Err(Error::ModelMismatch(format!(
            "expected a {kind} model, got a {} model",
            model.kind
        )));
    }
    Ok(())
}

pub fn encode_cta(image: &Image, quality: QualityFactor) -> Result<Encoded> {
    Ok(Encoded {
        stream: HatcStream {
            image: Some(encode_image(image, quality)?),
            ..Default::default()
        },
        features: FeatureSet::default(),
    })
}

pub fn decode_cta(stream: &HatcStream, threshold: u32) -> Result<DecodedResult> {
    let coded = stream.image.as_ref().ok_or(Error::LayerMissing("image"))?;
    let image = decode_image(coded)?;
    // pixels are still worth returning when the image is below detector size
    let features = match extract(&image, threshold) {
        Err(Error::ImageTooSmall { .. }) => FeatureSet::default(),
        other => other?,
    };
    Ok(DecodedResult {
        image: Some(image),
        features,
        rate: stream.layer_sizes(),
    })
}

/// Location layer for `keypoints` and the keypoints as the decoder will see them.
fn quantized_locations(
    keypoints: &[Keypoint],
    image: &Image,
    scale_bits: u8,
) -> Result<(LocationLayer, Vec<Keypoint>)> {
    let layer = encode_locations(keypoints, image.width(), image.height(), scale_bits)?;
    let decoded = decode_locations(&layer)?;
    Ok((layer, decoded))
}

pub fn encode_atc(image: &Image, threshold: u32, scale_bits: u8, model: &DexelOrderModel) -> Result<Encoded> {
    require_kind(model, SourceKind::Intra)?;
    let features = extract(image, threshold)?;
    let (location, _) = quantized_locations(&features.keypoints, image, scale_bits)?;
    let block = encode_block(&features.descriptors, model)?;
    Ok(Encoded {
        stream: HatcStream {
            image: None,
            location: Some(location),
            enhancement: Some(block),
        },
        features,
    })
}

pub fn decode_atc(stream: &HatcStream, model: &DexelOrderModel) -> Result<DecodedResult> {
    let location = stream.location.as_ref().ok_or(Error::LayerMissing("location"))?;
    let block = stream.enhancement.as_ref().ok_or(Error::LayerMissing("enhancement"))?;
    let keypoints = decode_locations(location)?;
    let descriptors = decode_block(block, model)?;
    if descriptors.len() != keypoints.len() {
        return Err(Error::MalformedLayer(format!(
            "{} locations but {} descriptors",
            keypoints.len(),
            descriptors.len()
        )));
    }
    Ok(DecodedResult {
        image: None,
        features: FeatureSet::new(keypoints, descriptors)?,
        rate: stream.layer_sizes(),
    })
}

/// Descriptors of the `refine_count` strongest keypoints, computed on the
/// original and on the decoded image at the positions the decoder receives.
pub(crate) struct RefinedPair {
    pub location: LocationLayer,
    pub original: FeatureSet,
    pub predicted: Vec<BinaryDescriptor>,
}

pub(crate) fn refined_pair(image: &Image, decoded: &Image, config: &EncodeConfig) -> Result<RefinedPair> {
    let selected = select_top_z(&extract(image, config.threshold)?, config.refine_count);
    // A coarse scale grid can move a keypoint to an octave whose support no
    // longer fits, so drop those and requantize.
    let (mut location, mut keypoints) = quantized_locations(&selected.keypoints, image, config.scale_bits)?;
    let mut original = describe(image, &keypoints);
    if !original.dropped.is_empty() {
        let kept: Vec<Keypoint> = (0..keypoints.len())
            .filter(|i| original.dropped.binary_search(i).is_err())
            .map(|i| selected.keypoints[i])
            .collect();
        (location, keypoints) = quantized_locations(&kept, image, config.scale_bits)?;
        original = describe(image, &keypoints);
    }
    let predicted = describe(decoded, &keypoints);
    debug_assert!(original.dropped.is_empty() && predicted.dropped.is_empty());
    Ok(RefinedPair {
        location,
        original: FeatureSet {
            keypoints: original.keypoints,
            descriptors: original.descriptors,
        },
        predicted: predicted.descriptors,
    })
}

pub fn encode_hatc(image: &Image, config: &EncodeConfig, model: &DexelOrderModel) -> Result<Encoded> {
    require_kind(model, SourceKind::Residual)?;
    let coded = encode_image(image, config.quality)?;
    let decoded = decode_image(&coded)?;
    let pair = refined_pair(image, &decoded, config)?;
    let residuals = pair
        .original
        .descriptors
        .iter()
        .zip(&pair.predicted)
        .map(|(o, p)| residual(o, p).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let block = encode_block(&residuals, model)?;
    Ok(Encoded {
        stream: HatcStream {
            image: Some(coded),
            location: Some(pair.location),
            enhancement: Some(block),
        },
        features: pair.original,
    })
}

pub fn decode_hatc(stream: &HatcStream, model: &DexelOrderModel) -> Result<DecodedResult> {
    let coded = stream.image.as_ref().ok_or(Error::LayerMissing("image"))?;
    let location = stream.location.as_ref().ok_or(Error::LayerMissing("location"))?;
    let block = stream.enhancement.as_ref().ok_or(Error::LayerMissing("enhancement"))?;
    check_geometry(coded, location)?;
    let image = decode_image(coded)?;
    let keypoints = decode_locations(location)?;
    let predicted = describe(&image, &keypoints);
    if !predicted.dropped.is_empty() {
        return Err(Error::MalformedLayer(format!(
            "{} transmitted keypoints lie too close to the border",
            predicted.dropped.len()
        )));
    }
    let residuals = decode_block(block, model)?;
    if residuals.len() != predicted.descriptors.len() {
        return Err(Error::MalformedLayer(format!(
            "{} locations but {} residuals",
            predicted.descriptors.len(),
            residuals.len()
        )));
    }
    let descriptors = predicted
        .descriptors
        .iter()
        .zip(residuals)
        .map(|(p, r)| apply_residual(p, &ResidualVector(r)))
        .collect::<Result<Vec<BinaryDescriptor>>>()?;
    Ok(DecodedResult {
        image: Some(image),
        features: FeatureSet::new(predicted.keypoints, descriptors)?,
        rate: stream.layer_sizes(),
    })
}

fn check_geometry(coded: &CodedImage, location: &LocationLayer) -> Result<()> {
    if (coded.width, coded.height) != (location.image_width, location.image_height) {
        return Err(Error::MalformedLayer(format!(
            "location layer is for {}x{}, image layer is {}x{}",
            location.image_width, location.image_height, coded.width, coded.height
        )));
    }
    Ok(())
}

/// Encodes with whichever model the method needs from `models`.
pub fn encode(image: &Image, config: &EncodeConfig, models: &ModelSet) -> Result<Encoded> {
    match config.method {
        Method::Cta => encode_cta(image, config.quality),
        Method::Atc => {
            let model = models
                .intra()
                .ok_or(Error::ModelMismatch("no intra model available".into()))?;
            encode_atc(image, config.threshold, config.scale_bits, model)
        }
        Method::Hatc => {
            let model = models
                .nearest_residual(config.quality.get())
                .ok_or(Error::ModelMismatch("no residual model available".into()))?;
            encode_hatc(image, config, model)
        }
    }
}

/// The method a stream was produced with, judged from the layers present.
pub fn stream_method(stream: &HatcStream) -> Result<Method> {
    match (&stream.image, &stream.location, &stream.enhancement) {
        (Some(_), None, None) => Ok(Method::Cta),
        (None, Some(_), Some(_)) => Ok(Method::Atc),
        (Some(_), Some(_), Some(_)) => Ok(Method::Hatc),
        (None, None, None) => Err(Error::NoLayers),
        (_, None, _) => Err(Error::LayerMissing("location")),
        _ => Err(Error::LayerMissing("enhancement")),
    }
}

/// Decodes any stream, picking the model recorded in its enhancement layer.
/// `threshold` only matters for CTA streams.
pub fn decode(stream: &HatcStream, models: &ModelSet, threshold: u32) -> Result<DecodedResult> {
    let model_for = |block: &CodedDescriptorBlock| {
        models
            .models()
            .iter()
            .find(|m| m.kind == block.kind && m.quality_bucket == block.quality_bucket)
            .ok_or_else(|| {
                Error::ModelMismatch(format!(
                    "stream needs a {} model at q={}, none loaded",
                    block.kind, block.quality_bucket
                ))
            })
    };
    match stream_method(stream)? {
        Method::Cta => decode_cta(stream, threshold),
        Method::Atc => decode_atc(stream, model_for(stream.enhancement.as_ref().unwrap())?),
        Method::Hatc => decode_hatc(stream, model_for(stream.enhancement.as_ref().unwrap())?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{demux, mux};

    fn scene() -> Image {
        Image::from_fn(96, 80, |x, y| {
            let block = ((x / 12) + (y / 10)) % 3;
            let ring = ((x as i32 - 48).pow(2) + (y as i32 - 40).pow(2)) < 200;
            (block as u8 * 70 + if ring { 40 } else { 10 }).wrapping_add(((x * 7 + y * 3) % 5) as u8)
        })
    }

    fn residual_model() -> DexelOrderModel {
        DexelOrderModel::uniform(crate::DESCRIPTOR_BITS, SourceKind::Residual, 50)
    }

    #[test]
    fn top_z_bounds() {
        let f = extract(&scene(), 20).unwrap();
        assert!(f.len() > 3);
        assert_eq!(select_top_z(&f, 0).len(), 0);
        assert_eq!(select_top_z(&f, f.len() + 5).len(), f.len());
        let three = select_top_z(&f, 3);
        assert_eq!(three.keypoints, f.keypoints[..3]);
    }

    #[test]
    fn hatc_round_trip_reconstructs_originals() {
        let img = scene();
        let cfg = EncodeConfig {
            threshold: 20,
            ..EncodeConfig::hatc(QualityFactor::new(10).unwrap(), 6)
        };
        let enc = encode_hatc(&img, &cfg, &residual_model()).unwrap();
        assert!(!enc.features.is_empty());
        let stream = demux(&mux(&enc.stream).unwrap()).unwrap();
        let dec = decode_hatc(&stream, &residual_model()).unwrap();
        assert_eq!(dec.features.descriptors, enc.features.descriptors);
        assert_eq!(enc.rate().total(), mux(&enc.stream).unwrap().len());
    }

    #[test]
    fn hatc_zero_refinement_has_empty_feature_layers() {
        let img = scene();
        let q = QualityFactor::new(30).unwrap();
        let enc = encode_hatc(&img, &EncodeConfig::hatc(q, 0), &residual_model()).unwrap();
        assert_eq!(enc.stream.location.as_ref().unwrap().count, 0);
        assert_eq!(enc.stream.enhancement.as_ref().unwrap().count, 0);
        assert_eq!(enc.stream.image, encode_cta(&img, q).unwrap().stream.image);
    }

    #[test]
    fn cta_decoder_extracts_from_decoded_pixels() {
        let img = scene();
        let enc = encode_cta(&img, QualityFactor::new(20).unwrap()).unwrap();
        let dec = decode_cta(&enc.stream, 20).unwrap();
        let expected = extract(dec.image.as_ref().unwrap(), 20).unwrap();
        assert_eq!(dec.features, expected);
        assert_eq!(stream_method(&enc.stream).unwrap(), Method::Cta);
    }

    #[test]
    fn atc_is_lossless_without_image() {
        let model = DexelOrderModel::uniform(crate::DESCRIPTOR_BITS, SourceKind::Intra, 0);
        let enc = encode_atc(&scene(), 20, 8, &model).unwrap();
        let dec = decode(&enc.stream, &ModelSet::new(vec![model]), 0).unwrap();
        assert!(dec.image.is_none());
        assert_eq!(dec.features.descriptors, enc.features.descriptors);
    }

    #[test]
    fn wrong_model_kind_is_rejected() {
        let intra = DexelOrderModel::uniform(crate::DESCRIPTOR_BITS, SourceKind::Intra, 0);
        let cfg = EncodeConfig::hatc(QualityFactor::new(50).unwrap(), 5);
        assert!(matches!(
            encode_hatc(&scene(), &cfg, &intra),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn missing_layers_reported() {
        let enc = encode_cta(&scene(), QualityFactor::new(20).unwrap()).unwrap();
        assert!(matches!(
            decode_hatc(&enc.stream, &residual_model()),
            Err(Error::LayerMissing("location"))
        ));
    }

    #[test]
    fn method_names_parse() {
        for m in [Method::Cta, Method::Atc, Method::Hatc] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("jpeg".parse::<Method>().is_err());
    }
}
