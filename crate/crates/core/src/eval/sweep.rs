//! Rate-accuracy sweeps over a retrieval corpus.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::codec::{psnr, QualityFactor};
use crate::container::{demux, mux};
use crate::corpus::CorpusImage;
use crate::entropy::ModelSet;
use crate::error::{Error, Result};
use crate::eval::manifest::{Manifest, Role};
use crate::eval::retrieval::{average_precision, mean_average_precision, rank, RankedList};
use crate::features::{extract, FeatureSet};
use crate::image::Image;
use crate::location::DEFAULT_SCALE_BITS;
use crate::pipeline::{decode, encode, EncodeConfig, Method, DEFAULT_THRESHOLD};

/// Database and query images with object labels. Queries are relevant to
/// every database image of the same object.
#[derive(Clone, Debug, Default)]
pub struct RetrievalCorpus {
    pub database: Vec<(u32, Image)>,
    pub queries: Vec<(u32, Image)>,
}

impl RetrievalCorpus {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let load = |role| {
            manifest
                .with_role(role)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|e| Ok((e.object, Image::read_pgm(&e.path)?)))
                .collect::<Result<Vec<_>>>()
        };
        Self::checked(load(Role::Db)?, load(Role::Query)?)
    }

    pub fn from_images(images: &[CorpusImage]) -> Result<Self> {
        let pick = |role| {
            images
                .iter()
                .filter(|i| i.role == role)
                .map(|i| (i.object, i.image.clone()))
                .collect()
        };
        Self::checked(pick(Role::Db), pick(Role::Query))
    }

    fn checked(database: Vec<(u32, Image)>, queries: Vec<(u32, Image)>) -> Result<Self> {
        if database.is_empty() || queries.is_empty() {
            return Err(Error::Corpus("corpus needs database and query images".into()));
        }
        Ok(RetrievalCorpus { database, queries })
    }

    pub fn relevant(&self, object: u32) -> BTreeSet<usize> {
        self.database
            .iter()
            .enumerate()
            .filter(|(_, (o, _))| *o == object)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Operating points to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub cta_qualities: Vec<QualityFactor>,
    pub atc_thresholds: Vec<u32>,
    pub hatc_qualities: Vec<QualityFactor>,
    pub hatc_refine_counts: Vec<usize>,
    /// Detector threshold for database images, CTA decoding and HATC encoding.
    pub threshold: u32,
    pub scale_bits: u8,
}

fn qualities(qs: &[u32]) -> Vec<QualityFactor> {
    qs.iter()
        .map(|&q| QualityFactor::new(q).expect("valid quality"))
        .collect()
}

impl Default for SweepGrid {
    fn default() -> Self {
        let q = qualities(&[5, 10, 15, 20, 50, 70]);
        SweepGrid {
            cta_qualities: q.clone(),
            atc_thresholds: vec![70, 75, 80, 85, 90, 95, 100, 105],
            hatc_qualities: q,
            hatc_refine_counts: vec![25, 50, 100, 150],
            threshold: DEFAULT_THRESHOLD,
            scale_bits: DEFAULT_SCALE_BITS,
        }
    }
}

impl SweepGrid {
    /// Cells in report order: CTA by quality, ATC by threshold, then HATC
    /// by quality and refinement count.
    pub fn cells(&self) -> Vec<EncodeConfig> {
        let base = |c: EncodeConfig| EncodeConfig {
            scale_bits: self.scale_bits,
            threshold: if c.method == Method::Atc {
                c.threshold
            } else {
                self.threshold
            },
            ..c
        };
        let cta = self.cta_qualities.iter().map(|&q| base(EncodeConfig::cta(q)));
        let atc = self.atc_thresholds.iter().map(|&t| base(EncodeConfig::atc(t)));
        let hatc = self
            .hatc_qualities
            .iter()
            .flat_map(|&q| self.hatc_refine_counts.iter().map(move |&z| EncodeConfig::hatc(q, z)))
            .map(base);
        cta.chain(atc).chain(hatc).collect()
    }
}

/// One evaluated operating point. Byte counts are means per query;
/// `bytes_total` includes the container header and layer table.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAccuracyPoint {
    pub method: Method,
    pub q: Option<u8>,
    pub threshold: u32,
    pub refine_z: Option<usize>,
    pub bytes_image: f64,
    pub bytes_loc: f64,
    pub bytes_enh: f64,
    pub bytes_total: f64,
    pub psnr_db: Option<f64>,
    pub map: f64,
}

struct QueryOutcome {
    sizes: [usize; 4],
    psnr: Option<f64>,
    ap: f64,
}

fn identity_ranking(query_id: usize, n: usize) -> RankedList {
    RankedList {
        query_id,
        entries: (0..n).collect(),
    }
}

fn run_query(
    config: &EncodeConfig,
    corpus: &RetrievalCorpus,
    database: &[FeatureSet],
    models: &ModelSet,
    query_id: usize,
) -> Result<QueryOutcome> {
    let (object, image) = &corpus.queries[query_id];
    let encoded = encode(image, config, models)?;
    let bytes = mux(&encoded.stream)?;
    let decoded = decode(&demux(&bytes)?, models, config.threshold)?;
    let sizes = encoded.rate();
    debug_assert_eq!(sizes.total(), bytes.len());
    let ranked = if decoded.features.is_empty() {
        identity_ranking(query_id, database.len())
    } else {
        rank(query_id, &decoded.features, database)?
    };
    Ok(QueryOutcome {
        sizes: [sizes.image, sizes.location, sizes.enhancement, bytes.len()],
        psnr: decoded.image.as_ref().map(|d| psnr(image, d)).transpose()?,
        ap: average_precision(&ranked, &corpus.relevant(*object))?,
    })
}

/// Features of every database image, extracted from the originals.
pub fn database_features(corpus: &RetrievalCorpus, threshold: u32) -> Result<Vec<FeatureSet>> {
    corpus
        .database
        .par_iter()
        .map(|(_, img)| extract(img, threshold))
        .collect()
}

pub fn evaluate(
    config: &EncodeConfig,
    corpus: &RetrievalCorpus,
    database: &[FeatureSet],
    models: &ModelSet,
) -> Result<RateAccuracyPoint> {
    let outcomes = (0..corpus.queries.len())
        .into_par_iter()
        .map(|i| run_query(config, corpus, database, models, i))
        .collect::<Result<Vec<_>>>()?;
    let n = outcomes.len() as f64;
    let mean = |k: usize| outcomes.iter().map(|o| o.sizes[k] as f64).sum::<f64>() / n;
    let psnrs: Option<Vec<f64>> = outcomes.iter().map(|o| o.psnr).collect();
    let aps: Vec<f64> = outcomes.iter().map(|o| o.ap).collect();
    Ok(RateAccuracyPoint {
        method: config.method,
        q: (config.method != Method::Atc).then_some(config.quality.get()),
        threshold: config.threshold,
        refine_z: (config.method == Method::Hatc).then_some(config.refine_count),
        bytes_image: mean(0),
        bytes_loc: mean(1),
        bytes_enh: mean(2),
        bytes_total: mean(3),
        psnr_db: psnrs.map(|p| p.iter().sum::<f64>() / n),
        map: mean_average_precision(&aps)?,
    })
}

/// Evaluates every grid cell. Output order follows [`SweepGrid::cells`]
/// regardless of scheduling.
pub fn sweep(corpus: &RetrievalCorpus, grid: &SweepGrid, models: &ModelSet) -> Result<Vec<RateAccuracyPoint>> {
    let database = database_features(corpus, grid.threshold)?;
    grid.cells()
        .par_iter()
        .map(|cell| evaluate(cell, corpus, &database, models))
        .collect()
}
