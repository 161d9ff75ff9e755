#![allow(dead_code)]

use std::sync::OnceLock;

use hatc::corpus::{generate, CorpusConfig, CorpusImage};
use hatc::Image;

/// A few objects at full corpus resolution, generated once per test binary.
pub fn small_corpus() -> &'static (Vec<CorpusImage>, Vec<CorpusImage>) {
    static CORPUS: OnceLock<(Vec<CorpusImage>, Vec<CorpusImage>)> = OnceLock::new();
    CORPUS.get_or_init(|| {
        generate(&CorpusConfig {
            objects: 3,
            db_views: 2,
            queries_per_object: 1,
            training_images: 6,
            seed: 7,
            ..CorpusConfig::default()
        })
        .expect("corpus generation")
    })
}

pub fn retrieval_images() -> Vec<&'static Image> {
    small_corpus().0.iter().map(|c| &c.image).collect()
}

pub fn training_images() -> Vec<Image> {
    small_corpus().1.iter().map(|c| c.image.clone()).collect()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
