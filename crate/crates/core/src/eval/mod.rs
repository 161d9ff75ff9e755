//! Retrieval evaluation and rate-accuracy sweeps.

pub mod manifest;
pub mod report;
pub mod retrieval;
pub mod sweep;

pub use manifest::{Manifest, ManifestEntry, Role};
pub use retrieval::{average_precision, hamming, match_score, mean_average_precision, rank, MatchScore, RankedList};
pub use sweep::{sweep, RateAccuracyPoint, RetrievalCorpus, SweepGrid};
