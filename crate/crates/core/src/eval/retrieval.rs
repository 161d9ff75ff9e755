//! Descriptor matching, ranking and average precision.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::BinaryDescriptor;

/// Ratio test: accept when `nearest / second <= RATIO_NUM / RATIO_DEN`.
pub const RATIO_NUM: u32 = 4;
pub const RATIO_DEN: u32 = 5;
/// Acceptance cap when the candidate holds a single descriptor.
pub const SINGLE_CANDIDATE_CAP: u32 = 64;

pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> Result<u32> {
    a.hamming(b)
}

/// Similarity of a candidate to a query. Larger compares better: more
/// matches first, then a smaller sum of matched distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchScore {
    pub matches: u32,
    pub distance_sum: u64,
}

impl Ord for MatchScore {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.matches
            .cmp(&other.matches)
            .then(other.distance_sum.cmp(&self.distance_sum))
    }
}

impl PartialOrd for MatchScore {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub fn match_score(query: &FeatureSet, candidate: &FeatureSet) -> Result<MatchScore> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if !candidate.is_empty() && query.dimension() != candidate.dimension() {
        return Err(Error::DimensionMismatch {
            expected: query.dimension(),
            found: candidate.dimension(),
        });
    }
    let mut score = MatchScore::default();
    for q in &query.descriptors {
        let (mut best, mut second) = (u32::MAX, u32::MAX);
        for c in &candidate.descriptors {
            let d = q.hamming_unchecked(c);
            if d < best {
                second = best;
                best = d;
            } else if d < second {
                second = d;
            }
        }
        let accepted = match candidate.len() {
            0 => false,
            1 => best <= SINGLE_CANDIDATE_CAP,
            _ => RATIO_DEN as u64 * best as u64 <= RATIO_NUM as u64 * second as u64,
        };
        if accepted {
            score.matches += 1;
            score.distance_sum += best as u64;
        }
    }
    Ok(score)
}

/// Database ids ordered from most to least similar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub query_id: usize,
    pub entries: Vec<usize>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranks `database` (indexed by position) against `query`; ties go to the
/// lower database id, so the result does not depend on enumeration order.
pub fn rank(query_id: usize, query: &FeatureSet, database: &[FeatureSet]) -> Result<RankedList> {
    let mut scored = database
        .iter()
        .enumerate()
        .map(|(id, c)| Ok((match_score(query, c)?, id)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(RankedList {
        query_id,
        entries: scored.into_iter().map(|(_, id)| id).collect(),
    })
}

/// Mean over relevant positions of the precision at that position,
/// normalised by the total number of relevant documents.
pub fn average_precision(ranked: &RankedList, relevant: &BTreeSet<usize>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::NoRelevantDocuments);
    }
    let mut hits = 0u64;
    let mut sum = 0.0;
    for (k, id) in ranked.entries.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
