//! Dexel statistics, element and conditional entropies, greedy coding
//! order and the trained coding model.
//!
//! The model treats a descriptor (or residual) as a first-order Markov
//! source along a coding order: the first coded dexel has a marginal
//! probability, every later one is conditioned on the value of the dexel
//! coded just before it. The order is chosen greedily: the lowest-entropy
//! dexel first, then repeatedly the unused dexel with the lowest entropy
//! conditioned on the previous pick.

use std::path::Path;

use rand::Rng;

use crate::bits::BinaryDescriptor;
use crate::error::{Error, Result};
use crate::wire::{put_u16, u16_field, Reader};

/// Binary entropy in bits of a source emitting 1 with probability `p1`.
pub fn binary_entropy(p1: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(p1) + term(1.0 - p1)
}

/// Counts of ones per dexel and of co-occurring ones per dexel pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DexelStats {
    dimension: usize,
    ones: Vec<u64>,
    /// Upper triangle (j1 < j2) at `j1 * dimension + j2`.
    both: Vec<u64>,
    samples: u64,
}

impl DexelStats {
    pub fn new(dimension: usize) -> Self {
        DexelStats {
            dimension,
            ones: vec![0; dimension],
            both: vec![0; dimension * dimension],
            samples: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }

    pub fn accumulate(&mut self, vector: &BinaryDescriptor) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        let set: Vec<usize> = vector.ones_iter().collect();
        for (a, &j1) in set.iter().enumerate() {
            self.ones[j1] += 1;
            let row = &mut self.both[j1 * self.dimension..(j1 + 1) * self.dimension];
            for &j2 in &set[a + 1..] {
                row[j2] += 1;
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// Adds another object's counts to this one.
    pub fn merge(&mut self, other: &DexelStats) -> Result<()> {
        if other.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        for (a, b) in self.ones.iter_mut().zip(&other.ones) {
            *a += b;
        }
        for (a, b) in self.both.iter_mut().zip(&other.both) {
            *a += b;
        }
        self.samples += other.samples;
        Ok(())
    }

    /// `[zeros, ones]` observed at position `j`.
    pub fn marginal_counts(&self, j: usize) -> [u64; 2] {
        [self.samples - self.ones[j], self.ones[j]]
    }

    /// Joint counts `n[x][y]` of (dexel j1 = x, dexel j2 = y).
    pub fn joint_counts(&self, j1: usize, j2: usize) -> [[u64; 2]; 2] {
        let n11 = match j1.cmp(&j2) {
            std::cmp::Ordering::Less => self.both[j1 * self.dimension + j2],
            std::cmp::Ordering::Greater => self.both[j2 * self.dimension + j1],
            std::cmp::Ordering::Equal => self.ones[j1],
        };
        let n10 = self.ones[j1] - n11;
        let n01 = self.ones[j2] - n11;
        let n00 = self.samples - n11 - n10 - n01;
        [[n00, n01], [n10, n11]]
    }

    /// Empirical probability that dexel `j` is 1.
    pub fn probability_one(&self, j: usize) -> Result<f64> {
        self.check_nonempty()?;
        Ok(self.ones[j] as f64 / self.samples as f64)
    }

    pub fn marginal_entropy(&self, j: usize) -> Result<f64> {
        self.check_nonempty()?;
        self.check_position(j)?;
        Ok(binary_entropy(self.ones[j] as f64 / self.samples as f64))
    }

    /// H(π_j1 | π_j2) = Σ p(x, y) log2(p(y) / p(x, y)).
    pub fn conditional_entropy(&self, j1: usize, j2: usize) -> Result<f64> {
        self.check_nonempty()?;
        self.check_position(j1)?;
        self.check_position(j2)?;
        if j1 == j2 {
            return Err(Error::SamePosition(j1));
        }
        Ok(self.conditional_entropy_unchecked(j1, j2))
    }

    fn conditional_entropy_unchecked(&self, j1: usize, j2: usize) -> f64 {
        let joint = self.joint_counts(j1, j2);
        let marg = self.marginal_counts(j2);
        let n = self.samples as f64;
        let mut h = 0.0;
        for row in &joint {
            for (y, &nxy) in row.iter().enumerate() {
                if nxy > 0 {
                    h += nxy as f64 / n * (marg[y] as f64 / nxy as f64).log2();
                }
            }
        }
        h.max(0.0)
    }

    /// Greedy coding order: lowest marginal entropy first, then the unused
    /// dexel of lowest entropy given the previously chosen one. Ties go to
    /// the lowest position index.
    pub fn greedy_order(&self) -> Result<Vec<usize>> {
        self.check_nonempty()?;
        let d = self.dimension;
        if d == 0 {
            return Ok(Vec::new());
        }
        let mut used = vec![false; d];
        let mut order = Vec::with_capacity(d);
        let first = argmin((0..d).map(|j| (j, binary_entropy(self.ones[j] as f64 / self.samples as f64))));
        used[first] = true;
        order.push(first);
        let mut prev = first;
        for _ in 1..d {
            let next = argmin(
                (0..d)
                    .filter(|&j| !used[j])
                    .map(|j| (j, self.conditional_entropy_unchecked(j, prev))),
            );
            used[next] = true;
            order.push(next);
            prev = next;
        }
        Ok(order)
    }

    /// First-order chain bound H(π̃_1) + Σ H(π̃_j | π̃_{j-1}) in bits per vector.
    pub fn chain_bound(&self, order: &[usize]) -> Result<f64> {
        self.check_nonempty()?;
        validate_permutation(order, self.dimension)?;
        let Some(&first) = order.first() else {
            return Ok(0.0);
        };
        let mut bound = binary_entropy(self.ones[first] as f64 / self.samples as f64);
        for w in order.windows(2) {
            bound += self.conditional_entropy_unchecked(w[1], w[0]);
        }
        Ok(bound)
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::EmptyStats);
        }
        Ok(())
    }

    fn check_position(&self, j: usize) -> Result<()> {
        if j >= self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: j,
            });
        }
        Ok(())
    }
}

fn argmin(candidates: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, h) in candidates {
        if best.0 == usize::MAX || h < best.1 {
            best = (j, h);
        }
    }
    best.0
}

pub fn validate_permutation(order: &[usize], dimension: usize) -> Result<()> {
    if order.len() != dimension {
        return Err(Error::InvalidPermutation(order.len()));
    }
    let mut seen = vec![false; dimension];
    for &j in order {
        if j >= dimension || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidPermutation(order.len()));
        }
    }
    Ok(())
}

/// What a model's training vectors were.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// XOR of original and decoded-image descriptors.
    Residual,
    /// Original descriptors coded on their own.
    Intra,
}

impl SourceKind {
    pub fn code(self) -> u8 {
        match self {
            SourceKind::Residual => 0,
            SourceKind::Intra => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SourceKind::Residual),
            1 => Ok(SourceKind::Intra),
            other => Err(Error::MalformedPayload(format!("unknown source kind {other}"))),
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::Residual => "residual",
            SourceKind::Intra => "intra",
        })
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(SourceKind::Residual),
            "intra" => Ok(SourceKind::Intra),
            other => Err(Error::InvalidConfig(format!("unknown source kind {other:?}"))),
        }
    }
}

/// Identifies the model a coded block was produced with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelId {
    pub kind: SourceKind,
    /// Quality factor of residual training data; 0 for intra models.
    pub quality_bucket: u8,
    pub dimension: usize,
}

/// Fixed-point scale of model probabilities.
pub const PROB_ONE: u32 = 1 << 16;

/// Trained coding order and static context probabilities. Probabilities
/// are P(bit = 1) in units of 1/65536, always within [1, 65535].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DexelOrderModel {
    pub kind: SourceKind,
    pub quality_bucket: u8,
    pub order: Vec<u16>,
    pub first_prob: u16,
    /// `cond_probs[k - 1][b]`: P(dexel order[k] = 1 | dexel order[k - 1] = b).
    pub cond_probs: Vec<[u16; 2]>,
}

/// Add-one smoothed `num / den`, rounded to 16-bit fixed point.
fn smoothed_q16(num: u64, den: u64) -> u16 {
    let n = (num + 1) as u128 * PROB_ONE as u128;
    let d = (den + 2) as u128;
    ((n + d / 2) / d).clamp(1, PROB_ONE as u128 - 1) as u16
}

pub const MIN_TRAINING_VECTORS: usize = 2;

const MODEL_MAGIC: &[u8; 4] = b"HMDL";
const MODEL_VERSION: u8 = 1;

impl DexelOrderModel {
    /// Builds a model from statistics using the greedy order.
    pub fn from_stats(stats: &DexelStats, kind: SourceKind, quality_bucket: u8) -> Result<Self> {
        if stats.sample_count() < MIN_TRAINING_VECTORS as u64 {
            return Err(Error::InsufficientData {
                found: stats.sample_count() as usize,
                needed: MIN_TRAINING_VECTORS,
            });
        }
        let order = stats.greedy_order()?;
        Self::with_order(stats, &order, kind, quality_bucket)
    }

    /// Builds a model from statistics with an explicit coding order.
    pub fn with_order(stats: &DexelStats, order: &[usize], kind: SourceKind, quality_bucket: u8) -> Result<Self> {
        stats.check_nonempty()?;
        validate_permutation(order, stats.dimension())?;
        let n = stats.sample_count();
        let first_prob = order
            .first()
            .map_or(PROB_ONE as u16 / 2, |&j| smoothed_q16(stats.ones[j], n));
        let cond_probs = order
            .windows(2)
            .map(|w| {
                let (prev, cur) = (w[0], w[1]);
                let joint = stats.joint_counts(cur, prev);
                let prev_counts = stats.marginal_counts(prev);
                [
                    smoothed_q16(joint[1][0], prev_counts[0]),
                    smoothed_q16(joint[1][1], prev_counts[1]),
                ]
            })
            .collect();
        Ok(DexelOrderModel {
            kind,
            quality_bucket,
            order: order
                .iter()
                .map(|&j| u16_field(j, "dexel position"))
                .collect::<Result<_>>()?,
            first_prob,
            cond_probs,
        })
    }

    /// A model with identity order and all probabilities at one half.
    pub fn uniform(dimension: usize, kind: SourceKind, quality_bucket: u8) -> Self {
        DexelOrderModel {
            kind,
            quality_bucket,
            order: (0..dimension as u16).collect(),
            first_prob: (PROB_ONE / 2) as u16,
            cond_probs: vec![[(PROB_ONE / 2) as u16; 2]; dimension.saturating_sub(1)],
        }
    }

    pub fn dimension(&self) -> usize {
        self.order.len()
    }

    pub fn id(&self) -> ModelId {
        ModelId {
            kind: self.kind,
            quality_bucket: self.quality_bucket,
            dimension: self.dimension(),
        }
    }

    /// P(bit = 1) for the `k`-th coded dexel given the previously coded bit.
    #[inline]
    pub fn prob_one(&self, k: usize, prev: bool) -> u16 {
        if k == 0 {
            self.first_prob
        } else {
            self.cond_probs[k - 1][prev as usize]
        }
    }

    /// Ideal code length of `vector` under the model, in bits.
    pub fn code_length(&self, vector: &BinaryDescriptor) -> Result<f64> {
        if vector.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: vector.len(),
            });
        }
        let mut bits = 0.0;
        let mut prev = false;
        for (k, &j) in self.order.iter().enumerate() {
            let bit = vector.get(j as usize);
            let p1 = self.prob_one(k, prev) as f64 / PROB_ONE as f64;
            bits -= if bit { p1 } else { 1.0 - p1 }.log2();
            prev = bit;
        }
        Ok(bits)
    }

    /// Expected code length in bits of a vector drawn from the model itself.
    pub fn entropy(&self) -> f64 {
        let d = self.dimension();
        if d == 0 {
            return 0.0;
        }
        let mut p_prev_one = self.first_prob as f64 / PROB_ONE as f64;
        let mut h = binary_entropy(p_prev_one);
        for probs in &self.cond_probs {
            let p0 = probs[0] as f64 / PROB_ONE as f64;
            let p1 = probs[1] as f64 / PROB_ONE as f64;
            h += (1.0 - p_prev_one) * binary_entropy(p0) + p_prev_one * binary_entropy(p1);
            p_prev_one = (1.0 - p_prev_one) * p0 + p_prev_one * p1;
        }
        h
    }

    /// Draws a vector from the model's Markov chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinaryDescriptor {
        let mut v = BinaryDescriptor::zeros(self.dimension());
        let mut prev = false;
        for (k, &j) in self.order.iter().enumerate() {
            let bit = rng.random_range(0..PROB_ONE) < self.prob_one(k, prev) as u32;
            v.set(j as usize, bit);
            prev = bit;
        }
        v
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dimension();
        let mut out = Vec::with_capacity(9 + 2 * d + 4 * d);
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.push(self.kind.code());
        out.push(self.quality_bucket);
        put_u16(&mut out, d as u16);
        for &j in &self.order {
            put_u16(&mut out, j);
        }
        put_u16(&mut out, self.first_prob);
        for p in &self.cond_probs {
            put_u16(&mut out, p[0]);
            put_u16(&mut out, p[1]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let version = r.u8()?;
        if version != MODEL_VERSION {
            return Err(Error::MalformedPayload(format!("unsupported model version {version}")));
        }
        let kind = SourceKind::from_code(r.u8()?)?;
        let quality_bucket = r.u8()?;
        let d = r.u16()? as usize;
        let order: Vec<u16> = (0..d).map(|_| r.u16()).collect::<Result<_>>()?;
        validate_permutation(&order.iter().map(|&j| j as usize).collect::<Vec<_>>(), d)?;
        let first_prob = r.u16()?;
        let cond_probs: Vec<[u16; 2]> = (0..d.saturating_sub(1))
            .map(|_| Ok([r.u16()?, r.u16()?]))
            .collect::<Result<_>>()?;
        if r.remaining() != 0 {
            return Err(Error::MalformedPayload(format!(
                "{} trailing bytes after model",
                r.remaining()
            )));
        }
        let model = DexelOrderModel {
            kind,
            quality_bucket,
            order,
            first_prob,
            cond_probs,
        };
        let valid = |p: u16| p != 0;
        if !valid(model.first_prob) || !model.cond_probs.iter().flatten().all(|&p| valid(p)) {
            return Err(Error::MalformedPayload("model probability of zero".into()));
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::fsutil::write_atomic(path.as_ref(), &self.to_bytes())
    }
}

/// Trains a model from (original, decoded-image) descriptor pairs. Residual
/// models learn from the XOR of each pair, intra models from the originals.
pub fn train(
    pairs: &[(BinaryDescriptor, BinaryDescriptor)],
    kind: SourceKind,
    quality_bucket: u8,
) -> Result<DexelOrderModel> {
    let vectors: Vec<BinaryDescriptor> = match kind {
        SourceKind::Residual => pairs.iter().map(|(d, p)| d.xor(p)).collect::<Result<_>>()?,
        SourceKind::Intra => pairs.iter().map(|(d, _)| d.clone()).collect(),
    };
    train_vectors(&vectors, kind, quality_bucket)
}

/// Trains a model directly from the vectors to be coded.
pub fn train_vectors(vectors: &[BinaryDescriptor], kind: SourceKind, quality_bucket: u8) -> Result<DexelOrderModel> {
    if vectors.len() < MIN_TRAINING_VECTORS {
        return Err(Error::InsufficientData {
            found: vectors.len(),
            needed: MIN_TRAINING_VECTORS,
        });
    }
    let stats = stats_of(vectors)?;
    DexelOrderModel::from_stats(&stats, kind, quality_bucket)
}

/// Statistics of a set of equal-length vectors.
pub fn stats_of(vectors: &[BinaryDescriptor]) -> Result<DexelStats> {
    let dimension = vectors.first().map_or(0, |v| v.len());
    let mut stats = DexelStats::new(dimension);
    for v in vectors {
        stats.accumulate(v)?;
    }
    Ok(stats)
}

/// A collection of trained models, one per (kind, quality bucket).
#[derive(Clone, Debug, Default)]
pub struct ModelSet {
    models: Vec<DexelOrderModel>,
}

impl ModelSet {
    pub fn new(mut models: Vec<DexelOrderModel>) -> Self {
        models.sort_by_key(|m| (m.kind.code(), m.quality_bucket));
        ModelSet { models }
    }

    /// Loads every `*.hmdl` file from a directory, or a single model file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_file() {
            return Ok(ModelSet::new(vec![DexelOrderModel::load(path)?]));
        }
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.extension().is_some_and(|e| e == "hmdl") {
                files.push(p);
            }
        }
        files.sort();
        Ok(ModelSet::new(
            files.iter().map(DexelOrderModel::load).collect::<Result<_>>()?,
        ))
    }

    pub fn models(&self) -> &[DexelOrderModel] {
        &self.models
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Residual model trained at the quality nearest `q` (lower quality on ties).
    pub fn nearest_residual(&self, q: u8) -> Option<&DexelOrderModel> {
        self.models
            .iter()
            .filter(|m| m.kind == SourceKind::Residual)
            .min_by_key(|m| ((m.quality_bucket as i32 - q as i32).abs(), m.quality_bucket))
    }

    pub fn intra(&self) -> Option<&DexelOrderModel> {
        self.models.iter().find(|m| m.kind == SourceKind::Intra)
    }

    pub fn find(&self, id: ModelId) -> Option<&DexelOrderModel> {
        self.models.iter().find(|m| m.id() == id)
    }
}
