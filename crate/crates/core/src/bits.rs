//! Fixed-length bit strings used for descriptors and prediction residuals.

use crate::error::{Error, Result};

/// Number of bits in every descriptor produced by the extractor.
pub const DESCRIPTOR_BITS: usize = 512;

/// A fixed-length binary string. Bit `j` lives in word `j / 64`, bit `j % 64`;
/// bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BinaryDescriptor {
    len: usize,
    words: Vec<u64>,
}

impl BinaryDescriptor {
    pub fn zeros(len: usize) -> Self {
        BinaryDescriptor {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut d = BinaryDescriptor {
            len,
            words: vec![u64::MAX; len.div_ceil(64)],
        };
        d.clear_tail();
        d
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut d = Self::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            d.set(j, b);
        }
        d
    }

    /// Builds a descriptor from packed bytes, bit `j` at byte `j / 8`, bit `j % 8`.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        let expected = len.div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: bytes.len(),
            });
        }
        let mut d = Self::zeros(len);
        for (i, &b) in bytes.iter().enumerate() {
            d.words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        d.clear_tail();
        Ok(d)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|i| (self.words[i / 8] >> (8 * (i % 8))) as u8)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        debug_assert!(j < self.len);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn ones_iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        Ok(BinaryDescriptor {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn complement(&self) -> Self {
        let mut d = BinaryDescriptor {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        d.clear_tail();
        d
    }

    pub fn hamming(&self, other: &Self) -> Result<u32> {
        self.check_len(other)?;
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}
