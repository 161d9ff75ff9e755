//! Canonical prefix codes built from the standard luminance tables.

use crate::bitio::{BitReader, BitWriter};

pub(super) const LUMA_DC_LENGTHS: [u8; 16] = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
pub(super) const LUMA_DC_VALUES: [u8; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

pub(super) const LUMA_AC_LENGTHS: [u8; 16] = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d];
pub(super) const LUMA_AC_VALUES: [u8; 162] = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14,
    0x32, 0x81, 0x91, 0xA1, 0x08, 0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09,
    0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A,
    0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5A, 0x63, 0x64, 0x65,
    0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88,
    0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9,
    0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA,
    0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA,
];

pub(super) struct PrefixCode {
    /// (code, length) per symbol value; length 0 for unused symbols.
    encode: [(u16, u8); 256],
    /// Per code length: (first code, last code + 1, index of first symbol).
    ranges: [(u32, u32, usize); 17],
    symbols: Vec<u8>,
}

impl PrefixCode {
    pub(super) fn new(lengths: &[u8; 16], values: &[u8]) -> Self {
        let mut encode = [(0u16, 0u8); 256];
        let mut ranges = [(0u32, 0u32, 0usize); 17];
        let mut code = 0u32;
        let mut k = 0usize;
        for len in 1..=16 {
            let count = lengths[len - 1] as usize;
            ranges[len] = (code, code + count as u32, k);
            for &sym in &values[k..k + count] {
                encode[sym as usize] = (code as u16, len as u8);
                code += 1;
            }
            k += count;
            code <<= 1;
        }
        PrefixCode {
            encode,
            ranges,
            symbols: values.to_vec(),
        }
    }

    pub(super) fn put(&self, w: &mut BitWriter, symbol: u8) {
        let (code, len) = self.encode[symbol as usize];
        debug_assert!(len > 0, "symbol {symbol:#x} has no code");
        w.put(code as u32, len as u32);
    }

    pub(super) fn get(&self, r: &mut BitReader<'_>) -> Option<u8> {
        let mut code = 0u32;
        for len in 1..=16 {
            code = (code << 1) | r.bit()?;
            let (first, end, base) = self.ranges[len];
            if code >= first && code < end {
                return Some(self.symbols[base + (code - first) as usize]);
            }
        }
        None
    }
}
