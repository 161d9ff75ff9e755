//! Separable 8x8 DCT-II in integer arithmetic (Q13 orthonormal basis).

/// `BASIS[u][x] = round(8192 * c(u) * cos((2x + 1)uπ / 16))`.
const BASIS: [[i64; 8]; 8] = [
    [2896, 2896, 2896, 2896, 2896, 2896, 2896, 2896],
    [4017, 3406, 2276, 799, -799, -2276, -3406, -4017],
    [3784, 1567, -1567, -3784, -3784, -1567, 1567, 3784],
    [3406, -799, -4017, -2276, 2276, 4017, 799, -3406],
    [2896, -2896, -2896, 2896, 2896, -2896, -2896, 2896],
    [2276, -4017, 799, 3406, -3406, -799, 4017, -2276],
    [1567, -3784, 3784, -1567, -1567, 3784, -3784, 1567],
    [799, -2276, 3406, -4017, 4017, -3406, 2276, -799],
];

/// Fractional bits carried by the 2D transform output.
pub(super) const SHIFT: u32 = 26;

/// Forward transform of level-shifted samples; output in Q26, row-major `[v][u]`.
pub(super) fn forward(block: &[i32; 64]) -> [i64; 64] {
    let mut rows = [0i64; 64];
    for y in 0..8 {
        for u in 0..8 {
            rows[y * 8 + u] = (0..8).map(|x| BASIS[u][x] * block[y * 8 + x] as i64).sum();
        }
    }
    let mut out = [0i64; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| BASIS[v][y] * rows[y * 8 + u]).sum();
        }
    }
    out
}

/// Inverse transform of integer coefficients; returns rounded, level-shifted
/// samples before clamping.
pub(super) fn inverse(coeffs: &[i32; 64]) -> [i32; 64] {
    let mut cols = [0i64; 64];
    for v in 0..8 {
        for x in 0..8 {
            cols[v * 8 + x] = (0..8).map(|u| BASIS[u][x] * coeffs[v * 8 + u] as i64).sum();
        }
    }
    let mut out = [0i32; 64];
    let half = 1i64 << (SHIFT - 1);
    for y in 0..8 {
        for x in 0..8 {
            let acc: i64 = (0..8).map(|v| BASIS[v][y] * cols[v * 8 + x]).sum();
            out[y * 8 + x] = ((acc + half) >> SHIFT) as i32;
        }
    }
    out
}
