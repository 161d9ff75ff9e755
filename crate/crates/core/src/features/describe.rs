//! Orientation estimation and binary description over the fixed sampling
//! pattern. All sampling is integer: box sums from an integral image and
//! comparisons by cross-multiplication, so results are bit-exact.

use std::sync::OnceLock;

use super::pattern::{
    LONG_PAIR_MIN_DIST2, MAX_BOX_HALF_WIDTH, ORIENTATION_STEPS, PATTERN_POINTS, PATTERN_RADIUS_16, ROTATION_Q14,
    SHORT_PAIRS,
};
use super::{octave_for_scale, BinaryDescriptor, Keypoint, DESCRIPTOR_BITS};
use crate::image::Image;

const _: () = assert!(SHORT_PAIRS == DESCRIPTOR_BITS);

const N_POINTS: usize = PATTERN_POINTS.len();

struct Pairs {
    short: Vec<(usize, usize)>,
    /// (i, j, dx, dy, weight) with weight ≈ 2^24 / |p_j - p_i|^2
    long: Vec<(usize, usize, i64, i64, i64)>,
}

fn pairs() -> &'static Pairs {
    static PAIRS: OnceLock<Pairs> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let mut all = Vec::with_capacity(N_POINTS * (N_POINTS - 1) / 2);
        for (i, a) in PATTERN_POINTS.iter().enumerate() {
            for (j, b) in PATTERN_POINTS.iter().enumerate().skip(i + 1) {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                all.push((dx * dx + dy * dy, i, j, dx, dy));
            }
        }
        all.sort_unstable_by_key(|&(d2, i, j, _, _)| (d2, i, j));
        let short = all[..SHORT_PAIRS].iter().map(|&(_, i, j, _, _)| (i, j)).collect();
        let long = all
            .iter()
            .filter(|p| p.0 >= LONG_PAIR_MIN_DIST2)
            .map(|&(d2, i, j, dx, dy)| (i, j, dx as i64, dy as i64, (1i64 << 24) / d2 as i64))
            .collect();
        Pairs { short, long }
    })
}

/// Distance in px a keypoint centre must keep from every image edge at `octave`.
pub fn border_margin(octave: u32) -> u32 {
    let f = 1u32 << octave;
    (PATTERN_RADIUS_16 as u32 * f).div_ceil(16) + MAX_BOX_HALF_WIDTH * f + 1
}

struct Integral {
    width: usize,
    sums: Vec<u64>,
}

impl Integral {
    fn new(image: &Image) -> Self {
        let w = image.width() as usize;
        let h = image.height() as usize;
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += image.samples()[y * w + x] as u64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { width: stride, sums }
    }

    /// Sum over the square of half-width `r` centred at (cx, cy); caller guarantees it is in bounds.
    #[inline]
    fn box_sum(&self, cx: i64, cy: i64, r: i64) -> u64 {
        let x0 = (cx - r) as usize;
        let y0 = (cy - r) as usize;
        let x1 = (cx + r + 1) as usize;
        let y1 = (cy + r + 1) as usize;
        let s = self.width;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Box sums and areas of all pattern points at one orientation.
fn sample_pattern(integral: &Integral, kp: &Keypoint, octave: u32, step: usize) -> [(u64, u64); N_POINTS] {
    let (cos, sin) = ROTATION_Q14[step];
    let f = 1i64 << octave;
    let x64 = kp.x as i64 * 16;
    let y64 = kp.y as i64 * 16;
    let mut out = [(0u64, 1u64); N_POINTS];
    for (slot, &(dx, dy, half)) in out.iter_mut().zip(PATTERN_POINTS.iter()) {
        let (dx, dy) = (dx as i64, dy as i64);
        // offsets are 1/16 px in Q14; scale to 1/64 px
        let rx = ((dx * cos as i64 - dy * sin as i64) * f * 4 + (1 << 13)) >> 14;
        let ry = ((dx * sin as i64 + dy * cos as i64) * f * 4 + (1 << 13)) >> 14;
        let px = (x64 + rx + 32) >> 6;
        let py = (y64 + ry + 32) >> 6;
        let r = half as i64 * f;
        let side = (2 * r + 1) as u64;
        *slot = (integral.box_sum(px, py, r), side * side);
    }
    out
}

/// Dominant gradient direction of the unrotated pattern, quantized to one of 64 steps.
fn orientation_step(samples: &[(u64, u64); N_POINTS]) -> usize {
    // Scale every mean to a common denominator so the estimate stays exact
    // and linear in intensity.
    let common: u64 = {
        let mut areas: Vec<u64> = samples.iter().map(|s| s.1).collect();
        areas.sort_unstable();
        areas.dedup();
        areas.iter().product()
    };
    let means: Vec<i64> = samples
        .iter()
        .map(|&(sum, area)| (sum * (common / area)) as i64)
        .collect();
    let (mut gx, mut gy) = (0i128, 0i128);
    for &(i, j, dx, dy, w) in &pairs().long {
        let diff = (means[j] - means[i]) as i128;
        gx += diff * (dx * w) as i128;
        gy += diff * (dy * w) as i128;
    }
    let mut best = 0;
    let mut best_dot = i128::MIN;
    for (k, &(c, s)) in ROTATION_Q14.iter().enumerate() {
        let dot = gx * c as i128 + gy * s as i128;
        if dot > best_dot {
            best_dot = dot;
            best = k;
        }
    }
    best
}

fn fits(kp: &Keypoint, octave: u32, width: u32, height: u32) -> bool {
    let m = border_margin(octave) as i64;
    let cx = (kp.x as i64 + 2) >> 2;
    let cy = (kp.y as i64 + 2) >> 2;
    cx >= m && cy >= m && cx + m < width as i64 && cy + m < height as i64
}

/// Output of [`describe`]: the surviving keypoints (orientation filled in),
/// their descriptors, and the input indices dropped at the border.
#[derive(Clone, Debug, Default)]
pub struct Description {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<BinaryDescriptor>,
    pub dropped: Vec<usize>,
}

pub fn describe(image: &Image, keypoints: &[Keypoint]) -> Description {
    let integral = Integral::new(image);
    let pairs = pairs();
    let mut out = Description::default();
    for (idx, kp) in keypoints.iter().enumerate() {
        let octave = octave_for_scale(kp.scale);
        if !fits(kp, octave, image.width(), image.height()) {
            out.dropped.push(idx);
            continue;
        }
        let upright = sample_pattern(&integral, kp, octave, 0);
        let step = orientation_step(&upright);
        let rotated = if step == 0 {
            upright
        } else {
            sample_pattern(&integral, kp, octave, step)
        };
        let mut bits = BinaryDescriptor::zeros(DESCRIPTOR_BITS);
        for (b, &(i, j)) in pairs.short.iter().enumerate() {
            let (si, ai) = rotated[i];
            let (sj, aj) = rotated[j];
            if si * aj > sj * ai {
                bits.set(b, true);
            }
        }
        let mut kp = *kp;
        kp.orientation = step as f32 * (std::f32::consts::TAU / ORIENTATION_STEPS as f32);
        out.keypoints.push(kp);
        out.descriptors.push(bits);
    }
    out
}
