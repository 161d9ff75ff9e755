//! Multi-octave corner detection with non-maximum suppression and
//! quarter-pel refinement.

use super::{octave_scale, Keypoint, MIN_IMAGE_SIDE, OCTAVES};
use crate::error::{Error, Result};
use crate::image::Image;

/// Bresenham circle of radius 3, clockwise from the top.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Contiguous arc length required for a corner.
const ARC: usize = 9;

/// Highest score any pixel can reach; a threshold at this value detects nothing.
pub const MAX_SCORE: u32 = 255;

/// Low bits of a corner strength holding the contrast tie-breaker.
const CONTRAST_BITS: u32 = 12;

struct Level {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Level {
    fn downsample(&self) -> Level {
        let width = self.width / 2;
        let height = self.height / 2;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let r0 = &self.pixels[2 * y * self.width..];
            let r1 = &self.pixels[(2 * y + 1) * self.width..];
            for x in 0..width {
                let s = r0[2 * x] as u32 + r0[2 * x + 1] as u32 + r1[2 * x] as u32 + r1[2 * x + 1] as u32;
                pixels.push(((s + 2) >> 2) as u8);
            }
        }
        Level { width, height, pixels }
    }

    /// Corner strength of every pixel (see [`corner_strength`]). Pixels
    /// within 3 of the border score 0.
    fn score_map(&self) -> Vec<u32> {
        let (w, h) = (self.width, self.height);
        let mut scores = vec![0u32; w * h];
        if w < 7 || h < 7 {
            return scores;
        }
        let offsets: [isize; 16] = CIRCLE.map(|(dx, dy)| dy as isize * w as isize + dx as isize);
        let mut diff = [0i32; 16];
        for y in 3..h - 3 {
            for x in 3..w - 3 {
                let idx = y * w + x;
                let centre = self.pixels[idx] as i32;
                for (d, off) in diff.iter_mut().zip(offsets) {
                    *d = self.pixels[(idx as isize + off) as usize] as i32 - centre;
                }
                scores[idx] = corner_strength(&diff);
            }
        }
        scores
    }
}

/// Arc score in the high bits, circle contrast in the low bits. High-contrast
/// corners saturate the arc score over a small plateau; the contrast term
/// peaks where the most circle pixels differ from the centre, at the corner.
fn corner_strength(diff: &[i32; 16]) -> u32 {
    let arc = arc_score(diff);
    if arc == 0 {
        return 0;
    }
    let bright: i32 = diff.iter().map(|&d| d.max(0)).sum();
    let dark: i32 = diff.iter().map(|&d| (-d).max(0)).sum();
    (arc << CONTRAST_BITS) | bright.max(dark) as u32
}

/// The largest `t` for which some arc of 9 contiguous circle pixels is
/// entirely brighter than the centre by more than `t`, or entirely darker.
fn arc_score(diff: &[i32; 16]) -> u32 {
    let mut best = 0i32;
    for start in 0..16 {
        let mut bright = i32::MAX;
        let mut dark = i32::MAX;
        for i in 0..ARC {
            let d = diff[(start + i) & 15];
            bright = bright.min(d);
            dark = dark.min(-d);
            if bright <= best && dark <= best {
                break;
            }
        }
        best = best.max(bright).max(dark);
    }
    // A score of s means every arc pixel differs by at least s, i.e. by more than s - 1.
    (best.max(1) - 1) as u32
}

/// Rounded quotient for a positive denominator.
fn round_div(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

/// Quarter-step offset of the vertex of a parabola through (-1, a), (0, b), (1, c).
fn quadratic_peak_quarter(a: u32, b: u32, c: u32) -> i64 {
    let (a, b, c) = (a as i64, b as i64, c as i64);
    let den = 2 * (2 * b - a - c);
    if den <= 0 {
        return 0;
    }
    round_div(4 * (c - a), den).clamp(-2, 2)
}

#[derive(Clone, Copy)]
struct Candidate {
    x_qpel: u32,
    y_qpel: u32,
    score: u32,
    octave: u32,
}

fn octave_candidates(level: &Level, octave: u32, threshold: u32, full_w: u32, full_h: u32) -> Vec<Candidate> {
    let (w, h) = (level.width, level.height);
    let mut out = Vec::new();
    if w < 9 || h < 9 {
        return out;
    }
    let scores = level.score_map();
    let factor = 1i64 << octave;
    for y in 4..h - 4 {
        for x in 4..w - 4 {
            let idx = y * w + x;
            let s = scores[idx];
            if s >> CONTRAST_BITS <= threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = scores[(idx as isize + dy * w as isize + dx) as usize];
                    let precedes = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (precedes && n == s) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let ox = quadratic_peak_quarter(scores[idx - 1], s, scores[idx + 1]);
            let oy = quadratic_peak_quarter(scores[idx - w], s, scores[idx + w]);
            // Pixel i of octave o covers full-resolution pixels [i*2^o, (i+1)*2^o).
            let centre = 2 * (factor - 1);
            let xq = ((4 * x as i64 + ox) * factor + centre).clamp(0, 4 * full_w as i64 - 1);
            let yq = ((4 * y as i64 + oy) * factor + centre).clamp(0, 4 * full_h as i64 - 1);
            out.push(Candidate {
                x_qpel: xq as u32,
                y_qpel: yq as u32,
                score: s,
                octave,
            });
        }
    }
    out
}

/// True when `other` wins against `c` in cross-octave suppression.
fn dominates(other: &Candidate, c: &Candidate) -> bool {
    let reach = 4i64 << other.octave.max(c.octave);
    let dx = (other.x_qpel as i64 - c.x_qpel as i64).abs();
    let dy = (other.y_qpel as i64 - c.y_qpel as i64).abs();
    if dx > reach || dy > reach {
        return false;
    }
    other.score > c.score || (other.score == c.score && other.octave < c.octave)
}

pub fn detect(image: &Image, threshold: u32) -> Result<Vec<Keypoint>> {
    if image.width() < MIN_IMAGE_SIDE || image.height() < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            min: MIN_IMAGE_SIDE,
        });
    }
    let mut level = Level {
        width: image.width() as usize,
        height: image.height() as usize,
        pixels: image.samples().to_vec(),
    };
    let mut per_octave: Vec<Vec<Candidate>> = Vec::with_capacity(OCTAVES as usize);
    for octave in 0..OCTAVES {
        if octave > 0 {
            level = level.downsample();
        }
        per_octave.push(octave_candidates(
            &level,
            octave,
            threshold,
            image.width(),
            image.height(),
        ));
    }

    let mut keypoints = Vec::new();
    for (o, cands) in per_octave.iter().enumerate() {
        for c in cands {
            let suppressed = [o.wrapping_sub(1), o + 1]
                .into_iter()
                .filter_map(|n| per_octave.get(n))
                .any(|others| others.iter().any(|other| dominates(other, c)));
            if !suppressed {
                keypoints.push(Keypoint {
                    x: c.x_qpel,
                    y: c.y_qpel,
                    scale: octave_scale(c.octave),
                    orientation: 0.0,
                    response: c.score as f32 / (1 << CONTRAST_BITS) as f32,
                });
            }
        }
    }
    super::canonical_sort(&mut keypoints);
    Ok(keypoints)
}
