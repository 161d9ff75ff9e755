//! Synthetic retrieval corpus: random planar scenes photographed from
//! several viewpoints with photometric changes and sensor noise.
//!
//! Every object is a stack of flat, striped and checkered polygons and
//! ellipses over a smooth background, each surface carrying its own
//! multi-scale noise texture. A view applies a random affine warp
//! (rotation, zoom, foreshortening, shear), uneven lighting and Gaussian
//! noise. Rendering is supersampled and fully determined by the seed.

use std::f32::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::manifest::{Manifest, ManifestEntry, Role};
use crate::fsutil::write_atomic;
use crate::image::Image;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub objects: usize,
    pub db_views: usize,
    pub queries_per_object: usize,
    /// Extra single-view images of unrelated objects, for model training.
    pub training_images: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            objects: 20,
            db_views: 5,
            queries_per_object: 1,
            training_images: 40,
            width: 320,
            height: 240,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Fill {
    Flat(f32),
    Stripes { a: f32, b: f32, period: f32, angle: f32 },
    Checker { a: f32, b: f32, cell: f32 },
}

impl Fill {
    fn at(self, x: f32, y: f32) -> f32 {
        match self {
            Fill::Flat(v) => v,
            Fill::Stripes { a, b, period, angle } => {
                let t = x * angle.cos() + y * angle.sin();
                if (t / period).rem_euclid(2.0) < 1.0 {
                    a
                } else {
                    b
                }
            }
            Fill::Checker { a, b, cell } => {
                let i = (x / cell).floor() as i64 + (y / cell).floor() as i64;
                if i.rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Outline {
    Ellipse {
        cx: f32,
        cy: f32,
        rx: f32,
        ry: f32,
        cos: f32,
        sin: f32,
    },
    /// Convex polygon, counter-clockwise.
    Polygon(Vec<(f32, f32)>),
}

impl Outline {
    /// Axis-aligned bounds as (min x, min y, max x, max y).
    fn bounds(&self) -> [f32; 4] {
        match self {
            Outline::Ellipse { cx, cy, rx, ry, .. } => {
                let r = rx.max(*ry);
                [cx - r, cy - r, cx + r, cy + r]
            }
            Outline::Polygon(pts) => pts
                .iter()
                .fold([f32::MAX, f32::MAX, f32::MIN, f32::MIN], |[x0, y0, x1, y1], &(x, y)| {
                    [x0.min(x), y0.min(y), x1.max(x), y1.max(y)]
                }),
        }
    }

    fn contains(&self, x: f32, y: f32) -> bool {
        match self {
            Outline::Ellipse {
                cx,
                cy,
                rx,
                ry,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let u = (dx * cos + dy * sin) / rx;
                let v = (-dx * sin + dy * cos) / ry;
                u * u + v * v <= 1.0
            }
            Outline::Polygon(pts) => {
                let n = pts.len();
                (0..n).all(|i| {
                    let (x0, y0) = pts[i];
                    let (x1, y1) = pts[(i + 1) % n];
                    (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0.0
                })
            }
        }
    }
}

/// Lattice value in [-1, 1] from an integer hash.
fn lattice(ix: i32, iy: i32, seed: u32) -> f32 {
    let mut h =
        (ix as u32).wrapping_mul(0x8da6_b343) ^ (iy as u32).wrapping_mul(0xd816_3841) ^ seed.wrapping_mul(0xcb1a_b31f);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2c1b_3c6d);
    h ^= h >> 12;
    (h & 0xffff) as f32 / 32767.5 - 1.0
}

/// Smoothly interpolated value noise.
fn value_noise(x: f32, y: f32, seed: u32) -> f32 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i32, fy as i32);
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (smooth(x - fx), smooth(y - fy));
    let top = lattice(ix, iy, seed) * (1.0 - tx) + lattice(ix + 1, iy, seed) * tx;
    let bottom = lattice(ix, iy + 1, seed) * (1.0 - tx) + lattice(ix + 1, iy + 1, seed) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Three octaves of value noise with halving amplitude, roughly in [-1, 1].
fn texture(x: f32, y: f32, period: f32, seed: u32) -> f32 {
    let mut sum = 0.0;
    let (mut f, mut a) = (1.0 / period, 0.57);
    for o in 0..3 {
        sum += a * value_noise(x * f, y * f, seed.wrapping_add(o));
        f *= 2.0;
        a *= 0.5;
    }
    sum
}

/// Surface texture: amplitude in grey levels and base period in pixels.
#[derive(Clone, Copy, Debug)]
struct Grain {
    amplitude: f32,
    period: f32,
    seed: u32,
}

impl Grain {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Grain {
            amplitude: if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(4.0..40.0)
            },
            period: rng.random_range(2.0..10.0),
            seed: rng.random(),
        }
    }

    fn at(self, x: f32, y: f32) -> f32 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * texture(x, y, self.period, self.seed)
        }
    }
}

#[derive(Clone, Debug)]
struct Scene {
    base: f32,
    gradient: (f32, f32),
    wave: (f32, f32, f32),
    grain: Grain,
    shapes: Vec<Shape>,
}

#[derive(Clone, Debug)]
struct Shape {
    outline: Outline,
    bounds: [f32; 4],
    fill: Fill,
    grain: Grain,
}

impl Scene {
    fn random(rng: &mut ChaCha8Rng, width: f32, height: f32) -> Self {
        let mut level = || rng.random_range(10.0f32..245.0);
        let base = level();
        let mut shapes = Vec::new();
        let count = rng.random_range(60..90);
        for i in 0..count {
            // large shapes first so later, smaller ones stay visible
            let big = i < count / 4;
            let size = width.min(height)
                * if big {
                    rng.random_range(0.12f32..0.3)
                } else {
                    rng.random_range(0.025f32..0.1)
                };
            let cx = rng.random_range(-0.05 * width..1.05 * width);
            let cy = rng.random_range(-0.05 * height..1.05 * height);
            let angle = rng.random_range(0.0..PI);
            let outline = match rng.random_range(0..3) {
                0 => Outline::Ellipse {
                    cx,
                    cy,
                    rx: size,
                    ry: size * rng.random_range(0.3f32..1.0),
                    cos: angle.cos(),
                    sin: angle.sin(),
                },
                1 => {
                    let (hw, hh) = (size, size * rng.random_range(0.3f32..1.0));
                    let (c, s) = (angle.cos(), angle.sin());
                    Outline::Polygon(
                        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
                            .iter()
                            .map(|&(u, v)| (cx + u * c - v * s, cy + u * s + v * c))
                            .collect(),
                    )
                }
                _ => {
                    let mut a: Vec<f32> = (0..3).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                    a.sort_by(f32::total_cmp);
                    if a[2] - a[0] < PI {
                        a[1] = a[0] + PI;
                    }
                    Outline::Polygon(a.iter().map(|t| (cx + size * t.cos(), cy + size * t.sin())).collect())
                }
            };
            let fill = match rng.random_range(0..6) {
                0 => Fill::Stripes {
                    a: rng.random_range(10.0..245.0),
                    b: rng.random_range(10.0..245.0),
                    period: rng.random_range(3.0f32..9.0),
                    angle: rng.random_range(0.0..PI),
                },
                1 => Fill::Checker {
                    a: rng.random_range(10.0..245.0),
                    b: rng.random_range(10.0..245.0),
                    cell: rng.random_range(4.0f32..12.0),
                },
                _ => Fill::Flat(rng.random_range(10.0..245.0)),
            };
            shapes.push(Shape {
                bounds: outline.bounds(),
                outline,
                fill,
                grain: Grain::random(rng),
            });
        }
        Scene {
            base,
            gradient: (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)),
            wave: (
                rng.random_range(5.0..20.0),
                rng.random_range(0.01..0.05),
                rng.random_range(0.0..2.0 * PI),
            ),
            grain: Grain::random(rng),
            shapes,
        }
    }

    fn intensity(&self, x: f32, y: f32) -> f32 {
        for shape in self.shapes.iter().rev() {
            let [x0, y0, x1, y1] = shape.bounds;
            if x >= x0 && x <= x1 && y >= y0 && y <= y1 && shape.outline.contains(x, y) {
                return shape.fill.at(x, y) + shape.grain.at(x, y);
            }
        }
        let (amp, freq, phase) = self.wave;
        self.base
            + self.gradient.0 * x
            + self.gradient.1 * y
            + amp * (freq * (x + y) + phase).sin()
            + self.grain.at(x, y)
    }
}

/// Maps image pixels back into the scene frame, plus photometric changes.
#[derive(Clone, Copy, Debug)]
struct View {
    angle: f32,
    zoom: f32,
    /// Horizontal foreshortening and shear, as seen from an oblique viewpoint.
    squash: f32,
    shear: f32,
    shift: (f32, f32),
    gain: f32,
    /// Illumination change across the frame, per pixel.
    light: (f32, f32),
    offset: f32,
    noise: f32,
}

impl View {
    fn identity() -> Self {
        View {
            angle: 0.0,
            zoom: 1.0,
            squash: 1.0,
            shear: 0.0,
            shift: (0.0, 0.0),
            gain: 1.0,
            light: (0.0, 0.0),
            offset: 0.0,
            noise: 1.0,
        }
    }

    fn random(rng: &mut ChaCha8Rng, width: f32, height: f32) -> Self {
        View {
            angle: rng.random_range(-0.4..0.4),
            zoom: rng.random_range(0.8..1.2),
            squash: rng.random_range(0.8..1.0),
            shear: rng.random_range(-0.15..0.15),
            shift: (
                rng.random_range(-0.08..0.08) * width,
                rng.random_range(-0.08..0.08) * height,
            ),
            gain: rng.random_range(0.75..1.25),
            light: (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
            offset: rng.random_range(-20.0..20.0),
            noise: rng.random_range(1.5..3.5),
        }
    }
}

const SUPERSAMPLE: u32 = 3;

fn render(scene: &Scene, view: &View, width: u32, height: u32, rng: &mut ChaCha8Rng) -> Image {
    let (cx, cy) = (width as f32 / 2.0, height as f32 / 2.0);
    // image offset -> scene offset: rotate, scale, then undo squash and shear
    let (c, s) = (view.angle.cos() / view.zoom, view.angle.sin() / view.zoom);
    let (a, b, d) = (1.0 / view.squash, -view.shear / view.squash, 1.0);
    let m = [[a * c + b * -s, a * s + b * c], [d * -s, d * c]];
    let n = SUPERSAMPLE as f32;
    let rows: Vec<Vec<f32>> = (0..height)
        .into_par_iter()
        .map(|y| {
            (0..width)
                .map(|x| {
                    let mut sum = 0.0;
                    for sy in 0..SUPERSAMPLE {
                        for sx in 0..SUPERSAMPLE {
                            let px = x as f32 + (sx as f32 + 0.5) / n - cx - view.shift.0;
                            let py = y as f32 + (sy as f32 + 0.5) / n - cy - view.shift.1;
                            sum += scene.intensity(cx + m[0][0] * px + m[0][1] * py, cy + m[1][0] * px + m[1][1] * py);
                        }
                    }
                    sum / (n * n)
                })
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0f32, view.noise).expect("finite noise level");
    let samples = rows
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(i, v)| {
            let (x, y) = ((i as u32 % width) as f32 - cx, (i as u32 / width) as f32 - cy);
            let gain = view.gain + view.light.0 * x / cx + view.light.1 * y / cy;
            (gain * v + view.offset + noise.sample(rng)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Image::new(width, height, samples).expect("sample count matches")
}

/// One generated image with its role and object label.
#[derive(Clone, Debug)]
pub struct CorpusImage {
    pub role: Role,
    pub object: u32,
    pub name: String,
    pub image: Image,
}

fn object_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Renders the retrieval images (database views then queries) and the
/// training images. Training objects are disjoint from retrieval objects.
pub fn generate(config: &CorpusConfig) -> Result<(Vec<CorpusImage>, Vec<CorpusImage>)> {
    if config.objects == 0 || config.db_views == 0 {
        return Err(Error::Corpus("need at least one object and one database view".into()));
    }
    let (w, h) = (config.width, config.height);
    let (wf, hf) = (w as f32, h as f32);
    let views = config.db_views + config.queries_per_object;
    let retrieval: Vec<Vec<CorpusImage>> = (0..config.objects)
        .into_par_iter()
        .map(|obj| {
            let mut rng = object_rng(config.seed, obj as u64);
            let scene = Scene::random(&mut rng, wf, hf);
            (0..views)
                .map(|v| {
                    let view = View::random(&mut rng, wf, hf);
                    let (role, name) = if v < config.db_views {
                        (Role::Db, format!("db/obj{obj:03}_v{v}.pgm"))
                    } else {
                        (Role::Query, format!("query/obj{obj:03}_q{}.pgm", v - config.db_views))
                    };
                    CorpusImage {
                        role,
                        object: obj as u32,
                        name,
                        image: render(&scene, &view, w, h, &mut rng),
                    }
                })
                .collect()
        })
        .collect();
    let training = (0..config.training_images)
        .into_par_iter()
        .map(|i| {
            let mut rng = object_rng(config.seed, (1 << 32) + i as u64);
            let scene = Scene::random(&mut rng, wf, hf);
            CorpusImage {
                role: Role::Db,
                object: i as u32,
                name: format!("train/img{i:03}.pgm"),
                image: render(&scene, &View::identity(), w, h, &mut rng),
            }
        })
        .collect();
    Ok((retrieval.into_iter().flatten().collect(), training))
}

/// File name of the retrieval manifest inside a corpus directory.
pub const MANIFEST_NAME: &str = "manifest.txt";
/// Subdirectory holding the training images.
pub const TRAINING_DIR: &str = "train";

/// Writes all images as PGM plus `manifest.txt` and returns the manifest path.
pub fn write_corpus(dir: &Path, config: &CorpusConfig) -> Result<PathBuf> {
    let (retrieval, training) = generate(config)?;
    for sub in ["db", "query", TRAINING_DIR] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    for img in retrieval.iter().chain(&training) {
        img.image.write_pgm(dir.join(&img.name))?;
    }
    let manifest = Manifest {
        entries: retrieval
            .iter()
            .map(|img| ManifestEntry {
                role: img.role,
                path: PathBuf::from(&img.name),
                object: img.object,
            })
            .collect(),
    };
    let path = dir.join(MANIFEST_NAME);
    write_atomic(&path, manifest.to_text().as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            objects: 2,
            db_views: 2,
            queries_per_object: 1,
            training_images: 1,
            width: 64,
            height: 48,
            seed: 9,
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, _) = generate(&small()).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(ta.len(), 1);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
        }
        let (c, _) = generate(&CorpusConfig { seed: 10, ..small() }).unwrap();
        assert_ne!(a[0].image, c[0].image);
    }

    #[test]
    fn roles_and_labels() {
        let (a, _) = generate(&small()).unwrap();
        let roles: Vec<_> = a.iter().map(|i| (i.role, i.object)).collect();
        assert_eq!(
            roles,
            [
                (Role::Db, 0),
                (Role::Db, 0),
                (Role::Query, 0),
                (Role::Db, 1),
                (Role::Db, 1),
                (Role::Query, 1)
            ]
        );
    }

    #[test]
    fn convex_polygon_membership() {
        let sq = Outline::Polygon(vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        assert!(sq.contains(1.0, 1.0));
        assert!(!sq.contains(3.0, 1.0));
    }
}
