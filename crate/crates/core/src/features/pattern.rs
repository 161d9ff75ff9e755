//! Sampling pattern tables, version 1.
//!
//! Sixty points on five concentric rings (1, 10, 14, 15 and 20 points at
//! radii 0, 2.9, 4.9, 7.4 and 10.8 px for the finest octave). Offsets are in
//! 1/16 px; each point carries the half-width of its box smoothing kernel in
//! px. Both scale with the octave factor 2^o. Rotation uses a 64-step
//! Q14 cosine/sine table. Everything here is integer so that any two
//! machines sample identical positions.

/// Bumped whenever any table below changes; stored descriptors are only
/// comparable across identical versions.
pub const PATTERN_VERSION: u8 = 1;

/// (dx, dy, box half-width) per pattern point.
pub const PATTERN_POINTS: [(i32, i32, u32); 60] = [
    (0, 0, 1),
    (46, 0, 1),
    (38, 27, 1),
    (14, 44, 1),
    (-14, 44, 1),
    (-38, 27, 1),
    (-46, 0, 1),
    (-38, -27, 1),
    (-14, -44, 1),
    (14, -44, 1),
    (38, -27, 1),
    (76, 17, 1),
    (61, 49, 1),
    (34, 71, 1),
    (0, 78, 1),
    (-34, 71, 1),
    (-61, 49, 1),
    (-76, 17, 1),
    (-76, -17, 1),
    (-61, -49, 1),
    (-34, -71, 1),
    (0, -78, 1),
    (34, -71, 1),
    (61, -49, 1),
    (76, -17, 1),
    (118, 0, 2),
    (108, 48, 2),
    (79, 88, 2),
    (37, 113, 2),
    (-12, 118, 2),
    (-59, 103, 2),
    (-96, 70, 2),
    (-116, 25, 2),
    (-116, -25, 2),
    (-96, -70, 2),
    (-59, -103, 2),
    (-12, -118, 2),
    (37, -113, 2),
    (79, -88, 2),
    (108, -48, 2),
    (171, 27, 2),
    (154, 78, 2),
    (122, 122, 2),
    (78, 154, 2),
    (27, 171, 2),
    (-27, 171, 2),
    (-78, 154, 2),
    (-122, 122, 2),
    (-154, 78, 2),
    (-171, 27, 2),
    (-171, -27, 2),
    (-154, -78, 2),
    (-122, -122, 2),
    (-78, -154, 2),
    (-27, -171, 2),
    (27, -171, 2),
    (78, -154, 2),
    (122, -122, 2),
    (154, -78, 2),
    (171, -27, 2),
];

/// Number of quantized orientations.
pub const ORIENTATION_STEPS: usize = 64;

/// Q14 (cos, sin) of 2πk/64.
pub const ROTATION_Q14: [(i32, i32); ORIENTATION_STEPS] = [
    (16384, 0),
    (16305, 1606),
    (16069, 3196),
    (15679, 4756),
    (15137, 6270),
    (14449, 7723),
    (13623, 9102),
    (12665, 10394),
    (11585, 11585),
    (10394, 12665),
    (9102, 13623),
    (7723, 14449),
    (6270, 15137),
    (4756, 15679),
    (3196, 16069),
    (1606, 16305),
    (0, 16384),
    (-1606, 16305),
    (-3196, 16069),
    (-4756, 15679),
    (-6270, 15137),
    (-7723, 14449),
    (-9102, 13623),
    (-10394, 12665),
    (-11585, 11585),
    (-12665, 10394),
    (-13623, 9102),
    (-14449, 7723),
    (-15137, 6270),
    (-15679, 4756),
    (-16069, 3196),
    (-16305, 1606),
    (-16384, 0),
    (-16305, -1606),
    (-16069, -3196),
    (-15679, -4756),
    (-15137, -6270),
    (-14449, -7723),
    (-13623, -9102),
    (-12665, -10394),
    (-11585, -11585),
    (-10394, -12665),
    (-9102, -13623),
    (-7723, -14449),
    (-6270, -15137),
    (-4756, -15679),
    (-3196, -16069),
    (-1606, -16305),
    (0, -16384),
    (1606, -16305),
    (3196, -16069),
    (4756, -15679),
    (6270, -15137),
    (7723, -14449),
    (9102, -13623),
    (10394, -12665),
    (11585, -11585),
    (12665, -10394),
    (13623, -9102),
    (14449, -7723),
    (15137, -6270),
    (15679, -4756),
    (16069, -3196),
    (16305, -1606),
];

/// Largest pattern radius in 1/16 px, before octave scaling.
pub const PATTERN_RADIUS_16: i32 = 174;

/// Largest box half-width, before octave scaling.
pub const MAX_BOX_HALF_WIDTH: u32 = 2;

/// Number of short-distance pairs compared for the descriptor bits.
pub const SHORT_PAIRS: usize = 512;

/// Pairs at least this far apart (1/16 px, squared) drive the orientation estimate.
pub const LONG_PAIR_MIN_DIST2: i32 = (16 * 11) * (16 * 11);
