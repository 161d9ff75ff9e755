mod common;

use hatc::features::{border_margin, describe, detect, extract, octave_for_scale, FeatureSet, Keypoint, MAX_SCORE};
use hatc::{Error, Image};
use sha2::{Digest, Sha256};

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

/// Segment test evaluated directly: 9 contiguous circle pixels all brighter
/// or all darker than the centre by more than `t`.
fn is_segment_corner(img: &Image, x: i32, y: i32, t: i32) -> bool {
    let c = img.get(x as u32, y as u32) as i32;
    let ring: Vec<i32> = CIRCLE
        .iter()
        .map(|&(dx, dy)| img.get((x + dx) as u32, (y + dy) as u32) as i32 - c)
        .collect();
    (0..16).any(|s| (0..9).all(|i| ring[(s + i) % 16] > t) || (0..9).all(|i| ring[(s + i) % 16] < -t))
}

fn square(lo: u32, hi: u32, inside: u8, outside: u8) -> Image {
    Image::from_fn(64, 64, |x, y| {
        if (lo..hi).contains(&x) && (lo..hi).contains(&y) {
            inside
        } else {
            outside
        }
    })
}

#[test]
fn flat_image_has_no_keypoints() {
    let flat = Image::filled(64, 64, 128);
    assert!(detect(&flat, 70).unwrap().is_empty());
    assert!(extract(&flat, 70).unwrap().is_empty());
}

#[test]
fn maximum_threshold_detects_nothing() {
    for img in common::retrieval_images().into_iter().take(2) {
        assert!(detect(img, MAX_SCORE).unwrap().is_empty());
    }
}

#[test]
fn small_image_is_rejected() {
    assert!(matches!(
        detect(&Image::filled(31, 64, 0), 10),
        Err(Error::ImageTooSmall { .. })
    ));
}

#[test]
fn square_corners_match_brute_force_segment_test() {
    let img = square(20, 44, 0, 255);
    let corners = [(20, 20), (43, 20), (20, 43), (43, 43)];
    // the direct segment test fires only in the immediate neighbourhood of the corners
    let oracle: Vec<(i32, i32)> = (3..61)
        .flat_map(|y| (3..61).map(move |x| (x, y)))
        .filter(|&(x, y)| is_segment_corner(&img, x, y, 70))
        .collect();
    assert!(!oracle.is_empty());
    for &(x, y) in &oracle {
        assert!(corners
            .iter()
            .any(|&(cx, cy)| (x - cx).abs() <= 2 && (y - cy).abs() <= 2));
    }
    let kps = detect(&img, 70).unwrap();
    assert_eq!(kps.len(), 4);
    for (cx, cy) in corners {
        let near = kps.iter().any(|k| {
            let dx = k.x as f64 / 4.0 - cx as f64;
            let dy = k.y as f64 / 4.0 - cy as f64;
            (dx * dx + dy * dy).sqrt() <= 1.0
        });
        assert!(near, "no keypoint within 1 px of corner ({cx}, {cy}): {kps:?}");
    }
}

#[test]
fn canonical_order_is_strict() {
    for img in common::retrieval_images().into_iter().take(3) {
        let kps = detect(img, 40).unwrap();
        assert!(kps.len() > 20);
        for w in kps.windows(2) {
            assert_eq!(hatc::features::canonical_cmp(&w[0], &w[1]), std::cmp::Ordering::Less);
        }
        for k in &kps {
            assert!(k.x < 4 * img.width() && k.y < 4 * img.height());
            assert!((1.0..=8.0).contains(&k.scale));
        }
    }
}

#[test]
fn describe_is_deterministic_and_full_length() {
    let img = common::retrieval_images()[0];
    let kps = detect(img, 60).unwrap();
    let a = describe(img, &kps);
    let b = describe(img, &kps);
    assert_eq!(a.descriptors, b.descriptors);
    assert!(a.descriptors.iter().all(|d| d.len() == 512));
    assert_eq!(a.keypoints.len() + a.dropped.len(), kps.len());
}

#[test]
fn doubling_intensities_keeps_descriptors() {
    // halve a corpus image so doubling it cannot clip
    let src = common::retrieval_images()[1];
    let half = Image::from_fn(src.width(), src.height(), |x, y| src.get(x, y) / 2);
    let double = Image::from_fn(src.width(), src.height(), |x, y| 2 * half.get(x, y));
    let kps = detect(&half, 20).unwrap();
    assert!(kps.len() > 20);
    let a = describe(&half, &kps);
    let b = describe(&double, &kps);
    assert!(!a.descriptors.is_empty());
    assert_eq!(a.dropped, b.dropped);
    for (ka, kb) in a.keypoints.iter().zip(&b.keypoints) {
        assert_eq!(ka.orientation, kb.orientation);
    }
    assert_eq!(a.descriptors, b.descriptors);
}

#[test]
fn pixels_outside_support_do_not_matter() {
    let img = common::retrieval_images()[2];
    let kp = detect(img, 60)
        .unwrap()
        .into_iter()
        .find(|k| octave_for_scale(k.scale) == 0 && describe(img, &[*k]).dropped.is_empty())
        .expect("a describable octave-0 keypoint");
    let (cx, cy) = (kp.x / 4, kp.y / 4);
    let reach = border_margin(0);
    let edited = Image::from_fn(img.width(), img.height(), |x, y| {
        if x.abs_diff(cx) > reach || y.abs_diff(cy) > reach {
            255 - img.get(x, y)
        } else {
            img.get(x, y)
        }
    });
    assert_eq!(describe(img, &[kp]).descriptors, describe(&edited, &[kp]).descriptors);
}

#[test]
fn border_keypoints_are_dropped_and_reported() {
    let img = common::retrieval_images()[0];
    let edge = Keypoint {
        x: 8,
        y: 8,
        scale: 1.0,
        ..Default::default()
    };
    let inner = Keypoint {
        x: 4 * 160,
        y: 4 * 120,
        scale: 2.0,
        ..Default::default()
    };
    let d = describe(img, &[edge, inner, edge]);
    assert_eq!(d.dropped, [0, 2]);
    assert_eq!(d.descriptors.len(), 1);
}

#[test]
fn feature_set_serialization_round_trips() {
    let img = common::retrieval_images()[3];
    let set = extract(img, 60).unwrap();
    assert_eq!(set.keypoints.len(), set.descriptors.len());
    let back = FeatureSet::from_bytes(&set.to_bytes()).unwrap();
    assert_eq!(back.descriptors, set.descriptors);
    assert_eq!(back.len(), set.len());
}

fn golden_image() -> Image {
    Image::from_fn(96, 80, |x, y| {
        let checker = ((x / 9) + (y / 7)) % 2 == 0;
        let disc = (x as i32 - 50).pow(2) + (y as i32 - 38).pow(2) < 300;
        let base = if checker { 60 } else { 190 };
        (if disc { 255 - base } else { base } + ((x * 13 + y * 29) % 11)) as u8
    })
}

#[test]
fn extraction_matches_golden_hash() {
    let a = extract(&golden_image(), 40).unwrap().to_bytes();
    let b = extract(&golden_image(), 40).unwrap().to_bytes();
    assert_eq!(a, b);
    assert!(FeatureSet::from_bytes(&a).unwrap().len() >= 8);
    let digest = common::hex(&Sha256::digest(&a));
    assert_eq!(
        digest,
        "7a1737fa838e48737e3632f4da55e166ce718654cc52ef0b390b38a183cb6a33"
    );
}
