mod common;

use std::collections::BTreeSet;

use hatc::codec::QualityFactor;
use hatc::entropy::ModelSet;
use hatc::eval::report::{chart, to_csv, ChartKind, CSV_HEADER};
use hatc::eval::{
    average_precision, hamming, match_score, mean_average_precision, rank, sweep, Manifest, RankedList,
    RetrievalCorpus, Role, SweepGrid,
};
use hatc::pipeline::Method;
use hatc::train::train_residual;
use hatc::{extract, BinaryDescriptor, Error, FeatureSet, Keypoint};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_descriptor(rng: &mut ChaCha8Rng) -> BinaryDescriptor {
    BinaryDescriptor::from_bits(&(0..512).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>())
}

fn set_of(descriptors: Vec<BinaryDescriptor>) -> FeatureSet {
    let n = descriptors.len();
    FeatureSet::new(vec![Keypoint::default(); n], descriptors).unwrap()
}

/// Sum of precision at each relevant rank over the relevant count, exactly.
fn ap_oracle(entries: &[usize], relevant: &BTreeSet<usize>) -> Ratio<i64> {
    let mut sum = Ratio::from_integer(0);
    for k in 0..entries.len() {
        if relevant.contains(&entries[k]) {
            let hits = entries[..=k].iter().filter(|e| relevant.contains(e)).count() as i64;
            sum += Ratio::new(hits, k as i64 + 1);
        }
    }
    sum / relevant.len() as i64
}

fn to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[test]
fn hamming_matches_popcount() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a = random_descriptor(&mut rng);
        let b = random_descriptor(&mut rng);
        let oracle = (0..512).filter(|&j| a.get(j) != b.get(j)).count() as u32;
        assert_eq!(hamming(&a, &b).unwrap(), oracle);
        assert_eq!(hamming(&a, &a.complement()).unwrap(), 512);
    }
}

#[test]
fn ap_hand_example() {
    let list = RankedList {
        query_id: 0,
        entries: vec![1, 2, 3],
    };
    let rel: BTreeSet<usize> = [1, 3].into();
    assert!((average_precision(&list, &rel).unwrap() - 0.8333).abs() < 1e-4);
    assert_eq!(average_precision(&list, &[7].into()).unwrap(), 0.0);
    assert!(matches!(
        average_precision(&list, &BTreeSet::new()),
        Err(Error::NoRelevantDocuments)
    ));
}

#[test]
fn ap_against_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let mut entries: Vec<usize> = (0..n).collect();
        entries.shuffle(&mut rng);
        let mut relevant: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
        if relevant.is_empty() || rng.random_bool(0.1) {
            // relevant items missing from the list still count in the denominator
            relevant.insert(n + rng.random_range(0..3));
        }
        let list = RankedList { query_id: 0, entries };
        let ap = average_precision(&list, &relevant).unwrap();
        let exact = ap_oracle(&list.entries, &relevant);
        assert!((ap - to_f64(exact)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&ap));
        let perfect = list.entries.iter().take(relevant.len()).all(|e| relevant.contains(e));
        assert_eq!(ap == 1.0, perfect && relevant.iter().all(|r| list.entries.contains(r)));
    }
}

#[test]
fn map_is_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let aps: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..=1.0)).collect();
    let mut oracle = 0.0;
    for ap in &aps {
        oracle += ap / 100.0;
    }
    assert!((mean_average_precision(&aps).unwrap() - oracle).abs() < 1e-12);
    assert_eq!(mean_average_precision(&[1.0, 0.5]).unwrap(), 0.75);
    assert!(matches!(mean_average_precision(&[]), Err(Error::EmptyInput)));
}

#[test]
fn match_score_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let query = set_of((0..40).map(|_| random_descriptor(&mut rng)).collect());
    let same = match_score(&query, &query).unwrap();
    assert_eq!((same.matches, same.distance_sum), (40, 0));
    let other = set_of((0..40).map(|_| random_descriptor(&mut rng)).collect());
    assert!(match_score(&query, &other).unwrap().matches <= 1);
    // a single candidate falls back to the absolute cap
    let mut near = query.descriptors[0].clone();
    for j in 0..64 {
        near.set(j, !near.get(j));
    }
    let single = set_of(vec![near.clone()]);
    let one = set_of(vec![query.descriptors[0].clone()]);
    assert_eq!(match_score(&one, &single).unwrap().matches, 1);
    near.set(100, !near.get(100));
    assert_eq!(match_score(&one, &set_of(vec![near])).unwrap().matches, 0);
    assert!(matches!(
        match_score(&FeatureSet::default(), &query),
        Err(Error::EmptyQuery)
    ));
}

#[test]
fn ranking_ignores_database_order() {
    let features: Vec<FeatureSet> = common::retrieval_images()
        .iter()
        .map(|i| extract(i, 70).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (qid, query) in features.iter().enumerate() {
        let base = rank(qid, query, &features).unwrap();
        assert_eq!(base.entries[0], qid, "self ranks first");
        let self_score = match_score(query, &features[qid]).unwrap();
        assert_eq!((self_score.matches as usize, self_score.distance_sum), (query.len(), 0));

        let mut perm: Vec<usize> = (0..features.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<FeatureSet> = perm.iter().map(|&i| features[i].clone()).collect();
        let mapped: Vec<usize> = rank(qid, query, &shuffled)
            .unwrap()
            .entries
            .iter()
            .map(|&i| perm[i])
            .collect();
        // equal scores may reorder among themselves; compare score sequences and tie groups
        let score = |id: usize| match_score(query, &features[id]).unwrap();
        let scores_a: Vec<_> = base.entries.iter().map(|&i| score(i)).collect();
        let scores_b: Vec<_> = mapped.iter().map(|&i| score(i)).collect();
        assert_eq!(scores_a, scores_b);
        let distinct: BTreeSet<_> = scores_a.iter().collect();
        if distinct.len() == scores_a.len() {
            assert_eq!(base.entries, mapped);
        }
    }
}

#[test]
fn manifest_round_trip() {
    let corpus = common::small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let path = hatc::corpus::write_corpus(
        dir.path(),
        &hatc::corpus::CorpusConfig {
            objects: 2,
            db_views: 2,
            queries_per_object: 1,
            training_images: 1,
            width: 64,
            height: 48,
            seed: 3,
        },
    )
    .unwrap();
    let manifest = Manifest::load(&path).unwrap();
    assert_eq!(manifest.with_role(Role::Db).count(), 4);
    assert_eq!(manifest.with_role(Role::Query).count(), 2);
    let again = Manifest::parse(&manifest.to_text(), dir.path()).unwrap();
    assert_eq!(again, manifest);
    let rc = RetrievalCorpus::from_manifest(&manifest).unwrap();
    assert_eq!(rc.relevant(1).len(), 2);
    assert!(!corpus.0.is_empty());
}

#[test]
fn single_cell_and_refinement_sweep() {
    let rc = RetrievalCorpus::from_images(&common::small_corpus().0).unwrap();
    let q50 = QualityFactor::new(50).unwrap();
    let grid = SweepGrid {
        cta_qualities: vec![QualityFactor::new(20).unwrap()],
        atc_thresholds: vec![],
        hatc_qualities: vec![],
        hatc_refine_counts: vec![],
        ..SweepGrid::default()
    };
    let rows = sweep(&rc, &grid, &ModelSet::new(vec![])).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].method, Method::Cta);
    assert!(rows[0].psnr_db.is_some() && (0.0..=1.0).contains(&rows[0].map));

    let model = train_residual(&common::training_images(), q50, 70, 8).unwrap().0;
    let grid = SweepGrid {
        cta_qualities: vec![],
        hatc_qualities: vec![q50],
        hatc_refine_counts: vec![10, 25, 50, 100],
        ..grid
    };
    let rows = sweep(&rc, &grid, &ModelSet::new(vec![model])).unwrap();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[1].bytes_total >= w[0].bytes_total);
    }
    for r in &rows {
        assert!(r.bytes_total > r.bytes_image + r.bytes_loc + r.bytes_enh);
    }
    let csv = String::from_utf8(to_csv(&rows).unwrap()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 5);
    for kind in [ChartKind::RateMap, ChartKind::RatePsnr, ChartKind::MapPsnrIsoRate] {
        assert!(chart(kind, &rows).starts_with("<svg"));
    }
}
