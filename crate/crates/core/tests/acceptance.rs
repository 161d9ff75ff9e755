//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS or FAIL line per criterion.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use hatc::codec::{psnr, QualityFactor};
use hatc::coder::{decode_block, encode_block};
use hatc::container::{demux, mux};
use hatc::corpus::{generate, CorpusConfig, CorpusImage};
use hatc::entropy::{DexelOrderModel, ModelSet};
use hatc::eval::report::to_csv;
use hatc::eval::{average_precision, sweep, RankedList, RateAccuracyPoint, RetrievalCorpus, SweepGrid};
use hatc::location::encode_locations;
use hatc::pipeline::{decode_hatc, encode_hatc, EncodeConfig, Method};
use hatc::train::{residual_stats, residual_vectors, train_intra, train_residual};
use hatc::{extract, BinaryDescriptor, Image, Keypoint};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THRESHOLD: u32 = 70;
const SCALE_BITS: u8 = 8;
/// Relative window for matching byte budgets.
const BUDGET_WINDOW: f64 = 0.10;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn q(v: u32) -> QualityFactor {
    QualityFactor::new(v).unwrap()
}

struct Fixture {
    retrieval: Vec<CorpusImage>,
    training: Vec<Image>,
    models: ModelSet,
}

fn train_all(training: &[Image], grid: &SweepGrid) -> ModelSet {
    let mut models: Vec<DexelOrderModel> = grid
        .hatc_qualities
        .iter()
        .map(|&qf| train_residual(training, qf, THRESHOLD, SCALE_BITS).unwrap().0)
        .collect();
    models.push(train_intra(training, THRESHOLD).unwrap().0);
    ModelSet::new(models)
}

fn fixture(seed: u64) -> Fixture {
    let (retrieval, training) = generate(&CorpusConfig {
        seed,
        ..CorpusConfig::default()
    })
    .unwrap();
    let training: Vec<Image> = training.into_iter().map(|c| c.image).collect();
    let models = train_all(&training, &SweepGrid::default());
    Fixture {
        retrieval,
        training,
        models,
    }
}

fn all_images(f: &Fixture) -> Vec<&Image> {
    f.retrieval.iter().map(|c| &c.image).chain(f.training.iter()).collect()
}

fn round_trips(vectors: &[BinaryDescriptor], model: &DexelOrderModel) -> usize {
    let mut mismatches = 0;
    for chunk in vectors.chunks(u16::MAX as usize) {
        let block = encode_block(chunk, model).unwrap();
        let back = decode_block(&block, model).unwrap();
        mismatches += chunk.iter().zip(&back).filter(|(a, b)| a != b).count() + chunk.len().abs_diff(back.len());
    }
    mismatches
}

fn lossless_coding(f: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random: Vec<_> = (0..10_000)
        .map(|_| BinaryDescriptor::from_bits(&(0..512).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>()))
        .collect();
    let real: Vec<_> = all_images(f)
        .into_iter()
        .flat_map(|img| extract(img, THRESHOLD).unwrap().descriptors)
        .collect();
    let mut bad = 0;
    for model in f.models.models() {
        bad += round_trips(&random, model) + round_trips(&real, model);
    }
    outcome(
        bad == 0,
        format!(
            "{} random + {} real descriptors under {} models, {bad} mismatches",
            random.len(),
            real.len(),
            f.models.models().len()
        ),
    )
}

fn closed_loop(f: &Fixture) -> Outcome {
    let (mut features, mut mismatched, mut runs) = (0usize, 0usize, 0usize);
    for img in all_images(f) {
        for v in [10, 50] {
            let model = f.models.nearest_residual(v as u8).unwrap();
            for z in [25, 100] {
                let enc = encode_hatc(img, &EncodeConfig::hatc(q(v), z), model).unwrap();
                let dec = decode_hatc(&demux(&mux(&enc.stream).unwrap()).unwrap(), model).unwrap();
                features += enc.features.len();
                mismatched += enc
                    .features
                    .descriptors
                    .iter()
                    .zip(&dec.features.descriptors)
                    .filter(|(a, b)| a != b)
                    .count()
                    + enc.features.len().abs_diff(dec.features.len());
                runs += 1;
            }
        }
    }
    outcome(
        mismatched == 0 && features > 0,
        format!("{runs} encodes, {features} refined descriptors, {mismatched} differ"),
    )
}

fn greedy_efficacy(f: &Fixture) -> Outcome {
    let stats = residual_stats(&f.training, q(50), THRESHOLD, SCALE_BITS).unwrap();
    let greedy = stats.chain_bound(&stats.greedy_order().unwrap()).unwrap();
    let identity: Vec<usize> = (0..stats.dimension()).collect();
    let ident = stats.chain_bound(&identity).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut best_random = f64::INFINITY;
    for _ in 0..100 {
        let mut p = identity.clone();
        p.shuffle(&mut rng);
        best_random = best_random.min(stats.chain_bound(&p).unwrap());
    }
    outcome(
        greedy <= ident && greedy <= best_random,
        format!("greedy {greedy:.2} bits, identity {ident:.2}, best of 100 random {best_random:.2}"),
    )
}

fn coder_efficiency(f: &Fixture) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    let mut passed = true;
    for model in [f.models.nearest_residual(50).unwrap(), f.models.intra().unwrap()] {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<_> = (0..10_000).map(|_| model.sample(&mut rng)).collect();
        let cross = v.iter().map(|x| model.code_length(x).unwrap()).sum::<f64>() / v.len() as f64;
        let block = encode_block(&v, model).unwrap();
        let measured = block.payload.len() as f64 * 8.0 / v.len() as f64;
        passed &= measured <= 1.02 * cross + 64.0;
        worst = worst.max(measured / cross);
        lines.push(format!(
            "{} q{}: {measured:.2} vs {cross:.2}",
            model.kind, model.quality_bucket
        ));
    }
    outcome(
        passed,
        format!("bits/descriptor {}; worst ratio {worst:.4}", lines.join(", ")),
    )
}

fn mean_residual_bits(f: &Fixture, v: u32) -> f64 {
    let model = f.models.nearest_residual(v as u8).unwrap();
    assert_eq!(model.quality_bucket as u32, v);
    let vectors: Vec<_> = f
        .retrieval
        .iter()
        .flat_map(|c| residual_vectors(&c.image, q(v), THRESHOLD, SCALE_BITS).unwrap())
        .collect();
    let bits: usize = vectors
        .chunks(u16::MAX as usize)
        .map(|c| encode_block(c, model).unwrap().payload.len() * 8)
        .sum();
    bits as f64 / vectors.len() as f64
}

fn residual_trend(f: &Fixture) -> Outcome {
    let (low, high) = (mean_residual_bits(f, 10), mean_residual_bits(f, 70));
    outcome(high < low, format!("q70 {high:.1} bits/descriptor, q10 {low:.1}"))
}

/// For each CTA point, the HATC points whose total rate is within the window.
fn matched_budgets(points: &[RateAccuracyPoint]) -> Vec<(&RateAccuracyPoint, Vec<&RateAccuracyPoint>)> {
    let mut cta: Vec<_> = points.iter().filter(|p| p.method == Method::Cta).collect();
    cta.sort_by(|a, b| a.bytes_total.total_cmp(&b.bytes_total));
    cta.into_iter()
        .map(|c| {
            let near = points
                .iter()
                .filter(|p| {
                    p.method == Method::Hatc && (p.bytes_total - c.bytes_total).abs() <= BUDGET_WINDOW * c.bytes_total
                })
                .collect::<Vec<_>>();
            (c, near)
        })
        .filter(|(_, near)| !near.is_empty())
        .collect()
}

fn rate_accuracy(points: &[RateAccuracyPoint], elapsed: Duration) -> Outcome {
    println!("{}", String::from_utf8(to_csv(points).unwrap()).unwrap().trim_end());
    let matched = matched_budgets(points);
    let mut passed = matched.len() >= 2 && elapsed < Duration::from_secs(600);
    let mut notes = Vec::new();
    for (cta, near) in matched.iter().take(2) {
        let best = near.iter().max_by(|a, b| a.map.total_cmp(&b.map)).unwrap();
        passed &= best.map >= cta.map;
        notes.push(format!(
            "CTA q{} {:.0} B MAP {:.4} vs HATC q{} Z{} {:.0} B MAP {:.4}",
            cta.q.unwrap(),
            cta.bytes_total,
            cta.map,
            best.q.unwrap(),
            best.refine_z.unwrap(),
            best.bytes_total,
            best.map
        ));
    }
    notes.push(format!("{:.0} s", elapsed.as_secs_f64()));
    outcome(passed, notes.join("; "))
}

fn location_rate_formula() -> Outcome {
    let mut lens = Vec::new();
    for m in [0u32, 1, 150] {
        let kps: Vec<_> = (0..m)
            .map(|i| Keypoint {
                x: (i * 97) % 2560,
                y: (i * 61) % 1920,
                scale: 1.0 + (i % 7) as f32,
                ..Keypoint::default()
            })
            .collect();
        lens.push((m, encode_locations(&kps, 640, 480, 8).unwrap().payload_bits()));
    }
    outcome(
        lens.iter().all(|&(m, bits)| bits == m as u64 * 31),
        format!("{lens:?} (count, bits)"),
    )
}

fn ap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10usize);
        let mut entries: Vec<usize> = (0..n).collect();
        entries.shuffle(&mut rng);
        let mut relevant: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
        if relevant.is_empty() {
            relevant.insert(rng.random_range(0..n));
        }
        let mut exact = Ratio::<i64>::from_integer(0);
        let mut hits = 0;
        for (k, id) in entries.iter().enumerate() {
            if relevant.contains(id) {
                hits += 1;
                exact += Ratio::new(hits, k as i64 + 1);
            }
        }
        exact /= relevant.len() as i64;
        let ap = average_precision(&RankedList { query_id: 0, entries }, &relevant).unwrap();
        worst = worst.max((ap - *exact.numer() as f64 / *exact.denom() as f64).abs());
    }
    outcome(worst <= 1e-12, format!("1000 lists, max deviation {worst:.2e}"))
}

fn psnr_closed_forms() -> Outcome {
    let a = Image::from_fn(64, 48, |x, y| ((x * 3 + y * 5) % 250) as u8);
    let shifted = |by: u8| Image::from_fn(64, 48, |x, y| a.get(x, y) + by);
    let one = psnr(&a, &shifted(1)).unwrap();
    let two = psnr(&a, &shifted(2)).unwrap();
    outcome(
        (one - 48.13).abs() <= 0.01 && (two - 42.11).abs() <= 0.01,
        format!("offset 1 {one:.4} dB, offset 2 {two:.4} dB"),
    )
}

fn model_bytes(models: &ModelSet) -> Vec<Vec<u8>> {
    models.models().iter().map(|m| m.to_bytes()).collect()
}

fn determinism(f: &Fixture, csv: &[u8]) -> Outcome {
    let again = fixture(1);
    let same_corpus = again
        .retrieval
        .iter()
        .zip(&f.retrieval)
        .all(|(a, b)| a.image == b.image && a.name == b.name)
        && again.training == f.training;
    let same_models = model_bytes(&again.models) == model_bytes(&f.models);
    let rc = RetrievalCorpus::from_images(&again.retrieval).unwrap();
    let csv2 = to_csv(&sweep(&rc, &SweepGrid::default(), &again.models).unwrap()).unwrap();
    outcome(
        same_corpus && same_models && csv2 == csv,
        format!(
            "corpus identical {same_corpus}, models identical {same_models}, CSV identical {} ({} bytes)",
            csv2 == csv,
            csv.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut run = |id: u32, name: &'static str, check: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = check();
        results.push((id, name, o, start.elapsed()));
    };

    let start = Instant::now();
    let f = fixture(1);
    println!("corpus and models ready in {:.1} s", start.elapsed().as_secs_f64());

    run(1, "lossless descriptor coding", &mut || lossless_coding(&f));
    run(2, "closed-loop refinement exactness", &mut || closed_loop(&f));
    run(3, "greedy order efficacy", &mut || greedy_efficacy(&f));
    run(4, "coder efficiency", &mut || coder_efficiency(&f));
    run(5, "residual rate falls with quality", &mut || residual_trend(&f));
    let mut csv = Vec::new();
    run(6, "rate-accuracy ordering", &mut || {
        let started = Instant::now();
        let rc = RetrievalCorpus::from_images(&f.retrieval).unwrap();
        let points = sweep(&rc, &SweepGrid::default(), &f.models).unwrap();
        csv = to_csv(&points).unwrap();
        rate_accuracy(&points, started.elapsed())
    });
    run(7, "location rate formula", &mut location_rate_formula);
    run(8, "average precision oracle", &mut ap_oracle);
    run(9, "PSNR closed forms", &mut psnr_closed_forms);
    run(10, "sweep determinism", &mut || determinism(&f, &csv));

    let limits = [(1, 30), (2, 300), (6, 600)];
    let mut failed = 0;
    for (id, name, o, took) in &results {
        let over = limits.iter().any(|&(i, secs)| i == *id && took.as_secs() >= secs);
        let ok = o.passed && !over;
        failed += !ok as usize;
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1} s{}]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            if over { ", over time limit" } else { "" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
