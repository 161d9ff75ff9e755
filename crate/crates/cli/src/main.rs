use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hatc::codec::QualityFactor;
use hatc::container::{demux, mux};
use hatc::corpus::{self, CorpusConfig, TRAINING_DIR};
use hatc::entropy::{DexelOrderModel, ModelSet, SourceKind};
use hatc::eval::report::{to_csv, write_charts};
use hatc::eval::{Manifest, RateAccuracyPoint, RetrievalCorpus, SweepGrid};
use hatc::fsutil::write_atomic;
use hatc::location::DEFAULT_SCALE_BITS;
use hatc::pipeline::{self, EncodeConfig, Method, DEFAULT_THRESHOLD};
use hatc::train::{model_file_name, train_intra, train_residual, TrainSummary};
use hatc::Image;

#[derive(Parser)]
#[command(name = "hatc", version, about = "Joint image and binary feature codec")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train descriptor coding models from a directory of PGM images or a manifest.
    Train(TrainArgs),
    /// Encode one PGM image into a stream.
    Encode(EncodeArgs),
    /// Decode a stream into an image, a feature file and a rate report.
    Decode(DecodeArgs),
    /// Evaluate rate against retrieval accuracy over a parameter grid.
    Sweep(SweepArgs),
    /// Generate the synthetic retrieval corpus.
    SynthCorpus(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cta,
    Atc,
    Hatc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cta => Method::Cta,
            MethodArg::Atc => Method::Atc,
            MethodArg::Hatc => Method::Hatc,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Residual,
    Intra,
    Both,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of .pgm images, or a manifest file.
    corpus: PathBuf,
    /// Output directory for model files.
    #[arg(long)]
    out: PathBuf,
    /// Image qualities to train residual models for.
    #[arg(long, value_delimiter = ',', default_values_t = [5u32, 10, 15, 20, 50, 70])]
    q: Vec<u32>,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u32,
    #[arg(long, default_value_t = DEFAULT_SCALE_BITS)]
    scale_bits: u8,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input PGM image.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = 50)]
    q: u32,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u32,
    /// Number of refined features (HATC).
    #[arg(long, default_value_t = 50)]
    z: usize,
    #[arg(long, default_value_t = DEFAULT_SCALE_BITS)]
    scale_bits: u8,
    /// Model file or directory (ATC and HATC).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input stream.
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Model file or directory (ATC and HATC).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Detector threshold applied to CTA-decoded images.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u32,
}

#[derive(Args)]
struct SweepArgs {
    /// Corpus manifest. Without one, the synthetic corpus for --seed is used.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model directory. Without one, models are trained on the synthetic
    /// training images for --seed and written under <out>/models.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory for sweep.csv and the charts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Image qualities for CTA and HATC.
    #[arg(long, value_delimiter = ',', default_values_t = [5u32, 10, 15, 20, 50, 70])]
    q: Vec<u32>,
    /// Detector thresholds for ATC.
    #[arg(long = "atc-threshold", value_delimiter = ',', default_values_t = [70u32, 75, 80, 85, 90, 95, 100, 105])]
    atc_thresholds: Vec<u32>,
    /// Refinement counts for HATC.
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 150])]
    z: Vec<usize>,
    /// Detector threshold for database images, CTA decoding and HATC encoding.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u32,
    #[arg(long, default_value_t = DEFAULT_SCALE_BITS)]
    scale_bits: u8,
    /// Methods to include.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Cta, MethodArg::Atc, MethodArg::Hatc])]
    method: Vec<MethodArg>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    objects: usize,
    #[arg(long, default_value_t = 5)]
    views: usize,
    #[arg(long, default_value_t = 1)]
    queries: usize,
    #[arg(long, default_value_t = 40)]
    train_images: usize,
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 240)]
    height: u32,
}

fn quality(q: u32) -> Result<QualityFactor> {
    Ok(QualityFactor::new(q)?)
}

fn load_models(path: Option<&Path>) -> Result<ModelSet> {
    match path {
        Some(p) => ModelSet::load(p).with_context(|| format!("loading models from {}", p.display())),
        None => Ok(ModelSet::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn training_images(path: &Path) -> Result<Vec<Image>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        v.retain(|p| p.extension().is_some_and(|e| e == "pgm"));
        v.sort();
        v
    } else {
        Manifest::load(path)?.entries.into_iter().map(|e| e.path).collect()
    };
    if files.len() < 2 {
        bail!(
            "need at least 2 training images, found {} in {}",
            files.len(),
            path.display()
        );
    }
    files.iter().map(|f| Ok(Image::read_pgm(f)?)).collect()
}

fn print_summary(s: &TrainSummary) {
    let q = match s.kind {
        SourceKind::Residual => format!("q={:<3}", s.quality_bucket),
        SourceKind::Intra => "     ".to_string(),
    };
    println!(
        "{:<8} {q} vectors={:<6} chain={:8.2} identity={:8.2} independent={:8.2} bits/descriptor",
        s.kind.to_string(),
        s.vectors,
        s.chain_bound,
        s.identity_bound,
        s.independent_bound
    );
}

/// Trains the requested models, writes them into `out`, and returns them.
fn train_models(
    images: &[Image],
    out: &Path,
    qs: &[u32],
    kind: KindArg,
    threshold: u32,
    scale_bits: u8,
) -> Result<Vec<DexelOrderModel>> {
    create_dir(out)?;
    let mut trained = Vec::new();
    if kind != KindArg::Intra {
        for &q in qs {
            trained.push(train_residual(images, quality(q)?, threshold, scale_bits)?);
        }
    }
    if kind != KindArg::Residual {
        trained.push(train_intra(images, threshold)?);
    }
    let mut models = Vec::new();
    for (model, summary) in trained {
        print_summary(&summary);
        model.save(out.join(model_file_name(model.kind, model.quality_bucket)))?;
        models.push(model);
    }
    Ok(models)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let images = training_images(&a.corpus)?;
    train_models(&images, &a.out, &a.q, a.kind, a.threshold, a.scale_bits)?;
    Ok(())
}

fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let image = Image::read_pgm(&a.input)?;
    let method: Method = a.method.into();
    let models = load_models(a.model.as_deref())?;
    if method != Method::Cta && models.is_empty() {
        bail!("{method} encoding needs --model");
    }
    let config = EncodeConfig {
        method,
        quality: quality(a.q)?,
        threshold: a.threshold,
        refine_count: a.z,
        scale_bits: a.scale_bits,
    };
    let encoded = pipeline::encode(&image, &config, &models)?;
    let bytes = mux(&encoded.stream)?;
    write_atomic(&a.out, &bytes)?;
    let r = encoded.rate();
    println!(
        "{method}: {} bytes (header {}, image {}, location {}, enhancement {}), {} features",
        bytes.len(),
        r.header,
        r.image,
        r.location,
        r.enhancement,
        encoded.features.len()
    );
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    let bytes = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let stream = demux(&bytes)?;
    let method = pipeline::stream_method(&stream)?;
    let models = load_models(a.model.as_deref())?;
    if method != Method::Cta && models.is_empty() {
        bail!("{method} stream needs --model");
    }
    let decoded = pipeline::decode(&stream, &models, a.threshold)?;
    create_dir(&a.out)?;
    if let Some(img) = &decoded.image {
        img.write_pgm(a.out.join("decoded.pgm"))?;
    }
    write_atomic(&a.out.join("features.hfts"), &decoded.features.to_bytes())?;
    let r = decoded.rate;
    let report = format!(
        "layer,bytes\nheader,{}\nimage,{}\nlocation,{}\nenhancement,{}\ntotal,{}\n",
        r.header,
        r.image,
        r.location,
        r.enhancement,
        r.total()
    );
    write_atomic(&a.out.join("rate.csv"), report.as_bytes())?;
    println!("{method}: {} features, {} bytes", decoded.features.len(), r.total());
    Ok(())
}

fn print_points(points: &[RateAccuracyPoint]) {
    println!(
        "{:<5} {:>4} {:>5} {:>5} {:>10} {:>8} {:>7}",
        "meth", "q", "t", "z", "bytes", "psnr", "map"
    );
    for p in points {
        let dash = || "-".to_string();
        println!(
            "{:<5} {:>4} {:>5} {:>5} {:>10.1} {:>8} {:>7.4}",
            p.method.to_string(),
            p.q.map_or_else(dash, |v| v.to_string()),
            p.threshold,
            p.refine_z.map_or_else(dash, |v| v.to_string()),
            p.bytes_total,
            p.psnr_db.map_or_else(dash, |v| format!("{v:.2}")),
            p.map
        );
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    create_dir(&a.out)?;
    let synth = CorpusConfig {
        seed: a.seed,
        ..CorpusConfig::default()
    };
    let (corpus, generated_training) = match &a.manifest {
        Some(m) => (RetrievalCorpus::from_manifest(&Manifest::load(m)?)?, None),
        None => {
            let (retrieval, training) = corpus::generate(&synth)?;
            (RetrievalCorpus::from_images(&retrieval)?, Some(training))
        }
    };
    let methods: Vec<Method> = a.method.iter().map(|&m| m.into()).collect();
    let models = match (&a.model, generated_training) {
        (Some(p), _) => load_models(Some(p))?,
        (None, Some(training)) => {
            let images: Vec<Image> = training.into_iter().map(|t| t.image).collect();
            ModelSet::new(train_models(
                &images,
                &a.out.join("models"),
                &a.q,
                KindArg::Both,
                a.threshold,
                a.scale_bits,
            )?)
        }
        (None, None) if methods.iter().all(|&m| m == Method::Cta) => ModelSet::default(),
        (None, None) => bail!("sweeping ATC or HATC over a manifest needs --model"),
    };
    let qs = a.q.iter().map(|&q| quality(q)).collect::<Result<Vec<_>>>()?;
    let with = |m: Method| methods.contains(&m);
    let grid = SweepGrid {
        cta_qualities: if with(Method::Cta) { qs.clone() } else { Vec::new() },
        atc_thresholds: if with(Method::Atc) {
            a.atc_thresholds.clone()
        } else {
            Vec::new()
        },
        hatc_qualities: if with(Method::Hatc) { qs } else { Vec::new() },
        hatc_refine_counts: a.z.clone(),
        threshold: a.threshold,
        scale_bits: a.scale_bits,
    };
    let points = hatc::eval::sweep(&corpus, &grid, &models)?;
    write_atomic(&a.out.join("sweep.csv"), &to_csv(&points)?)?;
    write_charts(&points, &a.out)?;
    print_points(&points);
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let config = CorpusConfig {
        objects: a.objects,
        db_views: a.views,
        queries_per_object: a.queries,
        training_images: a.train_images,
        width: a.width,
        height: a.height,
        seed: a.seed,
    };
    let manifest = corpus::write_corpus(&a.out, &config)?;
    println!(
        "wrote {} objects x {} views + {} queries each, {} training images in {}/; manifest {}",
        a.objects,
        a.views,
        a.queries,
        a.train_images,
        a.out.join(TRAINING_DIR).display(),
        manifest.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::SynthCorpus(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
