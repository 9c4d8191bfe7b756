use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pava::dataset as csvio;
use pava::dataset::{generate_synthetic, Shape};
use pava::engine::{run, ClusterModel, PavaConfig};
use pava::metrics::{score_all, Scores};
use pava::mstgraph::MstMode;
use pava::{DissimilarityMatrix, DissimilaritySource, LabeledPartition, PavaError};

mod emit;
mod report;

/// Path-based valley-seeking clustering.
#[derive(Parser)]
#[command(name = "pava", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset as `<out>.points.csv` and `<out>.labels.csv`.
    Generate {
        #[arg(long, value_parser = parse_shape)]
        shape: Shape,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; defaults to the shape name.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the Euclidean dissimilarity matrix as `<out>.matrix.csv`.
        #[arg(long)]
        matrix: bool,
    },
    /// Cluster a points CSV (or a dissimilarity matrix with `--matrix`).
    Cluster {
        input: PathBuf,
        #[command(flatten)]
        input_kind: InputKind,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        tuning: Tuning,
        /// Ground-truth labels; adds RI, ARI and FS to the report.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Defaults to `<input stem>.pred.labels.csv`.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Defaults to `<input stem>.report.json`.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Tree edges as `u,v,weight,raw_weight`.
        #[arg(long)]
        emit_mst: Option<PathBuf>,
        /// Per-object k-distances (with coordinates in point mode).
        #[arg(long)]
        emit_kdist: Option<PathBuf>,
        /// Per-round histograms: raw, shifted and smoothed counts.
        #[arg(long)]
        emit_histogram: Option<PathBuf>,
    },
    /// Print `RI,ARI,FS` of a predicted labeling against the truth.
    Evaluate { predicted: PathBuf, truth: PathBuf },
    /// Cluster once per (k, repeat) and print one CSV row each.
    Sweep {
        /// Points or matrix CSV; omit to generate with `--shape`.
        input: Option<PathBuf>,
        #[command(flatten)]
        input_kind: InputKind,
        /// For generated input; repeat `r` uses seed `seed + r`.
        #[arg(long, value_parser = parse_shape, conflicts_with = "input")]
        shape: Option<Shape>,
        #[arg(long, requires = "shape")]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated values or inclusive ranges, e.g. `3,5..12`.
        #[arg(long, value_parser = parse_k_list)]
        k: KList,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, conflicts_with = "shape")]
        truth: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct InputKind {
    /// Input is an N×N dissimilarity matrix.
    #[arg(long)]
    matrix: bool,
    /// The last column of a points CSV holds ground-truth labels.
    #[arg(long, conflicts_with = "matrix")]
    label_column: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MstArg {
    Exact,
    Approx,
}

#[derive(Args, Clone)]
struct Tuning {
    /// Use the raw tree instead of the density-adjusted one.
    #[arg(long)]
    no_adjust: bool,
    #[arg(long)]
    stop_fraction: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    mst: MstArg,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    min_side: Option<f64>,
    #[arg(long)]
    min_rise: Option<f64>,
    #[arg(long)]
    min_unlabeled: Option<usize>,
}

impl Tuning {
    fn config(&self, k: Option<usize>) -> PavaConfig {
        let mut cfg = PavaConfig {
            k,
            use_adjusted: !self.no_adjust,
            mst_mode: match self.mst {
                MstArg::Exact => MstMode::Exact,
                MstArg::Approx => MstMode::Approximate,
            },
            ..Default::default()
        };
        let set = |slot: &mut f64, v: Option<f64>| v.into_iter().for_each(|v| *slot = v);
        set(&mut cfg.stop_fraction, self.stop_fraction);
        set(&mut cfg.trim_percentile, self.percentile);
        set(&mut cfg.min_score, self.min_score);
        set(&mut cfg.min_side, self.min_side);
        set(&mut cfg.min_rise, self.min_rise);
        cfg.bins = self.bins.unwrap_or(cfg.bins);
        cfg.smooth_window = self.smooth_window.unwrap_or(cfg.smooth_window);
        cfg.min_unlabeled = self.min_unlabeled.unwrap_or(cfg.min_unlabeled);
        cfg
    }
}

#[derive(Clone, Debug)]
struct KList(Vec<usize>);

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse().map_err(|e: PavaError| {
        format!("{e}; expected one of twomoons, twomoons_noise, twomoons_bridge, ccrings, spiral, blobs")
    })
}

fn parse_k_list(s: &str) -> Result<KList, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{t}` is not a k value"))
        };
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                ks.extend(a..=b);
            }
            None => ks.push(num(part)?),
        }
    }
    if ks.is_empty() {
        return Err("k list is empty".into());
    }
    Ok(KList(ks))
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn pipeline(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

/// Bad flags and unreadable or malformed inputs are usage errors.
fn input_error(e: PavaError) -> Failure {
    usage(e)
}

fn engine_error(e: PavaError) -> Failure {
    if e.is_usage() {
        usage(e)
    } else {
        pipeline(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Generate {
            shape,
            n,
            seed,
            out,
            matrix,
        } => cmd_generate(&shape, n, seed, out, matrix),
        Command::Cluster {
            input,
            input_kind,
            k,
            tuning,
            truth,
            labels_out,
            report_out,
            emit_mst,
            emit_kdist,
            emit_histogram,
        } => cmd_cluster(ClusterJob {
            input,
            input_kind,
            config: tuning.config(k),
            truth,
            labels_out,
            report_out,
            emit_mst,
            emit_kdist,
            emit_histogram,
        }),
        Command::Evaluate { predicted, truth } => cmd_evaluate(&predicted, &truth),
        Command::Sweep {
            input,
            input_kind,
            shape,
            n,
            seed,
            k,
            repeats,
            tuning,
            truth,
            out,
        } => {
            let source = match (input, shape) {
                (Some(path), None) => SweepSource::File {
                    path,
                    kind: input_kind,
                    truth,
                },
                (None, Some(shape)) => match n {
                    Some(n) => SweepSource::Generated { shape, n, seed },
                    None => Err(usage(anyhow!("--shape needs --n")))?,
                },
                _ => Err(usage(anyhow!("give an input file or --shape")))?,
            };
            cmd_sweep(source, &k.0, repeats, &tuning, out)
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pava: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain joined by `: `, skipping causes already in the message.
fn describe(error: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn configure_threads() -> CmdResult {
    let Ok(raw) = std::env::var("PAVA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        usage(anyhow!(
            "PAVA_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(pipeline)?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `tm.points.csv` → `tm`; `data/x.csv` → `data/x`.
fn input_stem(input: &Path) -> PathBuf {
    let name = input.file_name().and_then(|n| n.to_str()).unwrap_or("pava");
    let stem = name.strip_suffix(".csv").unwrap_or(name);
    let stem = stem
        .strip_suffix(".points")
        .or_else(|| stem.strip_suffix(".matrix"))
        .unwrap_or(stem);
    input.with_file_name(stem)
}

fn cmd_generate(
    shape: &Shape,
    n: usize,
    seed: u64,
    out: Option<PathBuf>,
    matrix: bool,
) -> CmdResult {
    let (points, truth) = generate_synthetic(shape, n, seed).map_err(engine_error)?;
    let prefix = out.unwrap_or_else(|| PathBuf::from(shape.name()));
    let points_path = with_suffix(&prefix, ".points.csv");
    let labels_path = with_suffix(&prefix, ".labels.csv");
    csvio::write_points_csv(&points_path, &points).map_err(pipeline)?;
    csvio::write_labels_csv(&labels_path, truth.labels()).map_err(pipeline)?;
    if matrix {
        let path = with_suffix(&prefix, ".matrix.csv");
        csvio::write_matrix_csv(&path, &DissimilarityMatrix::from_points(&points))
            .map_err(pipeline)?;
    }
    println!(
        "{}: {} points, d={}, {} clusters, seed {} -> {}, {}",
        shape.name(),
        points.len(),
        points.dim(),
        truth.m(),
        seed,
        points_path.display(),
        labels_path.display()
    );
    Ok(())
}

fn load_source(
    path: &Path,
    kind: &InputKind,
) -> Result<(DissimilaritySource, Option<LabeledPartition>), Failure> {
    if kind.matrix {
        let m = csvio::load_matrix_csv(path).map_err(input_error)?;
        Ok((m.into(), None))
    } else {
        let (p, truth) = csvio::load_points_csv(path, kind.label_column).map_err(input_error)?;
        Ok((p.into(), truth))
    }
}

fn load_truth(path: &Path, n: usize) -> Result<LabeledPartition, Failure> {
    let truth = csvio::load_labels_csv(path).map_err(input_error)?;
    if truth.len() != n {
        return Err(usage(anyhow!(
            "{}: {} labels for {} objects",
            path.display(),
            truth.len(),
            n
        )));
    }
    Ok(truth)
}

struct ClusterJob {
    input: PathBuf,
    input_kind: InputKind,
    config: PavaConfig,
    truth: Option<PathBuf>,
    labels_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
    emit_mst: Option<PathBuf>,
    emit_kdist: Option<PathBuf>,
    emit_histogram: Option<PathBuf>,
}

fn cmd_cluster(job: ClusterJob) -> CmdResult {
    let (src, embedded_truth) = load_source(&job.input, &job.input_kind)?;
    job.config.validate(src.len()).map_err(engine_error)?;
    let truth = match &job.truth {
        Some(path) => Some(load_truth(path, src.len())?),
        None => embedded_truth,
    };
    let model = run(&src, &job.config).map_err(engine_error)?;
    let scores = truth
        .as_ref()
        .map(|t| score_all(t.labels(), &model.labels))
        .transpose()
        .map_err(pipeline)?;

    let stem = input_stem(&job.input);
    let labels_out = job
        .labels_out
        .unwrap_or_else(|| with_suffix(&stem, ".pred.labels.csv"));
    let report_out = job
        .report_out
        .unwrap_or_else(|| with_suffix(&stem, ".report.json"));
    csvio::write_labels_csv(&labels_out, &model.labels).map_err(pipeline)?;
    let rep = report::RunReport::new(&job.input, &src, &job.config, &model, scores);
    write_file(&report_out, |w| {
        serde_json::to_writer_pretty(&mut *w, &rep)?;
        writeln!(w)
    })?;
    if let Some(path) = &job.emit_mst {
        write_file(path, |w| emit::mst(w, &model))?;
    }
    if let Some(path) = &job.emit_kdist {
        write_file(path, |w| emit::kdist(w, &model, src.points()))?;
    }
    if let Some(path) = &job.emit_histogram {
        write_file(path, |w| emit::histograms(w, &model))?;
    }

    let metrics = scores
        .map(|s| format!(" RI={:.4} ARI={:.4} FS={:.4}", s.ri, s.ari, s.fs))
        .unwrap_or_default();
    println!(
        "N={} k={} M={}{} in {:.1} ms -> {}, {}",
        src.len(),
        model.k,
        model.m,
        metrics,
        model.timings.total.as_secs_f64() * 1e3,
        labels_out.display(),
        report_out.display()
    );
    Ok(())
}

fn write_file<F>(path: &Path, body: F) -> CmdResult
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path)
        .with_context(|| format!("{}: cannot create", path.display()))
        .map_err(pipeline)?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("{}: write failed", path.display()))
        .map_err(pipeline)
}

fn cmd_evaluate(predicted: &Path, truth: &Path) -> CmdResult {
    let pred = csvio::load_labels_csv(predicted).map_err(input_error)?;
    let truth = csvio::load_labels_csv(truth).map_err(input_error)?;
    let s = score_all(truth.labels(), pred.labels()).map_err(usage)?;
    println!("{:?},{:?},{:?}", s.ri, s.ari, s.fs);
    Ok(())
}

enum SweepSource {
    File {
        path: PathBuf,
        kind: InputKind,
        truth: Option<PathBuf>,
    },
    Generated {
        shape: Shape,
        n: usize,
        seed: u64,
    },
}

struct SweepRow {
    dataset: String,
    k: usize,
    repeat: usize,
    scores: Option<Scores>,
    model: ClusterModel,
}

fn cmd_sweep(
    source: SweepSource,
    ks: &[usize],
    repeats: usize,
    tuning: &Tuning,
    out: Option<PathBuf>,
) -> CmdResult {
    if repeats == 0 {
        return Err(usage(anyhow!("--repeats must be at least 1")));
    }
    let loaded = match &source {
        SweepSource::File { path, kind, truth } => {
            let (src, embedded) = load_source(path, kind)?;
            let truth = match truth {
                Some(t) => Some(load_truth(t, src.len())?),
                None => embedded,
            };
            Some((path.display().to_string(), src, truth))
        }
        SweepSource::Generated { .. } => None,
    };
    let mut rows = Vec::with_capacity(ks.len() * repeats);
    for repeat in 0..repeats {
        let generated;
        let (dataset, src, truth) = match (&source, &loaded) {
            (_, Some((name, src, truth))) => (name.clone(), src, truth.as_ref()),
            (SweepSource::Generated { shape, n, seed }, None) => {
                let seed = seed + repeat as u64;
                let (p, t) = generate_synthetic(shape, *n, seed).map_err(engine_error)?;
                generated = (DissimilaritySource::from(p), t);
                (
                    format!("{}_n{}_s{}", shape.name(), n, seed),
                    &generated.0,
                    Some(&generated.1),
                )
            }
            (SweepSource::File { .. }, None) => unreachable!(),
        };
        for &k in ks {
            let cfg = tuning.config(Some(k));
            cfg.validate(src.len()).map_err(engine_error)?;
            let model = run(src, &cfg).map_err(engine_error)?;
            let scores = truth
                .map(|t| score_all(t.labels(), &model.labels))
                .transpose()
                .map_err(pipeline)?;
            rows.push(SweepRow {
                dataset: dataset.clone(),
                k,
                repeat,
                scores,
                model,
            });
        }
    }
    let body = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(
            w,
            "dataset,k,repeat,RI,ARI,FS,M,runtime_ms,kdist_ms,mst_ms,extraction_ms,propagation_ms"
        )?;
        for r in &rows {
            let metric = |f: fn(&Scores) -> f64| {
                r.scores
                    .as_ref()
                    .map(|s| format!("{:?}", f(s)))
                    .unwrap_or_default()
            };
            let t = &r.model.timings;
            let ms = |d: std::time::Duration| format!("{:.3}", d.as_secs_f64() * 1e3);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.dataset,
                r.k,
                r.repeat,
                metric(|s| s.ri),
                metric(|s| s.ari),
                metric(|s| s.fs),
                r.model.m,
                ms(t.total),
                ms(t.kdist),
                ms(t.mst),
                ms(t.extraction),
                ms(t.propagation)
            )?;
        }
        Ok(())
    };
    match out {
        Some(path) => write_file(&path, |w| body(w)),
        None => body(&mut io::stdout().lock()).map_err(pipeline),
    }
}
