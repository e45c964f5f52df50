//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or input error, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_bench, BenchOptions};
use crate::codec::{
    self, content_digest, decode_image, render_segmentation, write_image, DbReport, FeatureInfo,
    RenderStyle, ResultManifest,
};
use crate::engine::{self, default_top_count, ClusteringResult, ConvergenceTrace, MwoConfig};
use crate::error::{Error, Result};
use crate::evaluation::{db_index, DbParams};
use crate::features::{csv_to_dataset, image_to_dataset, CsvTable, FeatureMode};
use crate::model::{FeatureDataset, Partition};
use crate::synthetic::{gen_blobs, gen_rgb_squares, gen_six_colors, BlobSpec};

pub const THREADS_ENV: &str = "MUSSELSEG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "musselseg", version, about = "Automatic pixel and point clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image (PNG or P6 PPM).
    Segment(SegmentArgs),
    /// Cluster the rows of a CSV file.
    Cluster(ClusterArgs),
    /// Write a synthetic test input.
    Synth(SynthArgs),
    /// Davies-Bouldin index of a given labeling.
    EvalDb(EvalDbArgs),
    /// Segment every image in a folder and report DB mean and variance.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Number of mussels.
    #[arg(long, default_value_t = 50)]
    pub pop: usize,
    /// Maximum number of clusters.
    #[arg(long, default_value_t = 15)]
    pub kmax: usize,
    /// Elite count [default: max(1, ceil(pop / 10))].
    #[arg(long)]
    pub top: Option<usize>,
    /// Levy walk scale.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Levy walk exponent (> 1).
    #[arg(long, default_value_t = 2.0)]
    pub mu: f64,
    /// Activation threshold.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Number of iterations.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fitness evaluation subsample cap (points).
    #[arg(long, default_value_t = 16384)]
    pub sample: usize,
    /// Upper bound on the levy step length.
    #[arg(long, default_value_t = 2.0)]
    pub levy_cap: f64,
    /// Draw each mussel's levy step once instead of every iteration.
    #[arg(long)]
    pub fixed_levy: bool,
    /// Stop after this many iterations without improvement (0 = never).
    #[arg(long, default_value_t = 0)]
    pub stagnation: usize,
    /// DB scatter order.
    #[arg(long, default_value_t = 2)]
    pub q_order: u32,
    /// DB center-distance Minkowski order.
    #[arg(long, default_value_t = 2)]
    pub t_order: u32,
}

impl EngineArgs {
    pub fn config(&self) -> Result<MwoConfig> {
        let config = MwoConfig {
            population: self.pop,
            k_max: self.kmax,
            top_count: self.top.unwrap_or_else(|| default_top_count(self.pop)),
            gamma: self.gamma,
            mu: self.mu,
            activation_threshold: self.threshold,
            max_iter: self.iters,
            seed: self.seed,
            subsample_cap: self.sample,
            levy_cap: self.levy_cap,
            levy_resample: !self.fixed_levy,
            stagnation_window: self.stagnation,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn db_params(&self) -> Result<DbParams> {
        DbParams::new(self.q_order, self.t_order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFeatures {
    Rgbxy,
    Rgb,
    Labxy,
    Lab,
}

impl From<ImageFeatures> for FeatureMode {
    fn from(f: ImageFeatures) -> Self {
        match f {
            ImageFeatures::Rgbxy => FeatureMode::Rgbxy,
            ImageFeatures::Rgb => FeatureMode::Rgb,
            ImageFeatures::Labxy => FeatureMode::Labxy,
            ImageFeatures::Lab => FeatureMode::Lab,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderArg {
    GrayLabels,
    MeanColor,
}

impl From<RenderArg> for RenderStyle {
    fn from(r: RenderArg) -> Self {
        match r {
            RenderArg::GrayLabels => RenderStyle::GrayLabels,
            RenderArg::MeanColor => RenderStyle::MeanColor,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ImageFeatureArgs {
    /// Per-pixel feature space.
    #[arg(long, value_enum, default_value_t = ImageFeatures::Rgbxy)]
    pub features: ImageFeatures,
    /// Weight of the XY columns, which span [0, 255 * weight].
    #[arg(long, default_value_t = 1.0)]
    pub spatial_weight: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// JSON manifest path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Convergence trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record wall time in the manifest (makes it run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub features: ImageFeatureArgs,
    /// Rendered segmentation (.png or .ppm).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RenderArg::GrayLabels)]
    pub render: RenderArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    pub csv: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Labeled CSV output (input columns plus `cluster`).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Blobs,
    RgbSquares,
    SixColors,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Blob generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blob standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 150)]
    pub points_per_blob: usize,
    /// Uniform background points.
    #[arg(long, default_value_t = 50)]
    pub noise: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalDbArgs {
    /// CSV points or an image.
    pub data: PathBuf,
    /// File with one label per data row (an optional non-numeric header is skipped).
    #[arg(long, conflicts_with = "label_column")]
    pub labels: Option<PathBuf>,
    /// Label column inside the CSV [default: a trailing `label` or `cluster` column].
    #[arg(long)]
    pub label_column: Option<String>,
    #[command(flatten)]
    pub features: ImageFeatureArgs,
    #[arg(long, default_value_t = 2)]
    pub q_order: u32,
    #[arg(long, default_value_t = 2)]
    pub t_order: u32,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub dir: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub features: ImageFeatureArgs,
    /// Report CSV path.
    #[arg(long, default_value = "bench_report.csv")]
    pub report: PathBuf,
    /// Runs per image; repeat r > 0 mixes r into the derived seed.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Fixed-k baseline to evaluate alongside.
    #[arg(long, value_parser = ["kmeans"], requires = "k")]
    pub baseline: Option<String>,
    /// Cluster count for the baseline.
    #[arg(long, requires = "baseline")]
    pub k: Option<usize>,
    /// Fill the wall_ms column (makes the report run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("error: {THREADS_ENV} must be a non-negative integer, got {v:?}");
                return ExitCode::from(2);
            }
        },
        Err(_) => 0,
    };
    let outcome = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
        .and_then(|pool| pool.install(|| dispatch(cli.command)));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Segment(args) => cmd_segment(&args),
        Command::Cluster(args) => cmd_cluster(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::EvalDb(args) => cmd_eval_db(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn tool_name() -> String {
    format!("musselseg {}", env!("CARGO_PKG_VERSION"))
}

/// Assembles the manifest of a finished run.
pub fn build_manifest(
    result: &ClusteringResult,
    config: &MwoConfig,
    features: FeatureInfo,
    digest: String,
    record_timing: bool,
    points: usize,
) -> ResultManifest {
    ResultManifest {
        tool: tool_name(),
        input_digest: digest,
        seed: config.seed,
        config: config.clone(),
        features,
        points,
        eval_points: result.eval_points,
        k_eff: result.k_eff,
        centers: result.centers.to_rows(),
        rf: codec::finite(result.rf),
        db: DbReport {
            value: codec::finite(result.db),
            q_order: result.db_params.q_order,
            t_order: result.db_params.t_order,
        },
        iterations: result.iterations,
        wall_ms: record_timing.then_some(result.wall_ms),
    }
}

fn write_run_outputs(
    output: &OutputArgs,
    manifest: &ResultManifest,
    trace: &ConvergenceTrace,
) -> Result<()> {
    if let Some(path) = &output.manifest {
        codec::write_manifest(path, manifest)?;
    }
    if let Some(path) = &output.trace {
        codec::write_trace(path, trace)?;
    }
    Ok(())
}

fn image_feature_info(mode: FeatureMode, weight: f64, dataset: &FeatureDataset) -> FeatureInfo {
    let mode = if weight == 0.0 { mode.without_xy() } else { mode };
    FeatureInfo {
        mode,
        spatial_weight: Some(weight),
        xy_scaling: mode
            .has_xy()
            .then(|| "column and row scaled to [0, 255 * spatial_weight]".to_string()),
        dim_names: dataset.dim_names().to_vec(),
    }
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let config = args.engine.config()?;
    let db_params = args.engine.db_params()?;
    let bytes = read(&args.image)?;
    let image = decode_image(&bytes)?;
    let mode = FeatureMode::from(args.features.features);
    let dataset = image_to_dataset(&image, mode, args.features.spatial_weight)?;
    let (result, trace) = engine::run_observed(&dataset, &config, db_params, |_| {})?;

    if let Some(out) = &args.out {
        let rendered = render_segmentation(
            image.width(),
            image.height(),
            &result.labels,
            &image,
            args.render.into(),
        )?;
        write_image(out, &rendered)?;
    }
    let info = image_feature_info(mode, args.features.spatial_weight, &dataset);
    let manifest = build_manifest(
        &result,
        &config,
        info,
        content_digest(&bytes),
        args.output.record_timing,
        dataset.n(),
    );
    write_run_outputs(&args.output, &manifest, &trace)?;
    println!(
        "k_eff={} rf={} db={} iterations={}",
        result.k_eff, result.rf, result.db, result.iterations
    );
    Ok(())
}

pub fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let config = args.engine.config()?;
    let db_params = args.engine.db_params()?;
    let bytes = read(&args.csv)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Parse { line: 1, message: "input is not UTF-8".into() })?;
    let csv = csv_to_dataset(&text)?;
    let (result, trace) = engine::run_observed(&csv.dataset, &config, db_params, |_| {})?;

    if let Some(out) = &args.out {
        let mut body = csv.table.header.join(",");
        body.push_str(",cluster\n");
        for (row, label) in csv.table.rows.iter().zip(&result.labels) {
            body.push_str(&row.join(","));
            body.push(',');
            body.push_str(&label.to_string());
            body.push('\n');
        }
        write(out, body)?;
    }
    let info = FeatureInfo {
        mode: FeatureMode::Raw,
        spatial_weight: None,
        xy_scaling: None,
        dim_names: csv.dataset.dim_names().to_vec(),
    };
    let manifest = build_manifest(
        &result,
        &config,
        info,
        content_digest(&bytes),
        args.output.record_timing,
        csv.dataset.n(),
    );
    write_run_outputs(&args.output, &manifest, &trace)?;
    println!(
        "k_eff={} rf={} db={} iterations={}",
        result.k_eff, result.rf, result.db, result.iterations
    );
    Ok(())
}

/// Blob points as CSV with six significant decimals.
pub fn dataset_to_csv(dataset: &FeatureDataset) -> String {
    let mut out = dataset.dim_names().join(",");
    out.push('\n');
    for row in dataset.points().iter_rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    match args.kind {
        SynthKind::Blobs => {
            let spec = BlobSpec {
                sigma: args.sigma,
                points_per_blob: args.points_per_blob,
                noise_points: args.noise,
                seed: args.seed,
                ..BlobSpec::default()
            };
            write(&args.out, dataset_to_csv(&gen_blobs(&spec)?))
        }
        SynthKind::RgbSquares => write_image(&args.out, &gen_rgb_squares()),
        SynthKind::SixColors => write_image(&args.out, &gen_six_colors()),
    }
}

/// Maps arbitrary label strings to dense ids by first appearance.
fn label_ids(labels: &[String]) -> Vec<usize> {
    let mut seen: Vec<&str> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| *s == l) {
            Some(i) => i,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect()
}

fn read_label_file(path: &Path) -> Result<Vec<String>> {
    let text = String::from_utf8(read(path)?)
        .map_err(|_| Error::Parse { line: 1, message: "labels are not UTF-8".into() })?;
    let mut labels: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if labels.first().is_some_and(|l| l.parse::<f64>().is_err())
        && labels.iter().skip(1).all(|l| l.parse::<f64>().is_ok())
    {
        labels.remove(0);
    }
    Ok(labels)
}

/// Computes the DB index of the labeling named by `args`.
pub fn eval_db(args: &EvalDbArgs) -> Result<(f64, DbParams)> {
    let params = DbParams::new(args.q_order, args.t_order)?;
    let bytes = read(&args.data)?;
    let is_image = codec::ImageFormat::from_path(&args.data).is_some()
        || bytes.starts_with(b"\x89PNG")
        || bytes.starts_with(b"P6");
    let (dataset, labels) = if is_image {
        let image = decode_image(&bytes)?;
        let mode = FeatureMode::from(args.features.features);
        let dataset = image_to_dataset(&image, mode, args.features.spatial_weight)?;
        let labels = match &args.labels {
            Some(p) => read_label_file(p)?,
            None => return Err(Error::config("image input requires --labels")),
        };
        (dataset, labels)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Parse { line: 1, message: "input is not UTF-8".into() })?;
        let table = CsvTable::parse(&text)?;
        match &args.labels {
            Some(p) => (table.to_dataset(None)?, read_label_file(p)?),
            None => {
                let col = match &args.label_column {
                    Some(name) => table.column(name).ok_or_else(|| {
                        Error::config(format!("no column named {name:?}"))
                    })?,
                    None => ["label", "cluster"]
                        .iter()
                        .find_map(|n| table.column(n))
                        .ok_or_else(|| {
                            Error::config("no labels: pass --labels or --label-column")
                        })?,
                };
                let labels = table.rows.iter().map(|r| r[col].clone()).collect();
                (table.to_dataset(Some(col))?, labels)
            }
        }
    };
    if labels.len() != dataset.n() {
        return Err(Error::invalid(format!(
            "{} labels for {} data rows",
            labels.len(),
            dataset.n()
        )));
    }
    let partition = Partition::from_labels(&dataset, &label_ids(&labels))?;
    Ok((db_index(&dataset, &partition, params)?, params))
}

pub fn cmd_eval_db(args: &EvalDbArgs) -> Result<()> {
    let (db, params) = eval_db(args)?;
    println!("db={db} q_order={} t_order={}", params.q_order, params.t_order);
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let opts = BenchOptions {
        config: args.engine.config()?,
        mode: args.features.features.into(),
        spatial_weight: args.features.spatial_weight,
        db_params: args.engine.db_params()?,
        repeats: args.repeats,
        kmeans_k: args.baseline.as_ref().and(args.k),
        record_timing: args.record_timing,
    };
    if opts.kmeans_k.is_some_and(|k| k < 2) {
        return Err(Error::config("--k must be at least 2"));
    }
    let report = run_bench(&args.dir, &opts)?;
    write(&args.report, report.to_csv())?;
    if report.failures > 0 {
        eprintln!("warning: {} image(s) failed; see {}", report.failures, args.report.display());
    }
    println!("{}", report.summary_line());
    Ok(())
}
