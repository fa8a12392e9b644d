//! Command-line front end: `reduce`, `trust`, `grid-search` and `gen-data`.
//!
//! Exit codes: 0 success, 1 input or parameter error, 2 numerical divergence.

mod grid;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    generate_blobs, load_csv, load_idx, render_scatter_svg, write_dataset_csv, write_embedding_csv,
    write_json, write_report_json, BlobParams, LabelColumn, LabeledDataset,
};
use crate::embedding::{
    run_reduction, Alpha, Init, LearningRate, OptimizerConfig, ReductionResult, ResolvedConfig,
    Timings, Variant,
};
use crate::kernels::{KernelApprox, KernelSpec};
use crate::metrics::{trustworthiness_curve, TrustworthinessReport};
use crate::{Error, Result};

pub use grid::{run_grid, CellOverride, CellStatus, GridCell, GridReport, GridRow, GridSpec};

#[derive(Debug, Parser)]
#[command(name = "ktsne", version, about = "t-SNE, kernel t-SNE and end-to-end kernel t-SNE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one reduction and write embedding CSV, manifest JSON and scatter SVG.
    Reduce(ReduceArgs),
    /// Score an embedding against its data with trustworthiness.
    Trust(TrustArgs),
    /// Run every (gamma, perplexity) cell and rank cells by trustworthiness.
    GridSearch(GridArgs),
    /// Write the synthetic Gaussian-blob dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Plain,
    Kernel,
    E2e,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Plain => Variant::Plain,
            VariantArg::Kernel => Variant::KernelHighDim,
            VariantArg::E2e => Variant::EndToEndKernel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Pca,
    Kpca,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Synthetic,
}

/// Where the data comes from.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with one row per point.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["dataset", "idx_images"])]
    pub input: Option<PathBuf>,
    /// IDX image file (e.g. MNIST); pixels are scaled to [0, 1].
    #[arg(long, value_name = "PATH", conflicts_with = "dataset")]
    pub idx_images: Option<PathBuf>,
    /// IDX label file matching --idx-images.
    #[arg(long, value_name = "PATH", requires = "idx_images")]
    pub idx_labels: Option<PathBuf>,
    /// Built-in dataset (10 Gaussian blobs, 2000 points in 100 dimensions).
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetArg>,
    /// Label column of --input: a header name or zero-based index. A column
    /// named "label" is used automatically.
    #[arg(long, value_name = "COLUMN")]
    pub label_column: Option<String>,
    /// Standardize every feature to zero mean and unit variance.
    #[arg(long)]
    pub standardize: bool,
    /// Use a seeded random subset of this many rows.
    #[arg(long, value_name = "N")]
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, value_enum, default_value = "plain")]
    pub variant: VariantArg,
    /// Kernel for the kernel variants (default rbf).
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// RBF gamma; defaults to 1 / (d · Var[X]).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "pca")]
    pub init: InitArg,
    /// Finite-difference kernel gradients in the embedding space.
    #[arg(long)]
    pub fd_grad: bool,
    /// Learning rate: "auto" or a positive number.
    #[arg(long, default_value = "auto")]
    pub learning_rate: String,
    #[arg(long, default_value_t = 0.5)]
    pub momentum: f64,
    /// Student-t degrees of freedom for e2e: "auto" or a number ≥ 1.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    #[arg(long, default_value_t = 12.0)]
    pub early_exaggeration: f64,
    #[arg(long, default_value_t = 250)]
    pub exaggeration_iters: usize,
    /// Approximate the data-space Gram matrix with this many Nyström landmarks.
    #[arg(long, value_name = "M", conflicts_with = "rff")]
    pub nystrom: Option<usize>,
    /// Approximate the data-space Gram matrix with this many random Fourier features.
    #[arg(long, value_name = "R")]
    pub rff: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrustArgs {
    /// Data CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Embedding CSV (as written by `reduce`).
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,
    /// Label column of the data CSV; "label" is detected automatically.
    #[arg(long, value_name = "COLUMN")]
    pub label_column: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500")]
    pub k_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Rows per repeat (default: all rows).
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "trustworthiness.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "e2e")]
    pub variant: VariantArg,
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-2,1e-1,1,1e1,1e2,1e3")]
    pub gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    pub perplexities: Vec<f64>,
    /// Neighborhood size of the trustworthiness objective.
    #[arg(long, default_value_t = 100)]
    pub metric_k: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "pca")]
    pub init: InitArg,
    #[arg(long, default_value = "auto")]
    pub learning_rate: String,
    /// Per-cell learning rate, as GAMMA:PERPLEXITY:RATE (repeatable).
    #[arg(long, value_name = "G:P:LR")]
    pub cell_learning_rate: Vec<String>,
    /// Cells run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "grid")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "blobs.csv")]
    pub out: PathBuf,
}

/// Describes the dataset a run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub source: String,
    pub n: usize,
    pub d: usize,
    pub labeled: bool,
    pub standardized: bool,
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub embedding: PathBuf,
    pub manifest: PathBuf,
    pub scatter: Option<PathBuf>,
}

/// Everything needed to reproduce and audit a `reduce` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ResolvedConfig,
    pub dataset: DatasetDescriptor,
    pub outputs: OutputPaths,
    pub timing: Timings,
    pub final_kl: f64,
    pub kl_trace: Vec<crate::embedding::KlSample>,
}

fn parse_auto(s: &str, what: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parameter(format!("{what} must be 'auto' or a number, got '{s}'")))
}

fn parse_learning_rate(s: &str) -> Result<LearningRate> {
    Ok(parse_auto(s, "learning rate")?.map_or(LearningRate::Auto, LearningRate::Fixed))
}

/// Label column for a CSV: explicit choice, else a header column named "label".
fn label_column_for(path: &Path, explicit: Option<&str>) -> Result<Option<LabelColumn>> {
    if let Some(c) = explicit {
        return Ok(Some(LabelColumn::parse(c)));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    Ok(first
        .split(',')
        .any(|c| c.trim() == "label")
        .then(|| LabelColumn::Name("label".into())))
}

/// Loads the dataset selected by `args`, applying standardization and subsampling.
pub fn load_data(args: &DataArgs, seed: u64) -> Result<(LabeledDataset, DatasetDescriptor)> {
    let (mut data, source) = match (&args.input, &args.idx_images, args.dataset) {
        (Some(path), _, _) => {
            let label = label_column_for(path, args.label_column.as_deref())?;
            (load_csv(path, label.as_ref())?, path.display().to_string())
        }
        (None, Some(images), _) => (
            load_idx(images, args.idx_labels.as_deref())?,
            images.display().to_string(),
        ),
        (None, None, Some(DatasetArg::Synthetic)) => (
            generate_blobs(&BlobParams { seed, ..Default::default() })?,
            "synthetic".to_string(),
        ),
        (None, None, None) => {
            return Err(Error::Parameter(
                "no data given: use --input, --idx-images or --dataset synthetic".into(),
            ))
        }
    };
    if args.standardize {
        data.standardize();
    }
    if let Some(n) = args.subsample {
        data = data.subsample(n, seed)?;
    }
    let descriptor = DatasetDescriptor {
        name: data.name.clone(),
        source,
        n: data.n(),
        d: data.dim(),
        labeled: data.labels.is_some(),
        standardized: args.standardize,
        subsample: args.subsample,
    };
    Ok((data, descriptor))
}

/// `1 / (d · Var[X])` over all entries, the usual data-scaled RBF default.
pub fn default_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let var = x.var(0.0);
    let d = x.ncols() as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0
    }
}

/// Kernel choice with the notices the command line promises.
fn resolve_kernel(variant: Variant, kernel: Option<KernelArg>, gamma: Option<f64>, x: ArrayView2<'_, f64>) -> Result<KernelSpec> {
    let kernel = match (kernel, variant) {
        (Some(k), _) => k,
        (None, Variant::Plain) => KernelArg::Rbf,
        (None, _) => {
            eprintln!("note: --kernel not given for variant {}, using rbf", variant.name());
            KernelArg::Rbf
        }
    };
    match kernel {
        KernelArg::Linear => {
            if gamma.is_some() {
                eprintln!("warning: --gamma is ignored with the linear kernel");
            }
            Ok(KernelSpec::Linear)
        }
        KernelArg::Rbf => KernelSpec::rbf(gamma.unwrap_or_else(|| default_gamma(x))),
    }
}

fn init_of(arg: InitArg) -> Init {
    match arg {
        InitArg::Pca => Init::Pca,
        InitArg::Kpca => Init::KernelPca,
        InitArg::Random => Init::Random,
    }
}

/// Builds the optimizer configuration for `reduce`.
pub fn optimizer_config(args: &OptimArgs, seed: u64, x: ArrayView2<'_, f64>) -> Result<OptimizerConfig> {
    let variant = Variant::from(args.variant);
    let kernel_approx = match (args.nystrom, args.rff) {
        (Some(m), _) => KernelApprox::Nystrom { landmarks: m, seed },
        (None, Some(r)) => KernelApprox::Rff { features: r, seed },
        (None, None) => KernelApprox::Exact,
    };
    let config = OptimizerConfig {
        variant,
        target_dim: args.dim,
        perplexity: args.perplexity,
        kernel: resolve_kernel(variant, args.kernel, args.gamma, x)?,
        kernel_approx,
        n_iter: args.iters,
        early_exaggeration_factor: args.early_exaggeration,
        early_exaggeration_iters: args.exaggeration_iters.min(args.iters),
        learning_rate: parse_learning_rate(&args.learning_rate)?,
        momentum: args.momentum,
        momentum_switch: None,
        init: init_of(args.init),
        alpha: parse_auto(&args.alpha, "alpha")?.map_or(Alpha::Auto, Alpha::Fixed),
        seed,
        fd_gradient: args.fd_grad,
    };
    config.validate()?;
    Ok(config)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes embedding CSV and, for 2-D embeddings, the scatter SVG.
fn write_embedding_outputs(
    result: &ReductionResult,
    labels: Option<&[i64]>,
    csv: PathBuf,
    svg: PathBuf,
) -> Result<(PathBuf, Option<PathBuf>)> {
    write_embedding_csv(result.embedding.view(), labels, &csv)?;
    if result.embedding.ncols() != 2 {
        return Ok((csv, None));
    }
    render_scatter_svg(result.embedding.view(), labels, &svg)?;
    Ok((csv, Some(svg)))
}

/// `reduce`: load, run, write outputs.
pub fn cmd_reduce(args: &ReduceArgs) -> Result<RunManifest> {
    let started = Instant::now();
    let (data, dataset) = load_data(&args.data, args.seed)?;
    let config = optimizer_config(&args.optim, args.seed, data.x.view())?;
    let result = run_reduction(data.x.view(), &config)?;

    ensure_dir(&args.out_dir)?;
    let (embedding, scatter) = write_embedding_outputs(
        &result,
        data.labels.as_deref(),
        args.out_dir.join("embedding.csv"),
        args.out_dir.join("scatter.svg"),
    )?;
    let manifest_path = args.out_dir.join("manifest.json");
    let mut timing = result.timings;
    timing.total_secs = started.elapsed().as_secs_f64();
    let manifest = RunManifest {
        config: result.config.clone(),
        dataset,
        outputs: OutputPaths { embedding, manifest: manifest_path.clone(), scatter },
        timing,
        final_kl: result.final_kl(),
        kl_trace: result.kl_trace.clone(),
    };
    write_json(&manifest, &manifest_path)?;

    println!(
        "{} t-SNE on {} ({}×{}): final KL {:.6}, wall time {:.2}s",
        manifest.config.variant.name(),
        manifest.dataset.name,
        manifest.dataset.n,
        manifest.dataset.d,
        manifest.final_kl,
        manifest.timing.total_secs
    );
    println!(
        "learning rate {} ({}), alpha {}",
        manifest.config.learning_rate,
        if manifest.config.learning_rate_auto { "auto" } else { "fixed" },
        manifest.config.alpha
    );
    println!("wrote {}", manifest.outputs.embedding.display());
    println!("wrote {}", manifest_path.display());
    if let Some(s) = &manifest.outputs.scatter {
        println!("wrote {}", s.display());
    }
    Ok(manifest)
}

/// `trust`: trustworthiness curve of an embedding CSV against a data CSV.
pub fn cmd_trust(args: &TrustArgs) -> Result<TrustworthinessReport> {
    let data_label = label_column_for(&args.data, args.label_column.as_deref())?;
    let data = load_csv(&args.data, data_label.as_ref())?;
    let emb_label = label_column_for(&args.embedding, None)?;
    let embedding = load_csv(&args.embedding, emb_label.as_ref())?;
    if data.n() != embedding.n() {
        return Err(Error::Input(format!(
            "{} has {} rows but {} has {}",
            args.data.display(),
            data.n(),
            args.embedding.display(),
            embedding.n()
        )));
    }
    let subsample = args.subsample.unwrap_or(data.n());
    let mut report = trustworthiness_curve(
        data.x.view(),
        embedding.x.view(),
        &args.k_list,
        args.repeats,
        subsample,
        args.seed,
    )?;
    report.name = embedding.name.clone();
    write_report_json(&report, &args.out)?;

    println!("trustworthiness of {} (n = {}, repeats = {})", report.name, report.n, report.repeats);
    println!("{:>8}  {:>10}", "k", "T(k)");
    for (k, s) in report.k_values.iter().zip(&report.scores) {
        println!("{k:>8}  {s:>10.6}");
    }
    println!("wrote {}", args.out.display());
    Ok(report)
}

/// `gen-data`: synthetic Gaussian blobs as CSV.
pub fn cmd_gen_data(args: &GenDataArgs) -> Result<LabeledDataset> {
    let data = generate_blobs(&BlobParams {
        n: args.n,
        d: args.d,
        clusters: args.clusters,
        spread: args.spread,
        seed: args.seed,
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_dataset_csv(&data, &args.out)?;
    println!("wrote {} ({} rows, {} features + label)", args.out.display(), data.n(), data.dim());
    Ok(data)
}

fn parse_cell_override(s: &str) -> Result<CellOverride> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parameter(format!("bad --cell-learning-rate '{s}', expected G:P:LR")))
    };
    if parts.len() != 3 {
        return Err(Error::Parameter(format!("bad --cell-learning-rate '{s}', expected G:P:LR")));
    }
    Ok(CellOverride {
        gamma: num(parts[0])?,
        perplexity: num(parts[1])?,
        learning_rate: num(parts[2])?,
    })
}

/// `grid-search`: every (gamma, perplexity) cell, ranked by trustworthiness.
pub fn cmd_grid_search(args: &GridArgs) -> Result<GridReport> {
    let (data, dataset) = load_data(&args.data, args.seed)?;
    let variant = Variant::from(args.variant);
    let base = OptimizerConfig {
        variant,
        target_dim: args.dim,
        n_iter: args.iters,
        early_exaggeration_iters: 250.min(args.iters),
        learning_rate: parse_learning_rate(&args.learning_rate)?,
        init: init_of(args.init),
        seed: args.seed,
        ..Default::default()
    };
    let spec = GridSpec {
        gammas: args.gammas.clone(),
        perplexities: args.perplexities.clone(),
        metric_k: args.metric_k,
        jobs: args.jobs,
        overrides: args
            .cell_learning_rate
            .iter()
            .map(|s| parse_cell_override(s))
            .collect::<Result<_>>()?,
    };
    let report = run_grid(&data, &dataset, &spec, &base)?;

    ensure_dir(&args.out_dir)?;
    report.write_csv(args.out_dir.join("grid_results.csv"))?;
    write_json(&report, args.out_dir.join("grid_results.json"))?;
    if let Some(best) = &report.best_result {
        write_embedding_outputs(
            best,
            data.labels.as_deref(),
            args.out_dir.join("best_embedding.csv"),
            args.out_dir.join("best_scatter.svg"),
        )?;
    }

    println!("{:>5}  {:>10}  {:>10}  {:>8}  {:>10}  {:>9}", "rank", "gamma", "perplexity", "status", "T(k)", "final KL");
    for row in &report.rows {
        let gamma = row.cell.gamma.map_or("-".to_string(), |g| format!("{g:e}"));
        match &row.status {
            CellStatus::Ok { trustworthiness, final_kl, .. } => println!(
                "{:>5}  {:>10}  {:>10}  {:>8}  {:>10.6}  {:>9.4}",
                row.rank, gamma, row.cell.perplexity, "ok", trustworthiness, final_kl
            ),
            CellStatus::Failed { error, .. } => println!(
                "{:>5}  {:>10}  {:>10}  {:>8}  {error}",
                row.rank, gamma, row.cell.perplexity, "failed"
            ),
        }
    }
    println!("wrote {}", args.out_dir.join("grid_results.csv").display());
    if report.best_result.is_none() {
        return Err(report
            .first_error
            .clone()
            .map_or_else(|| Error::Input("grid is empty".into()), |(code, msg)| {
                if code == 2 {
                    Error::Divergence { iteration: 0, reason: msg }
                } else {
                    Error::Input(msg)
                }
            }));
    }
    Ok(report)
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Reduce(a) => cmd_reduce(a).map(|_| ()),
        Command::Trust(a) => cmd_trust(a).map(|_| ()),
        Command::GridSearch(a) => cmd_grid_search(a).map(|_| ()),
        Command::GenData(a) => cmd_gen_data(a).map(|_| ()),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs; usage errors exit with 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
