use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use mpgk::graph::Targets;
use mpgk::params::{HierarchyConfig, KernelParams, LandmarkSpec};
use mpgk::vertex::VertexKernelState;
use mpgk::{variant, Error as MpgkError, GraphDataset};

/// Errors mapped to exit codes: usage/config problems exit 2, computation
/// failures exit 1.
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<MpgkError> for CliError {
    fn from(e: MpgkError) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "mpgk", version, about = "Message passing graph kernels")]
pub struct Cli {
    /// Cap on worker threads for data-parallel phases (default: all cores,
    /// or the MPGK_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress per-phase timing lines on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute graph-level Gram matrices, one CSV per iteration.
    Gram(GramArgs),
    /// Embed vertices in low-dimensional space via kernel PCA.
    Embed(EmbedArgs),
    /// Run SVM cross-validation over the per-iteration kernels.
    Classify(ClassifyArgs),
    /// Export per-graph Nystrom feature vectors, concatenated over iterations.
    Features(FeaturesArgs),
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Dataset name (TU format): files live in <data-dir>/<name>/.
    #[arg(long)]
    dataset: String,

    /// Directory holding dataset subdirectories.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,

    /// Standardize each attribute dimension to zero mean and unit variance.
    #[arg(long)]
    standardize_attributes: bool,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Kernel variant: RR, RA, AR or AA.
    #[arg(long, default_value = "RR")]
    variant: String,

    #[arg(long, default_value_t = 0.8)]
    alpha: f64,

    #[arg(long, default_value_t = 0.2)]
    beta: f64,

    /// Number of message passing iterations T.
    #[arg(long = "T", alias = "iterations", default_value_t = 4)]
    iterations: usize,

    /// Force the exact dense vertex kernel.
    #[arg(long, conflicts_with = "landmarks")]
    exact: bool,

    /// Nystrom landmark count for the vertex kernel.
    #[arg(long)]
    landmarks: Option<usize>,

    /// Without --exact/--landmarks: exact mode up to this many total
    /// vertices, Nystrom with 200 landmarks beyond it.
    #[arg(long, default_value_t = 4000)]
    exact_threshold: usize,

    /// Base kernel: auto, delta, linear, delta_plus_linear or degree.
    #[arg(long, default_value = "auto")]
    base_kernel: String,

    /// Cosine-normalize the emitted Gram matrices.
    #[arg(long)]
    normalize: bool,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Hierarchy depth for assignment variants.
    #[arg(long, default_value_t = 4)]
    depth: usize,

    /// Hierarchy branching factor for assignment variants.
    #[arg(long, default_value_t = 4)]
    branching: usize,

    #[arg(long, default_value_t = 50)]
    kmeans_max_iter: usize,
}

impl KernelArgs {
    fn params(&self, ds: &GraphDataset) -> CliResult<KernelParams> {
        let base_kernel = if self.base_kernel.eq_ignore_ascii_case("auto") {
            mpgk::base::auto_for(ds).name().to_string()
        } else {
            mpgk::base::by_name(&self.base_kernel).map_err(usage)?.name().to_string()
        };
        let n = ds.total_vertices();
        let landmarks = if self.exact {
            LandmarkSpec::Exact
        } else if let Some(m) = self.landmarks {
            LandmarkSpec::Count(m)
        } else if n <= self.exact_threshold {
            LandmarkSpec::Exact
        } else {
            LandmarkSpec::Count(200.min(n))
        };
        let params = KernelParams {
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            variant: self.variant.clone(),
            base_kernel,
            landmarks,
            hierarchy: HierarchyConfig {
                depth: self.depth,
                branching: self.branching,
                kmeans_max_iter: self.kmeans_max_iter,
            },
            seed: self.seed,
            normalize: self.normalize,
        };
        params.validate(Some(ds)).map_err(usage)?;
        variant::lookup(&params.variant).map_err(usage)?;
        mpgk::base::by_name(&params.base_kernel)
            .map_err(usage)?
            .check(ds)
            .map_err(usage)?;
        Ok(params)
    }
}

#[derive(Args)]
struct GramArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    #[command(flatten)]
    kernel: KernelArgs,

    /// Emit only the Gram for this iteration (default: all of 1..=T).
    #[arg(long)]
    only_t: Option<usize>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Dataset name (TU format); mutually exclusive with --barbell.
    #[arg(long, conflicts_with = "barbell")]
    dataset: Option<String>,

    #[arg(long, default_value = "data")]
    data_dir: PathBuf,

    #[arg(long)]
    standardize_attributes: bool,

    /// Generate a barbell graph B(h, k) instead of loading a dataset.
    #[arg(long, num_args = 2, value_names = ["H", "K"])]
    barbell: Option<Vec<usize>>,

    #[command(flatten)]
    kernel: KernelArgs,

    /// Embedding dimensionality.
    #[arg(long, default_value_t = 2)]
    dims: usize,

    /// Skip double-centering before the spectral projection.
    #[arg(long)]
    no_center: bool,

    /// Output CSV path.
    #[arg(long, default_value = "out/embedding.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    #[command(flatten)]
    kernel: KernelArgs,

    #[arg(long, default_value_t = 10)]
    folds: usize,

    #[arg(long, default_value_t = 10)]
    repeats: usize,

    /// Comma-separated SVM cost grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3])]
    c_grid: Vec<f64>,

    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    dataset: DatasetArgs,

    #[command(flatten)]
    kernel: KernelArgs,

    /// Nystrom landmark count at the graph level.
    #[arg(long, default_value_t = 200)]
    graph_landmarks: usize,

    #[arg(long, default_value = "out")]
    out: PathBuf,
}

struct Phases {
    quiet: bool,
}

impl Phases {
    fn run<T>(&self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if !self.quiet {
            eprintln!("[time] {name}: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = cli
        .threads
        .or_else(|| std::env::var("MPGK_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let phases = Phases { quiet: cli.quiet };
    match cli.command {
        Command::Gram(args) => cmd_gram(args, &phases),
        Command::Embed(args) => cmd_embed(args, &phases),
        Command::Classify(args) => cmd_classify(args, &phases),
        Command::Features(args) => cmd_features(args, &phases),
    }
}

fn load_dataset(args: &DatasetArgs) -> CliResult<GraphDataset> {
    let dir = args.data_dir.join(&args.dataset);
    let dir = if dir.is_dir() { dir } else { args.data_dir.clone() };
    let ds = mpgk::io::load_tu_dataset(&dir, &args.dataset).map_err(usage)?;
    Ok(if args.standardize_attributes { ds.standardize_attributes() } else { ds })
}

/// Runs the message passing loop with per-phase timing, mirroring
/// `run_message_passing` exactly (same seeds, same order of operations).
fn compute_states(ds: &GraphDataset, params: &KernelParams, phases: &Phases) -> CliResult<Vec<VertexKernelState>> {
    let var = variant::lookup(&params.variant).map_err(usage)?;
    let mut states = Vec::with_capacity(params.iterations + 1);
    let init = phases.run("init", || mpgk::init_state(ds, params))?;
    states.push(init);
    for t in 1..=params.iterations {
        let prev = states.last().unwrap();
        let next = if var.neighborhood.code() == 'A' {
            let seed = mpgk::vertex::neighborhood_hierarchy_seed(params.seed, prev.iteration());
            let tree = phases.run(&format!("hierarchy build (t = {t})"), || {
                mpgk::build_hierarchy(prev, &params.hierarchy, seed)
            })?;
            phases.run(&format!("update (t = {t})"), || {
                mpgk::assign_update(prev, ds, params.alpha, params.beta, &tree)
            })?
        } else {
            phases.run(&format!("update (t = {t})"), || {
                mpgk::rr_update(prev, ds, params.alpha, params.beta)
            })?
        };
        states.push(next);
    }
    states.remove(0);
    Ok(states)
}

fn graph_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("g{i}")).collect()
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).context("creating output directory")?;
        }
    }
    Ok(())
}

fn cmd_gram(args: GramArgs, phases: &Phases) -> CliResult<()> {
    let ds = load_dataset(&args.dataset)?;
    let params = args.kernel.params(&ds)?;
    if let Some(t) = args.only_t {
        if t < 1 || t > params.iterations {
            return Err(CliError::Usage(format!("--only-t {t} outside 1..={}", params.iterations)));
        }
    }
    let var = variant::lookup(&params.variant).map_err(usage)?;
    let states = compute_states(&ds, &params, phases)?;
    std::fs::create_dir_all(&args.out).context("creating output directory")?;
    let ids = graph_ids(ds.n_graphs());
    for state in &states {
        let t = state.iteration();
        if args.only_t.is_some_and(|only| only != t) {
            continue;
        }
        let mut gram = phases.run(&format!("gram (t = {t})"), || var.graph.gram(state, &ds, &params))?;
        if params.normalize {
            gram = mpgk::normalize(&gram)?;
        }
        let path = args.out.join(format!("mpgk_{}_t{t}.csv", params.variant.to_lowercase()));
        mpgk::io::write_gram(gram.values(), &ids, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_embed(args: EmbedArgs, phases: &Phases) -> CliResult<()> {
    if args.dims < 1 {
        return Err(CliError::Usage("--dims must be >= 1".into()));
    }
    let ds = match (&args.barbell, &args.dataset) {
        (Some(hk), None) => {
            let graph = mpgk::make_barbell(hk[0], hk[1]).map_err(usage)?;
            GraphDataset::new(vec![graph], Targets::None).map_err(usage)?
        }
        (None, Some(name)) => load_dataset(&DatasetArgs {
            dataset: name.clone(),
            data_dir: args.data_dir.clone(),
            standardize_attributes: args.standardize_attributes,
        })?,
        _ => return Err(CliError::Usage("embed needs either --dataset or --barbell H K".into())),
    };
    // The embedding protocol defaults to the degree initializer and five
    // iterations unless overridden.
    let mut kernel = args.kernel.clone();
    if kernel.base_kernel.eq_ignore_ascii_case("auto") && !ds.has_labels() && !ds.has_attributes() {
        kernel.base_kernel = "degree".into();
    }
    let params = kernel.params(&ds)?;
    if let LandmarkSpec::Count(m) = params.landmarks {
        if args.dims > m {
            return Err(CliError::Usage(format!(
                "--dims {} exceeds the {m} Nystrom landmarks",
                args.dims
            )));
        }
    }
    if args.dims > ds.total_vertices() {
        return Err(CliError::Usage(format!(
            "--dims {} exceeds the {} dataset vertices",
            args.dims,
            ds.total_vertices()
        )));
    }
    let states = compute_states(&ds, &params, phases)?;
    let final_state = states.last().expect("iterations >= 1");
    let kernel_matrix = phases.run("vertex kernel materialization", || final_state.dense());
    let coords = phases.run("kernel PCA", || {
        mpgk::kernel_pca_with(&kernel_matrix.view(), args.dims, !args.no_center)
    })?;
    ensure_parent(&args.out)?;
    mpgk::io::write_embedding(&coords, &ds, &args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_classify(args: ClassifyArgs, phases: &Phases) -> CliResult<()> {
    let ds = load_dataset(&args.dataset)?;
    let labels = match ds.targets() {
        Targets::Classes { labels, .. } => labels.clone(),
        Targets::Regression(_) => {
            return Err(CliError::Usage("classify needs class labels, got regression targets".into()))
        }
        Targets::None => return Err(CliError::Usage("classify needs a dataset with graph labels".into())),
    };
    let n_classes = ds.targets().n_classes().unwrap_or(0);
    if n_classes < 2 {
        return Err(CliError::Usage("need >= 2 classes".into()));
    }
    let params = args.kernel.params(&ds)?;
    let cfg = mpgk::CvConfig {
        folds: args.folds,
        repeats: args.repeats,
        c_grid: args.c_grid.clone(),
        seed: params.seed,
    };
    // Surface stratification problems before the kernel computation.
    let mut counts = vec![0usize; n_classes];
    for &l in &labels {
        counts[l] += 1;
    }
    if args.folds < 2 || args.folds > *counts.iter().min().unwrap() {
        return Err(CliError::Usage(format!(
            "stratification error: {} folds but the smallest class has {} graphs",
            args.folds,
            counts.iter().min().unwrap()
        )));
    }

    let var = variant::lookup(&params.variant).map_err(usage)?;
    let states = compute_states(&ds, &params, phases)?;
    let mut grams = Vec::with_capacity(states.len());
    for state in &states {
        let t = state.iteration();
        let mut gram = phases.run(&format!("gram (t = {t})"), || var.graph.gram(state, &ds, &params))?;
        gram.variant = params.variant.clone();
        if params.normalize {
            gram = mpgk::normalize(&gram)?;
        }
        grams.push(gram);
    }
    drop(states);
    let report = phases.run("cross-validation", || mpgk::cross_validate(&grams, &labels, &cfg))?;
    std::fs::create_dir_all(&args.out).context("creating output directory")?;
    let path = args.out.join(format!("cv_{}.csv", params.variant.to_lowercase()));
    std::fs::write(&path, report.to_csv()).context("writing the CV report")?;
    println!(
        "mean_accuracy={} std={} report={}",
        report.mean_accuracy,
        report.std_accuracy,
        path.display()
    );
    Ok(())
}

fn cmd_features(args: FeaturesArgs, phases: &Phases) -> CliResult<()> {
    let ds = load_dataset(&args.dataset)?;
    let params = args.kernel.params(&ds)?;
    if args.graph_landmarks < 1 || args.graph_landmarks > ds.n_graphs() {
        return Err(CliError::Usage(format!(
            "--graph-landmarks {} outside 1..={}",
            args.graph_landmarks,
            ds.n_graphs()
        )));
    }
    let states = compute_states(&ds, &params, phases)?;
    let per_t = phases.run("graph features", || {
        mpgk::graph_nystrom_features(&ds, &states, args.graph_landmarks, params.seed, &params)
    })?;
    let n = ds.n_graphs();
    let total_cols: usize = per_t.iter().map(|f| f.ncols()).sum();
    let mut concat = Array2::zeros((n, total_cols));
    let mut col = 0;
    for block in &per_t {
        concat
            .slice_mut(ndarray::s![.., col..col + block.ncols()])
            .assign(block);
        col += block.ncols();
    }
    std::fs::create_dir_all(&args.out).context("creating output directory")?;
    let path = args.out.join(format!("features_{}.csv", params.variant.to_lowercase()));
    mpgk::io::write_features(&concat, &graph_ids(n), ds.targets(), &path)?;
    println!("{}", path.display());
    Ok(())
}
