//! Command-line driver: datasets in, embeddings, Gram matrices, and
//! cross-validated accuracy reports out.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rwk_core::classify::{nested_cv, ParamGrid};
use rwk_core::config::RunConfig;
use rwk_core::graph::{load_dataset, Dataset};
use rwk_core::kernel::{
    export_gram_csv, gram_matrix, load_gram, save_gram, validate_gram, GramStats,
};
use rwk_core::pipeline::{
    load_artifacts, pair_context, prepare_features, save_artifacts, GraphArtifacts,
};
use rwk_core::solver::scg_solve;
use rwk_core::RwkError;

#[derive(Parser)]
#[command(name = "rwk", version, about = "Transport-based graph kernel pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Configuration file; built-in defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory override
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per logical core)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Cross-validation seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skip staleness checks on stored artifacts
    #[arg(long, global = true)]
    force: bool,
    /// Write per-pair trace CSVs next to the main artifacts
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every graph pair and write the kernel matrix
    Gram,
    /// Score a stored kernel matrix with nested cross-validation
    Classify {
        /// Kernel file (defaults to the path `gram` writes)
        #[arg(long)]
        gram: Option<PathBuf>,
    },
    /// Solve one graph pair and print the objective breakdown
    Pair {
        /// First graph index (zero-based)
        a: usize,
        /// Second graph index (zero-based)
        b: usize,
    },
    /// Build and cache per-graph embeddings without solving pairs
    Embed,
}

/// Failure carrying its process exit code: 2 for usage and missing inputs,
/// 1 for everything else.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { message: message.into(), code: 2 }
    }
}

impl From<RwkError> for Failure {
    fn from(e: RwkError) -> Self {
        let code = match &e {
            RwkError::Ingestion { .. } => 2,
            _ => 1,
        };
        Failure { message: e.to_string(), code }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = effective_config(&cli.global)?;
    let out_dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    if cfg.output.workers > 0 {
        // a second build_global in the same process is harmless for a
        // one-shot binary; ignore the error it returns
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.output.workers)
            .build_global();
    }
    match cli.command {
        Command::Gram => cmd_gram(&cfg, &out_dir, cli.global.trace),
        Command::Classify { gram } => cmd_classify(&cfg, &out_dir, gram, cli.global.force),
        Command::Pair { a, b } => cmd_pair(&cfg, &out_dir, a, b, cli.global.trace),
        Command::Embed => cmd_embed(&cfg, &out_dir),
    }
}

fn effective_config(global: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            if !path.exists() {
                return Err(Failure::usage(format!(
                    "config file {} does not exist",
                    path.display()
                )));
            }
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &global.out {
        cfg.output.directory = out.display().to_string();
    }
    if let Some(workers) = global.workers {
        cfg.output.workers = workers;
    }
    if let Some(seed) = global.seed {
        cfg.classify.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cache_dir(out_dir: &Path) -> PathBuf {
    match std::env::var_os("RWK_CACHE_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => out_dir.join("cache"),
    }
}

fn gram_path(cfg: &RunConfig, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}-{}.gram", cfg.dataset.name, cfg.config_hash()))
}

/// Writes through a temp file in the same directory so failures never leave
/// a partial artifact at the final path.
fn atomic_write<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&Path) -> rwk_core::Result<()>,
{
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| {
        Failure::from(RwkError::Io(e))
    })?;
    Ok(())
}

fn load_data(cfg: &RunConfig) -> CliResult<Dataset> {
    let path = PathBuf::from(&cfg.dataset.path);
    if !path.exists() {
        return Err(Failure::usage(format!(
            "dataset directory {} does not exist",
            path.display()
        )));
    }
    Ok(load_dataset(&path, &cfg.dataset.name)?)
}

/// Loads cached embeddings when their hash matches, otherwise rebuilds and
/// refreshes the cache.
fn obtain_artifacts(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset: &Dataset,
) -> CliResult<Vec<GraphArtifacts>> {
    let cache = cache_dir(out_dir);
    let cache_file = cache.join(format!("{}-{}.emb", cfg.dataset.name, cfg.embed_hash()));
    if cache_file.exists() {
        if let Some(artifacts) = load_artifacts(&cache_file, &cfg.embed_hash())? {
            if artifacts.len() == dataset.graphs.len() {
                println!("embeddings: reused cache {}", cache_file.display());
                return Ok(artifacts);
            }
        }
    }
    let start = Instant::now();
    let opts = cfg.artifact_options();
    let features = prepare_features(dataset, &opts)?;
    let mut artifacts = Vec::with_capacity(dataset.graphs.len());
    for (graph, x) in dataset.graphs.iter().zip(features.iter()) {
        artifacts.push(GraphArtifacts::build(graph, x, &opts)?);
    }
    fs::create_dir_all(&cache).map_err(RwkError::Io).map_err(Failure::from)?;
    atomic_write(&cache_file, |tmp| save_artifacts(tmp, &cfg.embed_hash(), &artifacts))?;
    println!(
        "embeddings: built {} graphs in {:.1} s, cached at {}",
        artifacts.len(),
        start.elapsed().as_secs_f64(),
        cache_file.display()
    );
    Ok(artifacts)
}

fn echo_config(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let path = out_dir.join("config.txt");
    let text = cfg.render();
    atomic_write(&path, |tmp| {
        fs::write(tmp, &text).map_err(RwkError::Io)
    })
}

fn write_timings(cfg: &RunConfig, out_dir: &Path, stats: &GramStats, wall_s: f64) -> CliResult<()> {
    let path = out_dir.join(format!(
        "{}-{}.timings.txt",
        cfg.dataset.name,
        cfg.config_hash()
    ));
    let text = format!(
        "pairs = {}\nmean ms per pair = {:.3}\nmax ms per pair = {:.3}\n\
         wall seconds = {:.3}\nconverged pairs = {}\nmin discrepancy = {:.6e}\n",
        stats.pairs, stats.mean_ms, stats.max_ms, wall_s, stats.converged, stats.min_discrepancy
    );
    atomic_write(&path, |tmp| fs::write(tmp, &text).map_err(RwkError::Io))
}

fn cmd_gram(cfg: &RunConfig, out_dir: &Path, trace: bool) -> CliResult<()> {
    let dataset = load_data(cfg)?;
    let artifacts = obtain_artifacts(cfg, out_dir, &dataset)?;
    let pairs = artifacts.len() * (artifacts.len() + 1) / 2;
    println!(
        "gram: solving {} pairs over {} graphs ({})",
        pairs,
        artifacts.len(),
        cfg.dataset.name
    );
    let start = Instant::now();
    let (gram, stats) = gram_matrix(
        &artifacts,
        &cfg.solver,
        cfg.kernel.eta,
        &cfg.dataset.name,
        &cfg.config_hash(),
    )?;
    let wall = start.elapsed().as_secs_f64();
    validate_gram(&gram)?;

    let gram_file = gram_path(cfg, out_dir);
    atomic_write(&gram_file, |tmp| save_gram(tmp, &gram))?;
    let csv_file = gram_file.with_extension("csv");
    atomic_write(&csv_file, |tmp| export_gram_csv(tmp, &gram))?;
    echo_config(cfg, out_dir)?;
    write_timings(cfg, out_dir, &stats, wall)?;
    if trace {
        let trace_file = gram_file.with_extension("trace.csv");
        atomic_write(&trace_file, |tmp| {
            let mut w = std::io::BufWriter::new(fs::File::create(tmp)?);
            writeln!(w, "p,q,discrepancy,iterations,converged,final_gap")?;
            for r in &stats.records {
                writeln!(
                    w,
                    "{},{},{:.16e},{},{},{:.16e}",
                    r.p, r.q, r.discrepancy, r.iterations, r.converged, r.final_gap
                )?;
            }
            Ok(())
        })?;
        println!("gram: trace written to {}", trace_file.display());
    }
    println!(
        "gram: {} pairs in {:.1} s (mean {:.2} ms, max {:.2} ms per pair, {} converged)",
        stats.pairs, wall, stats.mean_ms, stats.max_ms, stats.converged
    );
    println!("gram: matrix written to {}", gram_file.display());
    Ok(())
}

fn cmd_classify(
    cfg: &RunConfig,
    out_dir: &Path,
    gram_flag: Option<PathBuf>,
    force: bool,
) -> CliResult<()> {
    let gram_file = gram_flag.unwrap_or_else(|| gram_path(cfg, out_dir));
    if !gram_file.exists() {
        return Err(Failure::usage(format!(
            "kernel file {} does not exist (run `rwk gram` first)",
            gram_file.display()
        )));
    }
    let gram = load_gram(&gram_file)?;
    if gram.dataset != cfg.dataset.name || gram.config_hash != cfg.config_hash() {
        if !force {
            return Err(Failure::from(RwkError::Config(format!(
                "kernel file {} was built for dataset {:?} with config hash {}, \
                 current config hashes to {} (pass --force to use it anyway)",
                gram_file.display(),
                gram.dataset,
                gram.config_hash,
                cfg.config_hash()
            ))));
        }
        println!("classify: --force accepted a kernel with a stale config hash");
    }
    let dataset = load_data(cfg)?;
    if dataset.labels.len() != gram.values.nrows() {
        return Err(Failure::from(RwkError::Dimension(format!(
            "kernel is {}x{} but the dataset has {} graphs",
            gram.values.nrows(),
            gram.values.ncols(),
            dataset.labels.len()
        ))));
    }
    let grid = ParamGrid {
        c_values: cfg.classify.c_grid.clone(),
        eta_scales: cfg
            .classify
            .eta_grid
            .iter()
            .map(|&eta| eta / cfg.kernel.eta)
            .collect(),
        repair_modes: cfg.classify.repair_grid.clone(),
    };
    let start = Instant::now();
    let report = nested_cv(
        &gram,
        &dataset.labels,
        dataset.class_count,
        &grid,
        cfg.classify.outer_folds,
        cfg.classify.inner_folds,
        cfg.classify.seed,
    )?;
    let wall = start.elapsed().as_secs_f64();

    let eval_file = gram_file.with_extension("eval.txt");
    let text = report.render();
    atomic_write(&eval_file, |tmp| fs::write(tmp, &text).map_err(RwkError::Io))?;
    echo_config(cfg, out_dir)?;
    print!("{text}");
    println!("classify: finished in {wall:.1} s, report at {}", eval_file.display());
    Ok(())
}

fn cmd_pair(
    cfg: &RunConfig,
    out_dir: &Path,
    a: usize,
    b: usize,
    trace: bool,
) -> CliResult<()> {
    let dataset = load_data(cfg)?;
    let count = dataset.graphs.len();
    if a >= count || b >= count {
        return Err(Failure::usage(format!(
            "pair indices {a}, {b} out of range for {count} graphs"
        )));
    }
    let artifacts = obtain_artifacts(cfg, out_dir, &dataset)?;
    let ctx = pair_context(&artifacts[a], &artifacts[b], &cfg.solver)?;
    let res = scg_solve(&ctx)?;
    let bd = &res.breakdown;
    let s = &cfg.solver;
    println!(
        "pair {a} {b} on {} ({} x {} vertices)",
        cfg.dataset.name,
        artifacts[a].vertex_count(),
        artifacts[b].vertex_count()
    );
    // the five term lines sum to the total
    println!("term feature = {:.12e}", bd.feature);
    println!("term neighbourhood = {:.12e}", s.beta1 * bd.neighbourhood);
    println!("term smoothness = {:.12e}", s.beta1 * bd.smoothness);
    println!("term structure = {:.12e}", s.beta2 * bd.structure);
    println!("term divergence = {:.12e}", -s.beta2 * s.lambda_g * bd.divergence);
    println!("total = {:.12e}", bd.total);
    println!("discrepancy = {:.12e}", res.rw_value);
    println!("iterations = {}", res.iterations);
    println!("converged = {}", res.converged);
    println!(
        "final gap = {:.6e}",
        res.gap_history.last().copied().unwrap_or(0.0)
    );
    println!("subproblem violation = {:.6e}", res.max_subproblem_violation);
    if trace {
        let path = out_dir.join(format!("pair-{a}-{b}.csv"));
        atomic_write(&path, |tmp| {
            let mut w = std::io::BufWriter::new(fs::File::create(tmp)?);
            let m = &res.coupling.matrix;
            for i in 0..m.nrows() {
                let row: Vec<String> =
                    (0..m.ncols()).map(|j| format!("{:.16e}", m[[i, j]])).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
        println!("coupling written to {}", path.display());
    }
    Ok(())
}

fn cmd_embed(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let dataset = load_data(cfg)?;
    let artifacts = obtain_artifacts(cfg, out_dir, &dataset)?;
    println!(
        "embed: {} graphs ready (feature width {}, structure width {})",
        artifacts.len(),
        artifacts.first().map_or(0, |a| a.features.ncols()),
        artifacts.first().map_or(0, |a| a.structure.matrix.ncols())
    );
    Ok(())
}
