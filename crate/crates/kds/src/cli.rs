//! The `kds` command line.
//!
//! Every command resolves its settings as defaults, then `--config FILE`,
//! then flags, and writes the result to `config.cfg` in its output directory.
//! Exit codes: 0 success, 1 numerical failure, 2 usage or IO error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use kds_core::datagen::{
    gen_circle, gen_concentric_circles, gen_two_moons, preprocess, sample_delaunay_model_weighted, DelaunayModel,
    Preprocess, TriangleWeighting,
};
use kds_core::encoder::default_step_size;
use kds_core::spectral::{cluster_pipeline, ClusterOptions};
use kds_core::trainer::mean_loss;
use kds_core::{clustering_accuracy, train, CodeMatrix, Matrix, StepSize, TrainConfig, SUPPORT_THRESHOLD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{bench_cell, loglog_slope, BenchSpec, BenchmarkRecord, Slopes, CSV_HEADER};
use crate::config::{
    fmt_f64, fmt_list, train_from_config, train_to_config, ClusterSettings, ConfigError, PreprocessChoice, RunConfig,
    CLUSTER_KEYS, TRAIN_KEYS,
};
use crate::io::{self, IoError};
use crate::metrics::Metrics;
use crate::suites::{self, Scale};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "KDS_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(kds_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl From<kds_core::Error> for CliError {
    fn from(e: kds_core::Error) -> Self {
        use kds_core::Error as E;
        match e {
            E::Diverged { .. } | E::NotConverged(_) | E::Degenerate(_) | E::Infeasible(_) => CliError::Numerical(e),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) | CliError::Failed(_) => 1,
            CliError::Usage(_) | CliError::Io(_) | CliError::Config(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kds", version, about = "Simplex-constrained dictionary learning and spectral clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Learn a dictionary and encode the data.
    Fit(FitArgs),
    /// Spectral clustering from a code matrix.
    Cluster(ClusterArgs),
    /// Time encoding and clustering over a grid of sample sizes.
    Benchmark(BenchmarkArgs),
    /// Cross-check the fast paths against the reference oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: `$KDS_OUTPUT_ROOT/<command>` or `runs/<command>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single worker, order-stable reductions.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// two-moons, concentric, circle or delaunay.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian noise scale (default 0.05 for two-moons, 0 otherwise).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Radius gap of the concentric circles.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Number of atoms.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Unrolled encoder iterations.
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// standard or printed.
    #[arg(long)]
    pub momentum: Option<String>,
    /// `auto` (sigma_max^-2) or a fixed value.
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub learn_alpha: Option<bool>,
    /// Encoder iterations for the final encode of all points.
    #[arg(long = "final-T")]
    pub final_t: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Data CSV, one point per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth labels; enables clustering and ACC for each variant.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// none, minmax, standardize, unitnorm or best.
    #[arg(long)]
    pub preprocess: Option<String>,
    /// Comma-separated lambda values, one run each.
    #[arg(long)]
    pub lambda_sweep: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub common: Common,
    /// Codes file (`m,n,nnz` header, then `row,col,value`).
    #[arg(long)]
    pub codes: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// quadratic or normalized.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ground-truth labels of the data points.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Atom coordinates, used to label atoms that no point uses.
    #[arg(long)]
    pub atoms: Option<PathBuf>,
    /// Run k-means on the points only.
    #[arg(long)]
    pub data_only: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma-separated seeds, one record per (n, seed).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Pre-trained dictionary; otherwise one is trained on a moons sample.
    #[arg(long)]
    pub atoms: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_n: Option<usize>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only this suite (repeatable).
    #[arg(long)]
    pub suite: Vec<String>,
    /// Use the acceptance-size instance counts.
    #[arg(long)]
    pub full: bool,
}

/// Parses arguments, runs, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Flag overlay: only flags that were given.
struct Overlay(RunConfig);

impl Overlay {
    fn new() -> Self {
        Overlay(RunConfig::new())
    }

    fn put<T: ToString>(&mut self, key: &str, v: Option<T>) -> CliResult<()> {
        if let Some(v) = v {
            self.0.set(key, v.to_string())?;
        }
        Ok(())
    }

    fn put_f64(&mut self, key: &str, v: Option<f64>) -> CliResult<()> {
        self.put(key, v.map(fmt_f64))
    }

    fn put_path(&mut self, key: &str, v: &Option<PathBuf>) -> CliResult<()> {
        self.put(key, v.as_ref().map(|p| p.display().to_string()))
    }

    fn train(&mut self, f: &TrainFlags) -> CliResult<()> {
        self.put("m", f.m)?;
        self.put_f64("lambda", f.lambda)?;
        self.put("T", f.t)?;
        self.put_f64("lr", f.lr)?;
        self.put("epochs", f.epochs)?;
        self.put("batch_size", f.batch_size)?;
        self.put("seed", f.seed)?;
        self.put("momentum", f.momentum.clone())?;
        self.put("step", f.step.clone())?;
        self.put("learn_alpha", f.learn_alpha)?;
        self.put("final_T", f.final_t)
    }
}

/// `defaults`, then the config file, then flags; unknown keys are rejected.
fn resolve(command: &str, defaults: RunConfig, common: &Common, flags: Overlay, allowed: &[&str]) -> CliResult<RunConfig> {
    let mut cfg = defaults;
    if let Some(path) = &common.config {
        let text = io::read_text(path)?;
        let file = RunConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.merge(&file);
    }
    cfg.merge(&flags.0);
    if let Some(out) = &common.out {
        cfg.set("out", out.display())?;
    }
    if !cfg.contains("out") {
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        cfg.set("out", root.join(command).display())?;
    }
    if common.deterministic {
        cfg.set("deterministic", true)?;
    }
    let mut keys: Vec<&str> = allowed.to_vec();
    keys.extend(["out", "deterministic"]);
    cfg.check_keys(&keys)?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = PathBuf::from(cfg.raw("out").unwrap_or("runs"));
    io::ensure_dir(&dir)?;
    Ok(dir)
}

fn deterministic(cfg: &RunConfig) -> CliResult<bool> {
    Ok(if cfg.contains("deterministic") { cfg.get("deterministic")? } else { false })
}

fn required_path(cfg: &RunConfig, key: &str) -> CliResult<PathBuf> {
    cfg.raw(key)
        .map(PathBuf::from)
        .ok_or_else(|| CliError::Usage(format!("--{} is required", key.replace('_', "-"))))
}

fn optional_path(cfg: &RunConfig, key: &str) -> Option<PathBuf> {
    cfg.raw(key).map(PathBuf::from)
}

fn write_config(dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    Ok(io::write_text(&dir.join("config.cfg"), &cfg.serialize())?)
}

fn write_metrics(dir: &Path, m: &Metrics) -> CliResult<()> {
    Ok(io::write_text(&dir.join("metrics.json"), &m.to_json())?)
}

const GENERATE_KEYS: &[&str] = &[
    "dataset", "n", "noise", "delta", "seed", "clusters", "atoms_per_cluster", "separation", "cluster_radius",
    "weighting", "atoms_file", "atom_labels_file",
];

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let mut defaults = RunConfig::new();
    for (k, v) in [("dataset", "two-moons"), ("n", "5000"), ("delta", "0.15"), ("seed", "0")] {
        defaults.set(k, v)?;
    }
    let mut fl = Overlay::new();
    fl.put("dataset", a.dataset.clone())?;
    fl.put("n", a.n)?;
    fl.put_f64("noise", a.noise)?;
    fl.put_f64("delta", a.delta)?;
    fl.put("seed", a.seed)?;
    let mut cfg = resolve("generate", defaults, &a.common, fl, GENERATE_KEYS)?;
    let dataset: String = cfg.get("dataset")?;
    if !cfg.contains("noise") {
        cfg.set("noise", if dataset == "two-moons" { "0.05" } else { "0.0" })?;
    }
    let (n, noise, seed): (usize, f64, u64) = (cfg.get("n")?, cfg.get("noise")?, cfg.get("seed")?);
    if dataset != "delaunay" {
        if let Some(k) = ["clusters", "atoms_per_cluster", "separation", "cluster_radius", "weighting", "atoms_file", "atom_labels_file"]
            .into_iter()
            .find(|k| cfg.contains(k))
        {
            return Err(CliError::Usage(format!("{k:?} only applies to the delaunay dataset")));
        }
    }
    if dataset != "concentric" && a.delta.is_some() {
        return Err(CliError::Usage("--delta only applies to the concentric dataset".into()));
    }
    let dir = out_dir(&cfg)?;
    match dataset.as_str() {
        "two-moons" | "concentric" | "circle" => {
            let (data, labels) = match dataset.as_str() {
                "two-moons" => gen_two_moons(n, noise, seed)?,
                "concentric" => gen_concentric_circles(n, cfg.get("delta")?, seed, noise)?,
                _ => gen_circle(n, seed, noise)?,
            };
            io::write_data(&dir.join("data.csv"), &data)?;
            io::write_labels(&dir.join("labels.csv"), &labels)?;
        }
        "delaunay" => generate_delaunay(&mut cfg, &dir, n, noise, seed)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown dataset {other:?} (two-moons, concentric, circle, delaunay)"
            )))
        }
    }
    write_config(&dir, &cfg)?;
    print!("{}", cfg.serialize());
    Ok(())
}

fn generate_delaunay(cfg: &mut RunConfig, dir: &Path, n: usize, noise: f64, seed: u64) -> CliResult<()> {
    for (k, v) in [
        ("clusters", "2"),
        ("atoms_per_cluster", "6"),
        ("separation", "6.0"),
        ("cluster_radius", "1.0"),
        ("weighting", "uniform"),
    ] {
        if !cfg.contains(k) {
            cfg.set(k, v)?;
        }
    }
    let weighting = match cfg.raw("weighting").unwrap_or_default() {
        "uniform" => TriangleWeighting::Uniform,
        "area" => TriangleWeighting::Area,
        w => return Err(CliError::Usage(format!("weighting {w:?}: expected uniform or area"))),
    };
    let (atoms, clusters) = match optional_path(cfg, "atoms_file") {
        Some(p) => {
            let atoms = io::read_data(&p)?;
            let clusters = match optional_path(cfg, "atom_labels_file") {
                Some(lp) => io::read_labels(&lp)?,
                None => vec![0; atoms.cols()],
            };
            (atoms, clusters)
        }
        None => {
            let (k, per): (usize, usize) = (cfg.get("clusters")?, cfg.get("atoms_per_cluster")?);
            let (sep, radius): (f64, f64) = (cfg.get("separation")?, cfg.get("cluster_radius")?);
            if k == 0 || per < 3 {
                return Err(CliError::Usage("need at least one cluster of at least 3 atoms".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa70a_5eed);
            let mut cols = Vec::new();
            let mut clusters = Vec::new();
            for c in 0..k {
                // Cluster centres on a circle, `sep` apart for neighbours.
                let ring = if k == 1 { 0.0 } else { sep / (2.0 * (std::f64::consts::PI / k as f64).sin()) };
                let phi = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                for _ in 0..per {
                    let (r, t) = (radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                    cols.push([ring * phi.cos() + r * t.cos(), ring * phi.sin() + r * t.sin()]);
                    clusters.push(c);
                }
            }
            (Matrix::from_columns(&cols)?, clusters)
        }
    };
    let model = DelaunayModel::new(atoms, clusters, noise)?;
    let (data, truth) = sample_delaunay_model_weighted(&model, n, seed, weighting)?;
    io::write_data(&dir.join("data.csv"), &data)?;
    io::write_labels(&dir.join("labels.csv"), &truth.labels)?;
    io::write_codes(&dir.join("true_codes.csv"), &truth.true_codes)?;
    io::write_data(&dir.join("atoms.csv"), &model.atoms)?;
    io::write_labels(&dir.join("atom_labels.csv"), &model.atom_cluster)?;
    let tris = model.triangles.iter().map(|t| format!("{},{},{}\n", t[0], t[1], t[2])).collect::<String>();
    io::write_text(&dir.join("triangles.csv"), &tris)?;
    Ok(())
}

fn fit_keys() -> Vec<&'static str> {
    let mut keys = TRAIN_KEYS.to_vec();
    keys.extend(["data", "labels", "preprocess", "lambda_sweep", "k", "mode", "replicates"]);
    keys
}

struct FitOutcome {
    metrics: Metrics,
    final_loss: f64,
}

fn fit_one(data: &Matrix, labels: Option<&[usize]>, tc: &TrainConfig, cluster: &ClusterSettings, dir: &Path) -> CliResult<FitOutcome> {
    io::ensure_dir(dir)?;
    let start = Instant::now();
    let out = train(data, tc)?;
    let seconds = start.elapsed().as_secs_f64();
    io::write_data(&dir.join("atoms.csv"), &out.atoms)?;
    io::write_codes(&dir.join("codes.csv"), &out.codes)?;
    io::write_series(&dir.join("loss_history.csv"), &out.loss_history)?;
    let final_loss = mean_loss(&out.atoms, data, &out.codes, tc.encoder.lambda)?;
    let mut metrics = Metrics {
        mean_support: Some(out.codes.mean_support(SUPPORT_THRESHOLD)),
        epochs: Some(out.loss_history.len()),
        seconds_encode: Some(seconds),
        ..Metrics::default()
    };
    if let Some(truth) = labels {
        let start = Instant::now();
        let res = cluster_pipeline(&out.codes, Some(&out.atoms), &cluster_options(cluster, truth))?;
        metrics.seconds_cluster = Some(start.elapsed().as_secs_f64());
        metrics.acc = Some(clustering_accuracy(&res.data_labels, truth)?);
        io::write_labels(&dir.join("pred_labels.csv"), &[res.data_labels, res.atom_labels].concat())?;
    }
    write_metrics(dir, &metrics)?;
    Ok(FitOutcome { metrics, final_loss })
}

fn cluster_options(s: &ClusterSettings, truth: &[usize]) -> ClusterOptions {
    let k = truth.iter().max().map_or(s.k, |&l| (l + 1).max(s.k));
    ClusterOptions {
        clusters: k,
        replicates: s.replicates,
        seed: s.seed,
        mode: s.mode,
        include_atoms: s.include_atoms,
    }
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let mut defaults = RunConfig::new();
    train_to_config(&TrainConfig::default(), &mut defaults);
    defaults.set("preprocess", "none")?;
    let mut fl = Overlay::new();
    fl.train(&a.train)?;
    fl.put_path("data", &a.data)?;
    fl.put_path("labels", &a.labels)?;
    fl.put("preprocess", a.preprocess.clone())?;
    fl.put("lambda_sweep", a.lambda_sweep.clone())?;
    let cfg = resolve("fit", defaults, &a.common, fl, &fit_keys())?;
    let mut tc = train_from_config(&cfg)?;
    tc.parallel = !deterministic(&cfg)?;
    let cluster = ClusterSettings::from_config(&cfg)?;
    let choice = PreprocessChoice::parse(cfg.raw("preprocess").unwrap_or("none"))
        .ok_or_else(|| CliError::Usage("preprocess: expected none, minmax, standardize, unitnorm or best".into()))?;
    let raw = io::read_data(&required_path(&cfg, "data")?)?;
    let labels = match optional_path(&cfg, "labels") {
        Some(p) => {
            let l = io::read_labels(&p)?;
            if l.len() != raw.cols() {
                return Err(CliError::Usage(format!("{}: {} labels for {} points", p.display(), l.len(), raw.cols())));
            }
            Some(l)
        }
        None => None,
    };
    let dir = out_dir(&cfg)?;
    write_config(&dir, &cfg)?;

    let modes: Vec<Option<Preprocess>> = match choice {
        PreprocessChoice::None => vec![None],
        PreprocessChoice::One(p) => vec![Some(p)],
        PreprocessChoice::Best => Preprocess::ALL.iter().map(|&p| Some(p)).collect(),
    };
    let lambdas: Vec<Option<f64>> = if cfg.contains("lambda_sweep") {
        cfg.get_list::<f64>("lambda_sweep")?.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let single = modes.len() == 1 && lambdas.len() == 1;
    let mut summary = serde_json::Map::new();
    let mut best: Option<(String, f64, f64)> = None;
    for mode in &modes {
        let data = match mode {
            Some(p) => preprocess(&raw, *p)?.data,
            None => raw.clone(),
        };
        for lambda in &lambdas {
            let mut tc = tc.clone();
            let mut name = mode.map_or("none".to_string(), |p| p.name().to_string());
            if let Some(l) = lambda {
                tc.encoder.lambda = *l;
                name = format!("{name}_lambda{}", fmt_f64(*l));
            }
            let sub = if single { dir.clone() } else { dir.join(&name) };
            let res = fit_one(&data, labels.as_deref(), &tc, &cluster, &sub)?;
            println!(
                "{name}: final loss {:.6e}, mean support {:.3}{}",
                res.final_loss,
                res.metrics.mean_support.unwrap_or(f64::NAN),
                res.metrics.acc.map_or(String::new(), |a| format!(", ACC {a:.4}"))
            );
            let score = (res.metrics.acc.unwrap_or(f64::NEG_INFINITY), -res.final_loss);
            if best.as_ref().is_none_or(|b| (score.0, score.1) > (b.1, b.2)) {
                best = Some((name.clone(), score.0, score.1));
            }
            let mut entry = serde_json::to_value(&res.metrics).expect("metrics serialize");
            entry["final_loss"] = serde_json::json!(res.final_loss);
            summary.insert(name, entry);
        }
    }
    if !single {
        let mut doc = serde_json::Map::new();
        doc.insert("runs".into(), serde_json::Value::Object(summary));
        doc.insert("best".into(), serde_json::json!(best.map(|b| b.0)));
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("json") + "\n";
        io::write_text(&dir.join("summary.json"), &text)?;
    }
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> CliResult<()> {
    let mut defaults = RunConfig::new();
    ClusterSettings::default().to_config(&mut defaults);
    let mut fl = Overlay::new();
    fl.put("k", a.k)?;
    fl.put("mode", a.mode.clone())?;
    fl.put("replicates", a.replicates)?;
    fl.put("seed", a.seed)?;
    fl.put_path("codes", &a.codes)?;
    fl.put_path("truth", &a.truth)?;
    fl.put_path("atoms", &a.atoms)?;
    if a.data_only {
        fl.put("include_atoms", Some(false))?;
    }
    let mut keys = CLUSTER_KEYS.to_vec();
    keys.extend(["codes", "truth", "atoms"]);
    let cfg = resolve("cluster", defaults, &a.common, fl, &keys)?;
    let s = ClusterSettings::from_config(&cfg)?;
    let codes: CodeMatrix = io::read_codes(&required_path(&cfg, "codes")?)?;
    if s.k > codes.rows() {
        return Err(CliError::Usage(format!("k = {} exceeds the number of atoms ({})", s.k, codes.rows())));
    }
    let truth = match optional_path(&cfg, "truth") {
        Some(p) => {
            let t = io::read_labels(&p)?;
            if t.len() != codes.cols() {
                return Err(CliError::Usage(format!("{}: {} labels for {} points", p.display(), t.len(), codes.cols())));
            }
            Some(t)
        }
        None => None,
    };
    let atoms = match optional_path(&cfg, "atoms") {
        Some(p) => {
            let m = io::read_data(&p)?;
            if m.cols() != codes.rows() {
                return Err(CliError::Usage(format!("{}: {} atoms, codes use {}", p.display(), m.cols(), codes.rows())));
            }
            Some(m)
        }
        None => None,
    };
    let dir = out_dir(&cfg)?;
    write_config(&dir, &cfg)?;
    let opts = ClusterOptions {
        clusters: s.k,
        replicates: s.replicates,
        seed: s.seed,
        mode: s.mode,
        include_atoms: s.include_atoms,
    };
    let start = Instant::now();
    let out = cluster_pipeline(&codes, atoms.as_ref(), &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    io::write_labels(&dir.join("pred_labels.csv"), &[out.data_labels.clone(), out.atom_labels].concat())?;
    let acc = truth.as_deref().map(|t| clustering_accuracy(&out.data_labels, t)).transpose()?;
    let metrics = Metrics {
        acc,
        mean_support: Some(codes.mean_support(SUPPORT_THRESHOLD)),
        seconds_cluster: Some(seconds),
        ..Metrics::default()
    };
    write_metrics(&dir, &metrics)?;
    if let Some(acc) = acc {
        println!("ACC {acc:.4}");
    }
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> CliResult<()> {
    let mut defaults = RunConfig::new();
    let base = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    train_to_config(&base, &mut defaults);
    for (k, v) in [
        ("n", "10000,20000,40000,80000"),
        ("seeds", "0"),
        ("repeats", "3"),
        ("train_n", "5000"),
        ("noise", "0.05"),
    ] {
        defaults.set(k, v)?;
    }
    ClusterSettings::default().to_config(&mut defaults);
    let mut fl = Overlay::new();
    fl.train(&a.train)?;
    fl.put("n", a.n.clone())?;
    fl.put("seeds", a.seeds.clone())?;
    fl.put_path("atoms", &a.atoms)?;
    fl.put("repeats", a.repeats)?;
    fl.put("train_n", a.train_n)?;
    let mut keys = TRAIN_KEYS.to_vec();
    keys.extend(CLUSTER_KEYS);
    keys.extend(["n", "seeds", "atoms", "repeats", "train_n", "noise"]);
    let cfg = resolve("benchmark", defaults, &a.common, fl, &keys)?;
    let mut tc = train_from_config(&cfg)?;
    tc.parallel = !deterministic(&cfg)?;
    let cs = ClusterSettings::from_config(&cfg)?;
    let grid: Vec<usize> = cfg.get_list("n")?;
    let seeds: Vec<u64> = cfg.get_list("seeds")?;
    let noise: f64 = cfg.get("noise")?;
    if grid.is_empty() || grid.iter().any(|&n| n < 2) {
        return Err(CliError::Usage("n grid needs sizes of at least 2".into()));
    }
    let dir = out_dir(&cfg)?;
    write_config(&dir, &cfg)?;
    let atoms = match optional_path(&cfg, "atoms") {
        Some(p) => io::read_data(&p)?,
        None => {
            let (train_data, _) = gen_two_moons(cfg.get("train_n")?, noise, tc.seed)?;
            let out = train(&train_data, &tc)?;
            io::write_data(&dir.join("atoms.csv"), &out.atoms)?;
            out.atoms
        }
    };
    let alpha = match tc.encoder.step {
        StepSize::Fixed(a) => a,
        StepSize::Auto => default_step_size(&atoms)?,
    };
    let spec = BenchSpec {
        atoms: &atoms,
        encoder: tc.encoder,
        alpha,
        noise,
        cluster: ClusterOptions {
            clusters: cs.k,
            replicates: cs.replicates,
            seed: cs.seed,
            mode: cs.mode,
            include_atoms: cs.include_atoms,
        },
        repeats: cfg.get("repeats")?,
    };
    let mut records: Vec<BenchmarkRecord> = Vec::new();
    let mut csv = format!("{CSV_HEADER}\n");
    for &n in &grid {
        for &seed in &seeds {
            let r = bench_cell(&spec, n, seed)?;
            println!(
                "n = {n}, seed = {seed}: encode {:.4}s, cluster {:.4}s, ACC {:.4}",
                r.t_encode_seconds, r.t_cluster_seconds, r.accuracy
            );
            csv.push_str(&r.csv_row());
            csv.push('\n');
            records.push(r);
        }
    }
    io::write_text(&dir.join("benchmark.csv"), &csv)?;
    let plots = [("timing.svg", false), ("timing_loglog.svg", true)];
    for (name, loglog) in plots {
        crate::plot::timing_plot(&dir.join(name), &records, loglog)
            .map_err(|e| CliError::Failed(format!("plot {name}: {e}")))?;
    }
    let mut distinct = grid.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let slopes_path = dir.join("slopes.json");
    if distinct.len() < 3 {
        // Stale slopes from an earlier run in the same directory would mislead.
        let _ = std::fs::remove_file(&slopes_path);
        eprintln!("slope fit needs at least 3 distinct sizes; slopes.json not written");
        return Ok(());
    }
    let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let pick = |f: fn(&BenchmarkRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let (Some(enc), Some(clu)) = (
        loglog_slope(&ns, &pick(|r| r.t_encode_seconds)),
        loglog_slope(&ns, &pick(|r| r.t_cluster_seconds)),
    ) else {
        return Err(CliError::Failed("timings too small to fit a slope".into()));
    };
    let slopes = Slopes {
        encode_slope: enc,
        cluster_slope: clu,
        n: distinct,
    };
    io::write_text(&slopes_path, &(serde_json::to_string_pretty(&slopes).expect("json") + "\n"))?;
    println!("log-log slopes: encode {enc:.3}, cluster {clu:.3} (n = {})", fmt_list(&slopes.n));
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult<()> {
    let names: Vec<String> = if a.suite.is_empty() {
        suites::SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        a.suite.clone()
    };
    if let Some(bad) = names.iter().find(|n| !suites::SUITES.contains(&n.as_str())) {
        return Err(CliError::Usage(format!("unknown suite {bad:?} (one of {})", suites::SUITES.join(", "))));
    }
    let scale = if a.full { Scale::Full } else { Scale::Quick };
    let mut failed = Vec::new();
    for name in &names {
        let rep = suites::run_suite(name, scale).expect("name checked above");
        println!("{rep}");
        if !rep.passed {
            failed.push(name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed suites: {}", failed.join(", "))))
    }
}
