//! The `anyloc` command line.
//!
//! Every subcommand can also be configured from a TOML file passed with
//! `--config`. Keys in the file's `[<subcommand>]` table use the long flag
//! names (`-` or `_`); top-level `log_level` and `jobs` apply to every
//! command. Flags given on the command line win over the file.
//!
//! Exit codes: 0 success, 1 validation/format failure, 2 configuration or
//! infeasible request, 3 I/O failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aggregation::{AggregationMethod, Assignment, PoolingConfig, VladConfig};
use crate::cluster_viz::{assign_map_with, export_label_image, montage, save_png, Palette};
use crate::error::{Error, Result};
use crate::feature_store::{Dataset, DatasetManifest, DescriptorSet, FeatureDir, FeatureSource, MANIFEST_FILE};
use crate::models::default_clusters_for_dim;
use crate::projection::{export_domain_scatter, fit_pca_with, PcaConfig, DEFAULT_EPSILON};
use crate::retrieval::{describe, evaluate, evaluate_descriptors, DescriptorCache, EvalOptions, Metric};
use crate::vocabulary::{
    build_vocabulary, preset, Domain, KMeansParams, VocabAssembly, VocabPart, Vocabulary, DEFAULT_SAMPLE_CAP,
    DEFAULT_SEED,
};

/// Fallback cluster count when the feature dim has no established default.
const FALLBACK_CLUSTERS: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "anyloc", version, about = "Training-free visual place recognition toolkit")]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    /// Worker threads for per-image stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that every manifest entry has a readable feature file of consistent dim.
    Validate(ValidateArgs),
    /// Build a VLAD vocabulary by k-means over database features.
    BuildVocab(BuildVocabArgs),
    /// Aggregate feature maps into a descriptor set.
    Aggregate(AggregateArgs),
    /// Fit a PCA (optionally whitening) model on database descriptors.
    FitPca(FitPcaArgs),
    /// Aggregate, optionally project, rank and report Recall@K.
    Evaluate(EvaluateArgs),
    /// Export 2-D PCA coordinates of labelled descriptor sets.
    Scatter(ScatterArgs),
    /// Render per-pixel cluster assignments as PNG label images.
    Clustviz(ClustvizArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::BuildVocab(_) => "build-vocab",
            Command::Aggregate(_) => "aggregate",
            Command::FitPca(_) => "fit-pca",
            Command::Evaluate(_) => "evaluate",
            Command::Scatter(_) => "scatter",
            Command::Clustviz(_) => "clustviz",
        }
    }
}

/// A dataset directory holding `manifest.toml` and `<image_id>.anyf` files.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DatasetArgs {
    /// Dataset directory.
    dataset: Option<PathBuf>,

    /// Manifest path, if not `<dataset>/manifest.toml`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl DatasetArgs {
    fn open(&self) -> Result<Dataset> {
        let dir = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("a dataset directory is required".into()))?;
        let manifest_path = self.manifest.clone().unwrap_or_else(|| dir.join(MANIFEST_FILE));
        Ok(Dataset {
            manifest: DatasetManifest::load_path(&manifest_path)?,
            features: FeatureDir::new(dir),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Gap,
    Gmp,
    Gem,
    Vlad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AssignmentArg {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RoleArg {
    All,
    Database,
    Query,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "gem")]
    method: MethodArg,

    /// GeM exponent.
    #[arg(long, default_value_t = 3.0)]
    p: f64,

    /// Skip the final L2 normalization of pooled descriptors.
    #[arg(long)]
    no_normalize: bool,

    #[arg(long, value_enum, default_value = "hard")]
    assignment: AssignmentArg,

    /// Soft-assignment temperature.
    #[arg(long, default_value_t = Assignment::DEFAULT_TEMPERATURE)]
    temperature: f64,

    /// Vocabulary file (VLAD only).
    #[arg(long)]
    vocab: Option<PathBuf>,

    /// L2-normalize pixel features before VLAD assignment.
    #[arg(long)]
    normalize_features: bool,
}

impl MethodArgs {
    fn build(&self) -> Result<AggregationMethod> {
        let pooled = |cfg: PoolingConfig| {
            if self.vocab.is_some() {
                log::warn!("--vocab is only used by --method vlad; ignoring it");
            }
            let cfg = if self.no_normalize { cfg.unnormalized() } else { cfg };
            Ok(AggregationMethod::Pool(cfg))
        };
        match self.method {
            MethodArg::Gap => pooled(PoolingConfig::gap()),
            MethodArg::Gmp => pooled(PoolingConfig::gmp()),
            MethodArg::Gem => pooled(PoolingConfig::gem(self.p)),
            MethodArg::Vlad => {
                let path = self
                    .vocab
                    .as_ref()
                    .ok_or_else(|| Error::Config("--method vlad needs --vocab".into()))?;
                let vocab = Arc::new(Vocabulary::load(path)?);
                log::info!(
                    "vocabulary {}: k={}, dim={}",
                    vocab.fingerprint(),
                    vocab.k(),
                    vocab.dim()
                );
                let assignment = match self.assignment {
                    AssignmentArg::Hard => Assignment::Hard,
                    AssignmentArg::Soft => Assignment::Soft {
                        temperature: self.temperature,
                    },
                };
                let cfg = VladConfig {
                    assignment,
                    vocabulary: vocab,
                    normalize_features: self.normalize_features,
                };
                Ok(AggregationMethod::Vlad(cfg))
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DatasetArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct BuildVocabArgs {
    /// Dataset directory, optionally with a stride: `DIR[:STRIDE]`. Repeatable.
    #[arg(long = "part", value_name = "DIR[:STRIDE]")]
    part: Vec<String>,

    /// Domain recipe to expand against `--datasets-root`.
    #[arg(long)]
    preset: Option<String>,

    /// Directory whose subdirectories are datasets (used with `--preset`).
    #[arg(long)]
    datasets_root: Option<PathBuf>,

    /// Number of clusters (default: from the feature dim).
    #[arg(long)]
    k: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: i64,

    /// Maximum number of feature vectors clustered.
    #[arg(long)]
    sample_cap: Option<usize>,

    /// Cluster every pooled feature vector.
    #[arg(long)]
    no_sample_cap: bool,

    #[arg(long, default_value_t = KMeansParams::default().max_iters)]
    max_iters: usize,

    #[arg(long, default_value_t = KMeansParams::default().tol)]
    tol: f64,

    /// Output vocabulary file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct AggregateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    #[serde(flatten)]
    method: MethodArgs,

    /// Which manifest entries to aggregate.
    #[arg(long, value_enum, default_value = "all")]
    role: RoleArg,

    /// Output descriptor set file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct FitPcaArgs {
    /// Descriptor set to fit on.
    #[arg(long)]
    descriptors: Option<PathBuf>,

    /// Restrict the fit to this manifest's database entries.
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Number of components.
    #[arg(long, default_value_t = crate::projection::DEFAULT_WHITENED_DIM)]
    dim: usize,

    #[arg(long)]
    whiten: bool,

    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    #[serde(flatten)]
    method: MethodArgs,

    /// Precomputed descriptors (e.g. CLS vectors) instead of aggregating features.
    #[arg(long)]
    descriptors: Option<PathBuf>,

    /// Project to this many PCA components fitted on the database.
    #[arg(long)]
    pca: Option<usize>,

    #[arg(long)]
    whiten: bool,

    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Keep projected descriptors unnormalized.
    #[arg(long)]
    no_renormalize: bool,

    #[arg(long, default_value = "cosine")]
    metric: String,

    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    k: Vec<usize>,

    /// Write `<out>.txt` and `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ScatterArgs {
    /// Labelled descriptor set `LABEL=FILE`. Repeatable.
    #[arg(long = "set", value_name = "LABEL=FILE")]
    set: Vec<String>,

    /// Descriptor sets to fit the PCA on (default: every `--set`).
    #[arg(long = "fit", value_name = "FILE")]
    fit: Vec<PathBuf>,

    /// Output TSV file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ClustvizArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DatasetArgs,

    #[arg(long)]
    vocab: Option<PathBuf>,

    /// Images to render (default: every manifest entry).
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,

    /// Nearest-neighbour upscaling factor.
    #[arg(long, default_value_t = 14)]
    scale: u32,

    /// Comma-separated RRGGBB colours (default: built-in 8-colour palette).
    #[arg(long)]
    palette: Option<String>,

    #[arg(long)]
    normalize_features: bool,

    /// Also write all selected maps side by side into `montage.png`.
    #[arg(long)]
    montage: bool,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code as u8;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match resolve_and_run(cli, &matches) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_and_run(mut cli: Cli, matches: &ArgMatches) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Some(table)
        }
        None => None,
    };
    let empty = toml::Table::new();
    let file = file.as_ref().unwrap_or(&empty);

    if matches.value_source("log_level") != Some(ValueSource::CommandLine) {
        if let Some(v) = file.get("log_level").and_then(|v| v.as_str()) {
            cli.log_level = v.to_string();
        }
    }
    if matches.value_source("jobs") != Some(ValueSource::CommandLine) {
        if let Some(v) = file.get("jobs") {
            let jobs = v
                .as_integer()
                .filter(|&j| j > 0)
                .ok_or_else(|| Error::Config(format!("config 'jobs' must be a positive integer, got {v}")))?;
            cli.jobs = Some(jobs as usize);
        }
    }
    init_logging(&cli.log_level)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        // a second call in the same process (tests) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let name = cli.command.name();
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let section = match file.get(name) {
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => return Err(Error::Config(format!("config '{name}' must be a table"))),
        None => None,
    };
    for key in file.keys() {
        if !["log_level", "jobs", name].contains(&key.as_str()) && !is_command_name(key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
    }

    let resolved = |args: Value| -> Result<Value> { merge(args, section, sub) };
    match cli.command {
        Command::Validate(a) => {
            let a: ValidateArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_validate(&a)
        }
        Command::BuildVocab(a) => {
            let a: BuildVocabArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_build_vocab(&a)
        }
        Command::Aggregate(a) => {
            let a: AggregateArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_aggregate(&a)
        }
        Command::FitPca(a) => {
            let a: FitPcaArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_fit_pca(&a)
        }
        Command::Evaluate(a) => {
            let a: EvaluateArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_evaluate(&a)
        }
        Command::Scatter(a) => {
            let a: ScatterArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_scatter(&a)
        }
        Command::Clustviz(a) => {
            let a: ClustvizArgs = reload(resolved(to_value(&a))?)?;
            log_config(name, &a, &cli.log_level, cli.jobs);
            cmd_clustviz(&a)
        }
    }
}

fn is_command_name(key: &str) -> bool {
    Cli::command().get_subcommands().any(|c| c.get_name() == key)
}

fn init_logging(level: &str) -> Result<()> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| Error::Config(format!("unknown log level '{level}'")))?;
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    log::set_max_level(filter);
    Ok(())
}

fn to_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn reload<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(format!("config: {e}")))
}

/// Fills every argument not given on the command line from the config section.
fn merge(mut args: Value, section: Option<&toml::Table>, matches: &ArgMatches) -> Result<Value> {
    let Some(section) = section else {
        return Ok(args);
    };
    let obj = args.as_object_mut().expect("arguments are a struct");
    for (key, value) in section {
        let id = key.replace('-', "_");
        if !obj.contains_key(&id) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let v = serde_json::to_value(value).map_err(|e| Error::Config(format!("config '{key}': {e}")))?;
        obj.insert(id, v);
    }
    Ok(args)
}

fn log_config<T: Serialize>(command: &str, args: &T, log_level: &str, jobs: Option<usize>) {
    let resolved = serde_json::json!({
        "command": command,
        "log_level": log_level,
        "jobs": jobs,
        "args": args,
    });
    log::info!("resolved config: {resolved}");
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let ds = a.data.open()?;
    let mut problems = Vec::new();
    let mut dims: BTreeMap<usize, (String, usize)> = BTreeMap::new();
    for e in ds.manifest.entries() {
        let path = ds.features.path_for(&e.image_id);
        match ds.features.load(&e.image_id) {
            Ok(m) => {
                dims.entry(m.dim()).or_insert_with(|| (e.image_id.clone(), 0)).1 += 1;
            }
            Err(Error::IoAt { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
                problems.push(format!("missing feature file for '{}': {}", e.image_id, path.display()))
            }
            Err(err) => problems.push(format!("unreadable feature file for '{}': {err}", e.image_id)),
        }
    }
    if dims.len() > 1 {
        let listed: Vec<String> = dims
            .iter()
            .map(|(d, (id, n))| format!("dim {d} ({n} maps, e.g. '{id}')"))
            .collect();
        problems.push(format!("mixed feature dims: {}", listed.join(" vs ")));
    }
    if problems.is_empty() {
        let dim = dims.keys().next().copied().unwrap_or(0);
        println!("OK, {} maps, dim {dim}", ds.manifest.entries().len());
        return Ok(());
    }
    for p in &problems {
        println!("FAIL: {p}");
    }
    Err(Error::Validation(format!(
        "dataset '{}' has {} problem(s)",
        ds.manifest.name(),
        problems.len()
    )))
}

fn parse_part(spec: &str) -> Result<(PathBuf, usize)> {
    if let Some((dir, stride)) = spec.rsplit_once(':') {
        if let Ok(s) = stride.parse::<usize>() {
            if s == 0 {
                return Err(Error::Config(format!("stride in '{spec}' must be >= 1")));
            }
            return Ok((PathBuf::from(dir), s));
        }
    }
    Ok((PathBuf::from(spec), 1))
}

fn dataset_part(dir: &Path, stride: usize) -> Result<VocabPart> {
    let ds = Dataset::open(dir)?;
    Ok(VocabPart::new(ds.manifest, Arc::new(ds.features), stride))
}

fn cmd_build_vocab(a: &BuildVocabArgs) -> Result<()> {
    let out = required(&a.out, "out")?;
    let mut parts = Vec::new();
    if let Some(domain) = &a.preset {
        let domain: Domain = domain.parse()?;
        let root = a
            .datasets_root
            .as_ref()
            .ok_or_else(|| Error::Config("--preset needs --datasets-root".into()))?;
        let mut available = Vec::new();
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(|e| Error::io_at(root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        dirs.sort();
        for d in dirs {
            let ds = Dataset::open(&d)?;
            available.push((ds.manifest, Arc::new(ds.features) as Arc<dyn FeatureSource + Send>));
        }
        let recipe = preset(domain);
        for rp in &recipe.parts {
            log::info!("{domain} recipe: {} every {} image(s)", rp.dataset, rp.stride);
        }
        parts.extend(recipe.resolve(&available, 1)?.parts);
    }
    for spec in &a.part {
        let (dir, stride) = parse_part(spec)?;
        parts.push(dataset_part(&dir, stride)?);
    }
    if parts.is_empty() {
        return Err(Error::Config("give at least one --part or a --preset".into()));
    }

    let k = match a.k {
        Some(k) => k,
        None => {
            let first = parts
                .iter()
                .find_map(|p| p.selected_ids().first().map(|id| p.features.load(id)))
                .ok_or_else(|| Error::Infeasible("no database images selected".into()))??;
            match default_clusters_for_dim(first.dim()) {
                Some(k) => {
                    log::info!("using k={k} for {}-dim features", first.dim());
                    k
                }
                None => {
                    log::warn!(
                        "no default cluster count for {}-dim features; using k={FALLBACK_CLUSTERS}",
                        first.dim()
                    );
                    FALLBACK_CLUSTERS
                }
            }
        }
    };
    let mut assembly = VocabAssembly::new(parts, k);
    assembly.sample_cap = if a.no_sample_cap {
        None
    } else {
        Some(a.sample_cap.unwrap_or(DEFAULT_SAMPLE_CAP))
    };
    assembly.kmeans = KMeansParams {
        max_iters: a.max_iters,
        tol: a.tol,
    };
    let build = build_vocabulary(&assembly, a.seed)?;
    build.vocabulary.save(out)?;
    println!(
        "vocabulary k={} dim={} from {} of {} features, {} iterations",
        build.vocabulary.k(),
        build.vocabulary.dim(),
        build.clustered_features,
        build.pooled_features,
        build.iterations
    );
    println!("inertia {}", build.inertia);
    println!("fingerprint {}", build.vocabulary.fingerprint());
    Ok(())
}

fn cmd_aggregate(a: &AggregateArgs) -> Result<()> {
    let out = required(&a.out, "out")?;
    let ds = a.data.open()?;
    let method = a.method.build()?;
    let ids: Vec<&str> = match a.role {
        RoleArg::All => ds.manifest.entries().iter().map(|e| e.image_id.as_str()).collect(),
        RoleArg::Database => ds.manifest.database_ids(),
        RoleArg::Query => ds.manifest.query_ids(),
    };
    let set = describe(&ids, &ds.features, &method, None)?;
    set.save(out)?;
    println!(
        "{} descriptors, method {}, dim {}",
        set.len(),
        set.method_tag(),
        set.dim()
    );
    Ok(())
}

fn cmd_fit_pca(a: &FitPcaArgs) -> Result<()> {
    let out = required(&a.out, "out")?;
    let mut set = DescriptorSet::load(required(&a.descriptors, "descriptors")?)?;
    if let Some(m) = &a.manifest {
        let manifest = DatasetManifest::load_path(m)?;
        let db: Vec<&str> = manifest
            .database_ids()
            .into_iter()
            .filter(|id| set.contains(id))
            .collect();
        set = set.subset(db)?;
    }
    let model = fit_pca_with(
        &set,
        &PcaConfig {
            target_dim: a.dim,
            whiten: a.whiten,
            epsilon: a.epsilon,
        },
    )?;
    model.save(out)?;
    let explained: f64 = model.explained_variance_ratio().iter().sum();
    println!(
        "PCA {} -> {} dims{} on {} descriptors, explained variance {:.4}",
        model.input_dim(),
        model.output_dim(),
        if model.whiten() { " (whitened)" } else { "" },
        set.len(),
        explained
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = a.data.open()?;
    let options = EvalOptions {
        pca: a.pca.map(|dim| PcaConfig {
            target_dim: dim,
            whiten: a.whiten,
            epsilon: a.epsilon,
        }),
        renormalize: !a.no_renormalize,
        metric: a.metric.parse::<Metric>()?,
        k_values: a.k.clone(),
    };
    if a.pca.is_none() && a.whiten {
        log::warn!("--whiten has no effect without --pca");
    }
    let eval = match &a.descriptors {
        Some(path) => {
            let set = DescriptorSet::load(path)?;
            log::info!("precomputed descriptors '{}', dim {}", set.method_tag(), set.dim());
            evaluate_descriptors(&ds.manifest, &set, &options)?
        }
        None => {
            let method = a.method.build()?;
            let cache = DescriptorCache::from_env()?;
            if let Some(dir) = cache.dir() {
                log::info!("descriptor cache {}", dir.display());
            }
            evaluate(&ds.manifest, &ds.features, &method, &options, Some(&cache))?
        }
    };
    if let Some(model) = &eval.pca {
        log::info!("projected {} -> {} dims", model.input_dim(), model.output_dim());
    }
    let report = &eval.report;
    log::info!("descriptor dim {}", report.dim);
    print!("{}", report.to_table());
    if let Some(stem) = &a.out {
        let txt = stem.with_extension("txt");
        std::fs::write(&txt, report.to_table()).map_err(|e| Error::io_at(&txt, e))?;
        let doc = serde_json::json!({ "config": a, "report": report });
        let json = stem.with_extension("json");
        let body = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
        std::fs::write(&json, body).map_err(|e| Error::io_at(&json, e))?;
    }
    Ok(())
}

fn cmd_scatter(a: &ScatterArgs) -> Result<()> {
    if a.set.is_empty() {
        return Err(Error::Config("give at least one --set LABEL=FILE".into()));
    }
    let mut sets = Vec::with_capacity(a.set.len());
    for spec in &a.set {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects LABEL=FILE, got '{spec}'")))?;
        sets.push((label.to_string(), DescriptorSet::load(path)?));
    }
    let fit_sets: Vec<DescriptorSet> = if a.fit.is_empty() {
        sets.iter().map(|(_, s)| s.clone()).collect()
    } else {
        a.fit.iter().map(DescriptorSet::load).collect::<Result<_>>()?
    };
    let joint = concat_sets(&fit_sets)?;
    let model = fit_pca_with(&joint, &PcaConfig::new(2, false))?;
    let labelled: Vec<(&str, &DescriptorSet)> = sets.iter().map(|(l, s)| (l.as_str(), s)).collect();
    let table = export_domain_scatter(&model, &labelled)?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, table.to_tsv()).map_err(|e| Error::io_at(path, e))?;
            println!("{} rows written to {}", table.rows.len(), path.display());
        }
        None => print!("{}", table.to_tsv()),
    }
    Ok(())
}

/// Stacks sets for a joint fit; ids are prefixed by set index to stay unique.
fn concat_sets(sets: &[DescriptorSet]) -> Result<DescriptorSet> {
    let dim = sets.iter().find(|s| !s.is_empty()).map(|s| s.dim()).unwrap_or(0);
    let mut joint = DescriptorSet::new("joint", dim, None)?;
    for (i, s) in sets.iter().enumerate() {
        if !s.is_empty() && s.dim() != dim {
            return Err(Error::Config(format!(
                "descriptor sets have dims {dim} and {}",
                s.dim()
            )));
        }
        for (id, v) in s.iter() {
            joint.push(format!("{i}/{id}"), v)?;
        }
    }
    Ok(joint)
}

fn cmd_clustviz(a: &ClustvizArgs) -> Result<()> {
    let out = required(&a.out, "out")?;
    let ds = a.data.open()?;
    let vocab = Vocabulary::load(required(&a.vocab, "vocab")?)?;
    let palette = match &a.palette {
        Some(p) => Palette::parse(p)?,
        None => Palette::for_clusters(vocab.k()),
    };
    let ids: Vec<String> = if a.ids.is_empty() {
        ds.manifest.entries().iter().map(|e| e.image_id.clone()).collect()
    } else {
        a.ids.clone()
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io_at(out, e))?;
    let mut maps = Vec::with_capacity(ids.len());
    for id in &ids {
        if ds.manifest.entry(id).is_none() {
            return Err(Error::Config(format!("'{id}' is not in the manifest")));
        }
        let amap = assign_map_with(&ds.features.load(id)?, &vocab, a.normalize_features)?;
        export_label_image(&amap, &palette, a.scale, out.join(format!("{id}.png")))?;
        maps.push(amap);
    }
    if a.montage && !maps.is_empty() {
        let refs: Vec<_> = maps.iter().collect();
        save_png(
            &montage(&refs, &palette, a.scale, a.scale.max(4))?,
            out.join("montage.png"),
        )?;
    }
    println!("{} label images written to {}", maps.len(), out.display());
    Ok(())
}
