//! Command-line front end: `fit`, `simulate`, `benchmark` and `choose-b`.
//!
//! Exit codes: 0 success, 2 input error, 3 configuration error, 4 numeric
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{diagonal_threshold, vanilla_pca};
use crate::covariance::{choose_strategy, CovarianceSource, DataMatrix, Strategy};
use crate::deflation::{deflate_source, DeflationConfig};
use crate::error::Error;
use crate::estimator::{fit_source, SpcavrpConfig};
use crate::evaluation::{choose_b, subspace_loss, support_metrics, var_curve};
use crate::linalg::OrthonormalFrame;
use crate::model::{ModelSpec, Profile, SpikedModel};
use crate::rng::{derive_seed, DOMAIN_EXPERIMENT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RankDeficient { .. } | Error::DegenerateDeflation { .. } => EXIT_NUMERIC,
            Error::InvalidInput(_) | Error::TooLarge { .. } | Error::Unreachable { .. } => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "spcavrp", version, about = "Sparse PCA via random axis-aligned projections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate sparse principal components of a data CSV.
    Fit(FitArgs),
    /// Draw Gaussian data from a synthetic covariance model.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment described by a JSON spec.
    Benchmark(BenchmarkArgs),
    /// Number of projections per group needed to reach a target overlap.
    #[command(name = "choose-b")]
    ChooseB(ChooseBArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Rp,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Precomputed,
    OnDemand,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Precomputed => Strategy::Precomputed,
            StrategyArg::OnDemand => Strategy::OnDemand,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Number of groups; defaults to 300 for p <= 300 and 800 above.
    #[arg(long = "A")]
    pub groups: Option<usize>,
    /// Projections per group; defaults to ceil(A/3).
    #[arg(long = "B")]
    pub group_size: Option<usize>,
    /// Projection dimension; defaults to l (the largest l when deflating).
    #[arg(long = "d")]
    pub proj_dim: Option<usize>,
    #[arg(long = "l")]
    pub sparsity: Option<usize>,
    /// Comma-separated sparsity of each deflation step.
    #[arg(long = "l-per-component", value_delimiter = ',')]
    pub sparsities: Option<Vec<usize>>,
    #[arg(long = "m")]
    pub components: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub center: bool,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, value_enum, default_value_t = Algorithm::Rp)]
    pub algorithm: Algorithm,
    /// Same as `--algorithm deflate`.
    #[arg(long)]
    pub deflate: bool,
    /// The first CSV line is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    SingleSpike,
    Sigma1,
    Sigma2,
    Intro,
    TwoSpikeOverlapping,
    TwoSpikeDisjoint,
    BTradeoff,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "model_spec")]
    pub model: Option<ModelKind>,
    /// JSON model description, used instead of `--model`.
    #[arg(long)]
    pub model_spec: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub linear: bool,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Where to write the true components; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write 0 in the wall time column so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct ChooseBArgs {
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub p: usize,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(args) => with_threads(args.threads, || cmd_fit(&args)),
        Command::Simulate(args) => with_threads(args.threads, || cmd_simulate(&args)),
        Command::Benchmark(args) => with_threads(args.threads, || cmd_benchmark(&args)),
        Command::ChooseB(args) => {
            println!("{}", cmd_choose_b(&args)?);
            Ok(())
        }
    }
}

fn with_threads<F: FnOnce() -> CliResult<()> + Send>(threads: Option<usize>, f: F) -> CliResult<()> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::config("--threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {t} threads: {e}")))?
            .install(f),
    }
}

// ---------------------------------------------------------------- CSV I/O

/// Reads an `n x p` numeric CSV. Errors name the offending line.
pub fn read_data_csv(path: &Path, header: bool) -> CliResult<DataMatrix> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::input(format!(
                    "{}: line {line}, column {}: not a finite number: {field:?}",
                    path.display(),
                    c + 1
                ))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows).map_err(|e| CliError::input(e.to_string()))
}

/// Writes one observation per line with 17 significant digits.
pub fn write_data_csv(path: &Path, x: &DataMatrix) -> CliResult<()> {
    let mut out = String::with_capacity(x.n() * x.p() * 24);
    let m = x.as_matrix();
    for i in 0..x.n() {
        for j in 0..x.p() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        if e.is_syntax() || e.is_eof() || e.is_io() {
            CliError::input(format!("{}: {e}", path.display()))
        } else {
            CliError::config(format!("{}: {e}", path.display()))
        }
    })
}

fn frame_columns(frame: &OrthonormalFrame) -> Vec<Vec<f64>> {
    (0..frame.cols()).map(|r| frame.column(r).iter().copied().collect()).collect()
}

// ---------------------------------------------------------------- fit

pub fn default_groups(p: usize) -> usize {
    if p <= 300 {
        300
    } else {
        800
    }
}

pub fn default_group_size(groups: usize) -> usize {
    groups.div_ceil(3)
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum FitConfigEcho {
    Rp(SpcavrpConfig),
    Deflate(DeflationConfig),
}

#[derive(Debug, Serialize)]
struct FitOutput {
    algorithm: &'static str,
    n: usize,
    p: usize,
    seed: u64,
    strategy: Strategy,
    config: FitConfigEcho,
    /// One dense array of length `p` per component.
    vectors: Vec<Vec<f64>>,
    support: Vec<usize>,
    /// Support of each component (deflation only).
    #[serde(skip_serializing_if = "Option::is_none")]
    supports: Option<Vec<Vec<usize>>>,
    eigenvalues: Vec<f64>,
    /// Importance scores; one array per deflation step when deflating.
    scores: serde_json::Value,
}

fn union_support(frame: &OrthonormalFrame) -> Vec<usize> {
    let v = frame.as_matrix();
    (0..v.nrows()).filter(|&j| v.row(j).iter().any(|&x| x != 0.0)).collect()
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let x = read_data_csv(&args.input, args.header)?;
    let (n, p) = (x.n(), x.p());
    let groups = args.groups.unwrap_or_else(|| default_groups(p));
    let group_size = args.group_size.unwrap_or_else(|| default_group_size(groups));
    let deflate = args.deflate || args.algorithm == Algorithm::Deflate;

    let output = if deflate {
        if args.exhaustive {
            return Err(CliError::config("--exhaustive is not available with deflation"));
        }
        let sparsities = match (&args.sparsities, args.sparsity) {
            (Some(ls), None) => {
                if args.components.is_some_and(|m| m != ls.len()) {
                    return Err(CliError::config("--m disagrees with the length of --l-per-component"));
                }
                ls.clone()
            }
            (None, Some(l)) => vec![l; args.components.unwrap_or(1)],
            (Some(_), Some(_)) => return Err(CliError::config("give either --l or --l-per-component")),
            (None, None) => return Err(CliError::config("deflation needs --l or --l-per-component")),
        };
        let d = args
            .proj_dim
            .unwrap_or_else(|| sparsities.iter().copied().max().unwrap_or(1));
        let mut cfg = DeflationConfig::new(groups, group_size, d, sparsities).with_seed(args.seed);
        cfg.center = args.center;
        cfg.strategy = args.strategy.into();
        cfg.validate(p)?;
        let strategy = match cfg.strategy {
            Strategy::Auto => choose_strategy(n, p, groups, group_size, d),
            s => s,
        };
        let src = CovarianceSource::from_data(&x, strategy, cfg.center);
        let res = deflate_source(&src, &cfg)?;
        FitOutput {
            algorithm: "deflate",
            n,
            p,
            seed: args.seed,
            strategy,
            vectors: frame_columns(&res.components),
            support: union_support(&res.components),
            supports: Some(res.supports),
            eigenvalues: res.eigenvalues,
            scores: serde_json::to_value(&res.scores).expect("serializable"),
            config: FitConfigEcho::Deflate(cfg),
        }
    } else {
        if args.sparsities.is_some() {
            return Err(CliError::config("--l-per-component requires --deflate"));
        }
        let l = args.sparsity.ok_or_else(|| CliError::config("--l is required"))?;
        let cfg = SpcavrpConfig::new(groups, group_size, l)
            .with_proj_dim(args.proj_dim.unwrap_or(l))
            .with_components(args.components.unwrap_or(1))
            .with_seed(args.seed)
            .with_strategy(args.strategy.into())
            .exhaustive(args.exhaustive)
            .centered(args.center);
        cfg.validate(p)?;
        let strategy = cfg.resolved_strategy(n, p);
        let src = CovarianceSource::from_data(&x, strategy, cfg.center);
        let est = fit_source(&src, &cfg)?;
        FitOutput {
            algorithm: "rp",
            n,
            p,
            seed: args.seed,
            strategy,
            vectors: frame_columns(&est.vectors),
            support: est.support,
            supports: None,
            eigenvalues: est.eigenvalues,
            scores: serde_json::to_value(&est.scores).expect("serializable"),
            config: FitConfigEcho::Rp(cfg),
        }
    };
    write_json(&args.output, &output)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthFile {
    pub model: ModelSpec,
    pub n: usize,
    pub seed: u64,
    pub thetas: Vec<f64>,
    /// One dense array of length `p` per true component.
    pub vectors: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

fn model_from_flags(args: &SimulateArgs) -> CliResult<ModelSpec> {
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| CliError::config(format!("--{name} is required for this model")));
    let kind = args
        .model
        .ok_or_else(|| CliError::config("give --model or --model-spec"))?;
    Ok(match kind {
        ModelKind::SingleSpike => ModelSpec::SingleSpike {
            p: need(args.p, "p")?,
            k: need(args.k, "k")?,
            theta: args.theta.ok_or_else(|| CliError::config("--theta is required for this model"))?,
            profile: if args.linear { Profile::Linear } else { Profile::Homogeneous },
        },
        ModelKind::Sigma1 => ModelSpec::Sigma1 {
            p: need(args.p, "p")?,
            k: need(args.k, "k")?,
        },
        ModelKind::Sigma2 => ModelSpec::Sigma2 {
            p: need(args.p, "p")?,
            k: need(args.k, "k")?,
        },
        ModelKind::Intro => ModelSpec::Intro,
        ModelKind::TwoSpikeOverlapping => ModelSpec::TwoSpikeComparison { overlapping: true },
        ModelKind::TwoSpikeDisjoint => ModelSpec::TwoSpikeComparison { overlapping: false },
        ModelKind::BTradeoff => ModelSpec::BTradeoff,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = match &args.model_spec {
        Some(path) => read_json::<ModelSpec>(path)?,
        None => model_from_flags(args)?,
    };
    let model = spec.build()?;
    let x = crate::model::sample_gaussian(&model, args.n, args.seed)?;
    write_data_csv(&args.output, &x)?;

    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".truth.json");
        PathBuf::from(s)
    });
    let truth = model.truth();
    let file = TruthFile {
        thetas: model.spikes().iter().map(|s| s.theta).collect(),
        vectors: (0..truth.ncols()).map(|r| truth.column(r).iter().copied().collect()).collect(),
        support: model.support(),
        model: spec,
        n: args.n,
        seed: args.seed,
    };
    write_json(&truth_path, &file)
}

// ---------------------------------------------------------------- benchmark

/// One estimator arm of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: EstimatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Random projection estimator; `m > 1` gives the eigenspace variant.
    #[serde(alias = "eigenspace")]
    Rp {
        #[serde(rename = "A")]
        groups: usize,
        #[serde(rename = "B")]
        group_size: usize,
        #[serde(rename = "d", default)]
        proj_dim: Option<usize>,
        #[serde(rename = "l")]
        sparsity: usize,
        #[serde(rename = "m", default = "one")]
        components: usize,
        #[serde(default)]
        strategy: Strategy,
        #[serde(default)]
        exhaustive: bool,
    },
    Deflate {
        #[serde(rename = "A")]
        groups: usize,
        #[serde(rename = "B")]
        group_size: usize,
        #[serde(rename = "d", default)]
        proj_dim: Option<usize>,
        l_per_component: Vec<usize>,
        #[serde(default)]
        strategy: Strategy,
    },
    VanillaPca {
        #[serde(rename = "m", default = "one")]
        components: usize,
    },
    DiagonalThreshold {
        k: usize,
        #[serde(rename = "m", default = "one")]
        components: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkMode {
    /// One loss row per (estimator, n, rep).
    #[default]
    Loss,
    /// Explained variance over a grid of sparsity levels (random projection
    /// arms only).
    VarCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model_id: String,
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub mode: BenchmarkMode,
    /// Sparsity levels of the var-curve mode.
    #[serde(default)]
    pub l_grid: Vec<usize>,
    #[serde(default)]
    pub center: bool,
}

impl EstimatorKind {
    pub fn components(&self) -> usize {
        match self {
            EstimatorKind::Rp { components, .. }
            | EstimatorKind::VanillaPca { components }
            | EstimatorKind::DiagonalThreshold { components, .. } => *components,
            EstimatorKind::Deflate { l_per_component, .. } => l_per_component.len(),
        }
    }

    fn rp_config(&self, seed: u64) -> Option<SpcavrpConfig> {
        match *self {
            EstimatorKind::Rp {
                groups,
                group_size,
                proj_dim,
                sparsity,
                components,
                strategy,
                exhaustive,
            } => Some(
                SpcavrpConfig::new(groups, group_size, sparsity)
                    .with_proj_dim(proj_dim.unwrap_or(sparsity))
                    .with_components(components)
                    .with_seed(seed)
                    .with_strategy(strategy)
                    .exhaustive(exhaustive),
            ),
            _ => None,
        }
    }

    fn deflation_config(&self, seed: u64) -> Option<DeflationConfig> {
        match self {
            EstimatorKind::Deflate {
                groups,
                group_size,
                proj_dim,
                l_per_component,
                strategy,
            } => {
                let d = proj_dim.unwrap_or_else(|| l_per_component.iter().copied().max().unwrap_or(1));
                Some(
                    DeflationConfig::new(*groups, *group_size, d, l_per_component.clone())
                        .with_seed(seed)
                        .with_strategy(*strategy),
                )
            }
            _ => None,
        }
    }

    fn validate(&self, p: usize) -> crate::error::Result<()> {
        if let Some(cfg) = self.rp_config(0) {
            return cfg.validate(p);
        }
        if let Some(cfg) = self.deflation_config(0) {
            return cfg.validate(p);
        }
        let m = self.components();
        let cap = match *self {
            EstimatorKind::DiagonalThreshold { k, .. } => {
                if k == 0 || k > p {
                    return Err(crate::error::invalid(format!("k={k} must lie in 1..={p}")));
                }
                k
            }
            _ => p,
        };
        if m == 0 || m > cap {
            return Err(crate::error::invalid(format!("m={m} must lie in 1..={cap}")));
        }
        Ok(())
    }

    /// Strategy used for a sample of size `n`.
    fn strategy(&self, n: usize, p: usize) -> Strategy {
        match self {
            EstimatorKind::Rp { .. } => self.rp_config(0).expect("rp").resolved_strategy(n, p),
            EstimatorKind::Deflate { groups, group_size, strategy, .. } => match strategy {
                Strategy::Auto => {
                    let d = self.deflation_config(0).expect("deflate").proj_dim;
                    choose_strategy(n, p, *groups, *group_size, d)
                }
                s => *s,
            },
            _ => Strategy::Precomputed,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> CliResult<SpikedModel> {
        let model = self.model.build()?;
        let p = model.p();
        if self.reps == 0 {
            return Err(CliError::config("reps must be at least 1"));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(CliError::config("n_grid must be nonempty, positive and strictly increasing"));
        }
        if self.estimators.is_empty() {
            return Err(CliError::config("no estimators given"));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].iter().any(|f| f.id == e.id) {
                return Err(CliError::config(format!("duplicate estimator id {:?}", e.id)));
            }
            if e.id.contains([',', '"', '\n']) {
                return Err(CliError::config(format!("estimator id {:?} must not contain CSV delimiters", e.id)));
            }
            e.kind
                .validate(p)
                .map_err(|err| CliError::config(format!("estimator {:?}: {err}", e.id)))?;
            if e.kind.components() > model.spikes().len() {
                return Err(CliError::config(format!(
                    "estimator {:?} asks for {} components but the model has {}",
                    e.id,
                    e.kind.components(),
                    model.spikes().len()
                )));
            }
        }
        if self.model_id.contains([',', '"', '\n']) {
            return Err(CliError::config("model_id must not contain CSV delimiters"));
        }
        if self.mode == BenchmarkMode::VarCurve {
            if self.l_grid.is_empty() || self.l_grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::config("var-curve mode needs a strictly increasing l_grid"));
            }
            if let Some(&bad) = self.l_grid.iter().find(|&&l| l == 0 || l > p) {
                return Err(CliError::config(format!("l={bad} must lie in 1..={p}")));
            }
            if !self.estimators.iter().all(|e| matches!(e.kind, EstimatorKind::Rp { .. })) {
                return Err(CliError::config("var-curve mode only supports rp estimators"));
            }
        }
        Ok(model)
    }
}

/// Seed of the data set drawn for sample size `n` and repetition `rep`.
pub fn replicate_seed(master: u64, n: usize, rep: usize) -> u64 {
    derive_seed(master, &[DOMAIN_EXPERIMENT, n as u64, rep as u64])
}

/// One line of the loss table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model_id: String,
    pub estimator_id: String,
    pub n: usize,
    /// `None` for aggregate rows.
    pub rep: Option<usize>,
    pub loss: f64,
    pub support_recovery: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

pub const RESULT_HEADER: &str = "model_id,estimator_id,n,rep,loss,support_recovery,wall_time_seconds,seed";
pub const VAR_CURVE_HEADER: &str = "model_id,estimator_id,n,rep,l,var,seed";

struct Fitted {
    frame: OrthonormalFrame,
    support: Vec<usize>,
    scores: Option<crate::estimator::ImportanceScores>,
}

fn run_estimator(kind: &EstimatorKind, x: &DataMatrix, center: bool, seed: u64) -> crate::error::Result<(Fitted, CovarianceSource)> {
    let src = CovarianceSource::from_data(x, kind.strategy(x.n(), x.p()), center);
    let fitted = match kind {
        EstimatorKind::Rp { .. } => {
            let est = fit_source(&src, &kind.rp_config(seed).expect("rp"))?;
            Fitted {
                frame: est.vectors,
                support: est.support,
                scores: Some(est.scores),
            }
        }
        EstimatorKind::Deflate { .. } => {
            let res = deflate_source(&src, &kind.deflation_config(seed).expect("deflate"))?;
            let support = union_support(&res.components);
            Fitted {
                frame: res.components,
                support,
                scores: None,
            }
        }
        EstimatorKind::VanillaPca { components } => {
            let frame = vanilla_pca(&src, *components)?;
            let support = union_support(&frame);
            Fitted {
                frame,
                support,
                scores: None,
            }
        }
        EstimatorKind::DiagonalThreshold { k, components } => {
            let (support, frame) = diagonal_threshold(&src, *k, *components)?;
            Fitted {
                frame,
                support,
                scores: None,
            }
        }
    };
    Ok((fitted, src))
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs the experiment and returns the CSV document.
pub fn run_benchmark(spec: &ExperimentSpec, timing: bool) -> CliResult<String> {
    let model = spec.validate()?;
    let truth_all = model.truth();
    let cells: Vec<(usize, usize)> = spec
        .n_grid
        .iter()
        .flat_map(|&n| (0..spec.reps).map(move |rep| (n, rep)))
        .collect();

    match spec.mode {
        BenchmarkMode::Loss => {
            let rows: Vec<Vec<ResultRow>> = cells
                .par_iter()
                .map(|&(n, rep)| {
                    let seed = replicate_seed(spec.seed, n, rep);
                    let x = crate::model::sample_gaussian(&model, n, seed)?;
                    spec.estimators
                        .iter()
                        .map(|e| {
                            let m = e.kind.components();
                            let truth = OrthonormalFrame::new(truth_all.columns(0, m).into_owned())?;
                            let true_support: Vec<usize> = (0..truth_all.nrows())
                                .filter(|&j| (0..m).any(|r| truth_all[(j, r)] != 0.0))
                                .collect();
                            let start = Instant::now();
                            let (fitted, _) = run_estimator(&e.kind, &x, spec.center, seed)?;
                            let elapsed = start.elapsed().as_secs_f64();
                            Ok(ResultRow {
                                model_id: spec.model_id.clone(),
                                estimator_id: e.id.clone(),
                                n,
                                rep: Some(rep),
                                loss: subspace_loss(&fitted.frame, &truth)?,
                                support_recovery: support_metrics(&fitted.support, &true_support).recovery_rate,
                                wall_time_seconds: if timing { elapsed } else { 0.0 },
                                seed,
                            })
                        })
                        .collect::<crate::error::Result<Vec<_>>>()
                })
                .collect::<crate::error::Result<Vec<_>>>()?;
            let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
            Ok(render_results(spec, &rows))
        }
        BenchmarkMode::VarCurve => {
            // (estimator, n, rep, values over l_grid)
            let curves: Vec<Vec<(usize, usize, usize, u64, Vec<f64>)>> = cells
                .par_iter()
                .map(|&(n, rep)| {
                    let seed = replicate_seed(spec.seed, n, rep);
                    let x = crate::model::sample_gaussian(&model, n, seed)?;
                    spec.estimators
                        .iter()
                        .enumerate()
                        .map(|(i, e)| {
                            let (fitted, src) = run_estimator(&e.kind, &x, spec.center, seed)?;
                            let scores = fitted.scores.expect("rp arms carry scores");
                            let curve = var_curve(&scores, &src, &spec.l_grid)?;
                            Ok((i, n, rep, seed, curve.values))
                        })
                        .collect::<crate::error::Result<Vec<_>>>()
                })
                .collect::<crate::error::Result<Vec<_>>>()?;
            let curves: Vec<_> = curves.into_iter().flatten().collect();
            let mut out = String::new();
            out.push_str(VAR_CURVE_HEADER);
            out.push('\n');
            for (i, n, rep, seed, values) in &curves {
                for (l, v) in spec.l_grid.iter().zip(values) {
                    let _ = writeln!(out, "{},{},{n},{rep},{l},{},{seed}", spec.model_id, spec.estimators[*i].id, fmt_float(*v));
                }
            }
            for (i, e) in spec.estimators.iter().enumerate() {
                for &n in &spec.n_grid {
                    let cell: Vec<&Vec<f64>> = curves
                        .iter()
                        .filter(|c| c.0 == i && c.1 == n)
                        .map(|c| &c.4)
                        .collect();
                    for (t, l) in spec.l_grid.iter().enumerate() {
                        let mean = cell.iter().map(|v| v[t]).sum::<f64>() / cell.len() as f64;
                        let _ = writeln!(out, "{},{},{n},mean,{l},{},{}", spec.model_id, e.id, fmt_float(mean), spec.seed);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Mean of each (estimator, n) cell, in spec order.
pub fn aggregate_rows(spec: &ExperimentSpec, rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for e in &spec.estimators {
        for &n in &spec.n_grid {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.rep.is_some() && r.estimator_id == e.id && r.n == n)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let mean = |f: fn(&ResultRow) -> f64| cell.iter().map(|r| f(r)).sum::<f64>() / cell.len() as f64;
            out.push(ResultRow {
                model_id: spec.model_id.clone(),
                estimator_id: e.id.clone(),
                n,
                rep: None,
                loss: mean(|r| r.loss),
                support_recovery: mean(|r| r.support_recovery),
                wall_time_seconds: mean(|r| r.wall_time_seconds),
                seed: spec.seed,
            });
        }
    }
    out
}

fn render_results(spec: &ExperimentSpec, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULT_HEADER);
    out.push('\n');
    for r in rows.iter().chain(aggregate_rows(spec, rows).iter()) {
        let rep = r.rep.map_or_else(|| "mean".to_string(), |k| k.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{rep},{},{},{},{}",
            r.model_id,
            r.estimator_id,
            r.n,
            fmt_float(r.loss),
            fmt_float(r.support_recovery),
            fmt_float(r.wall_time_seconds),
            r.seed
        );
    }
    out
}

/// Parses a loss table produced by `benchmark`.
pub fn parse_results(text: &str) -> CliResult<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::input(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RESULT_HEADER {
        return Err(CliError::input("unexpected header"));
    }
    let bad = |line: u64| CliError::input(format!("line {line}: malformed result row"));
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| record[i].parse::<f64>().map_err(|_| bad(line));
        rows.push(ResultRow {
            model_id: record[0].to_string(),
            estimator_id: record[1].to_string(),
            n: record[2].parse().map_err(|_| bad(line))?,
            rep: match &record[3] {
                "mean" => None,
                s => Some(s.parse().map_err(|_| bad(line))?),
            },
            loss: num(4)?,
            support_recovery: num(5)?,
            wall_time_seconds: num(6)?,
            seed: record[7].parse().map_err(|_| bad(line))?,
        });
    }
    Ok(rows)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let spec: ExperimentSpec = read_json(&args.spec)?;
    let text = run_benchmark(&spec, !args.no_timing)?;
    write_file(&args.output, text.as_bytes())
}

// ---------------------------------------------------------------- choose-b

pub fn cmd_choose_b(args: &ChooseBArgs) -> CliResult<u64> {
    Ok(choose_b(args.t, args.d, args.k, args.p)?)
}

/// Loads the true components written by `simulate`.
pub fn read_truth(path: &Path) -> CliResult<TruthFile> {
    read_json(path)
}

/// Dense `p x m` matrix from per-component arrays.
pub fn columns_to_matrix(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let p = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(p, cols.len(), |j, r| cols[r][j])
}
