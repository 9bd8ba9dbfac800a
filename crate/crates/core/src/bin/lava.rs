//! `lava`: dataset distance, valuation, corruption and detection from the
//! command line. Exit codes: 0 success, 1 input error, 2 a solver stopped
//! short of its tolerance (outputs are still written).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lava::corruption;
use lava::dataset::{load_csv, LabeledDataset, MassPolicy};
use lava::detect::{self, default_budgets, detection_curve, distance_after_removal};
use lava::hierarchical::{dataset_distance, HybridCostConfig, MissingLabelPolicy};
use lava::oracle::{run_oracle_checks, OracleConfig};
use lava::ot::{GroundMetric, SolverConfig};
use lava::{calibrated_gradients, CorruptionRecord, Error};

#[derive(Parser, Debug)]
#[command(name = "lava", version, about = "Learning-agnostic data valuation with optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Class-wise Wasserstein distance between two datasets.
    Distance(PairArgs),
    /// Per-point values of the training set.
    Value(PairArgs),
    /// Apply a seeded corruption to a dataset.
    Corrupt(CorruptArgs),
    /// Detection-rate curve for a recorded corruption.
    Detect(DetectArgs),
    /// Exact / log-barrier / entropic cross-checks on generated fixtures.
    OracleCheck(OracleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Sinkhorn,
    ExactLp,
    LogBarrier,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MissingLabel {
    Error,
    ImputeMax,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Masses {
    Uniform,
    Column,
}

#[derive(Args, Debug, Serialize)]
struct SolverArgs {
    /// Entropic / barrier regularization in cost units (ignored by exact-lp).
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Weight of the label-distance term in the ground cost.
    #[arg(long, default_value_t = 1.0)]
    c_weight: f64,
    /// Weight of the feature-distance term in the ground cost.
    #[arg(long, default_value_t = 1.0)]
    feature_weight: f64,
    #[arg(long, value_enum, default_value_t = Mode::Sinkhorn)]
    mode: Mode,
    /// L1 marginal tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Use squared Euclidean distances as the feature cost.
    #[arg(long)]
    squared_cost: bool,
    /// What to do when a label occurs in only one dataset.
    #[arg(long, value_enum, default_value_t = MissingLabel::Error)]
    missing_label: MissingLabel,
    /// Uniform masses, or read them from the trailing `mass` column.
    #[arg(long, value_enum, default_value_t = Masses::Uniform)]
    masses: Masses,
}

impl SolverArgs {
    fn hybrid(&self) -> HybridCostConfig {
        let solver = match self.mode {
            Mode::Sinkhorn => SolverConfig::sinkhorn(self.epsilon),
            Mode::ExactLp => SolverConfig::exact(),
            Mode::LogBarrier => SolverConfig::log_barrier(self.epsilon),
        }
        .with_tol(self.tol)
        .with_max_iters(self.max_iters);
        HybridCostConfig {
            c_weight: self.c_weight,
            feature_weight: self.feature_weight,
            metric: if self.squared_cost { GroundMetric::SquaredEuclidean } else { GroundMetric::Euclidean },
            inner: solver,
            outer: solver,
            missing_label: match self.missing_label {
                MissingLabel::Error => MissingLabelPolicy::Error,
                MissingLabel::ImputeMax => MissingLabelPolicy::ImputeMax,
            },
        }
    }

    fn mass_policy(&self) -> MassPolicy {
        match self.masses {
            Masses::Uniform => MassPolicy::Uniform,
            Masses::Column => MassPolicy::Column,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct PairArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Mislabel,
    FeatureNoise,
    BackdoorTrigger,
    FeatureCollision,
    IrrelevantInjection,
}

#[derive(Args, Debug, Serialize)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Share of rows to corrupt (mislabel, feature-noise, backdoor-trigger).
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise standard deviation as a multiple of each column's std.
    #[arg(long, default_value_t = 1.0)]
    sigma_scale: f64,
    #[arg(long, default_value_t = 0)]
    target_label: usize,
    /// Comma-separated feature indices set by the trigger.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    patch_coords: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    patch_value: f64,
    /// Rows blended by feature-collision.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    base_label: usize,
    /// Comma-separated target point for feature-collision.
    #[arg(long, value_delimiter = ',')]
    blend_source: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Donor dataset for irrelevant-injection.
    #[arg(long)]
    donor: Option<PathBuf>,
    /// `label:count` pairs for irrelevant-injection, comma-separated.
    #[arg(long, value_delimiter = ',')]
    per_class: Vec<String>,
    #[arg(long, value_enum, default_value_t = Masses::Uniform)]
    masses: Masses,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DetectArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    /// Corruption record written by `lava corrupt`.
    #[arg(long)]
    record: PathBuf,
    /// Comma-separated removal budgets; ten steps up to n/2 by default.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    /// Also recompute the distance after each removal (`removal.csv`).
    #[arg(long)]
    removal_distance: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    /// Fixture side length.
    #[arg(long, default_value_t = 6)]
    size: usize,
    /// Log-barrier strength for the gap-recovery identity.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    fixtures: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Files to write once every computation has succeeded.
struct Output {
    dir: PathBuf,
    files: Vec<(&'static str, String)>,
    converged: bool,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new(), converged: true }
    }

    fn add(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    fn report(&mut self, command: &str, args: &impl Serialize, summary: Value) -> Result<(), Error> {
        let report = json!({
            "version": detect::version_string(),
            "command": command,
            "config": args,
            "converged": self.converged,
            "summary": summary,
        });
        self.add("report.json", serde_json::to_string_pretty(&report)?);
        Ok(())
    }

    fn write(self) -> Result<bool, Error> {
        std::fs::create_dir_all(&self.dir)?;
        for (name, contents) in &self.files {
            std::fs::write(self.dir.join(name), contents)?;
        }
        Ok(self.converged)
    }
}

fn load_pair(args: &PairArgs) -> Result<(LabeledDataset, LabeledDataset), Error> {
    let policy = args.solver.mass_policy();
    Ok((load_csv(&args.train, policy)?, load_csv(&args.valid, policy)?))
}

fn cmd_distance(args: &PairArgs) -> Result<Output, Error> {
    let (dt, dv) = load_pair(args)?;
    let result = dataset_distance(&dt, &dv, &args.solver.hybrid())?;
    let mut out = Output::new(&args.out);
    out.converged = result.converged();
    let distance = json!({
        "distance": result.distance,
        "solution": result.solution,
        "label_table": result.table,
        "train_manifest": dt.manifest(),
        "valid_manifest": dv.manifest(),
    });
    out.add("distance.json", serde_json::to_string_pretty(&distance)?);
    out.report("distance", args, json!({ "distance": result.distance }))?;
    Ok(out)
}

fn cmd_value(args: &PairArgs) -> Result<Output, Error> {
    let (dt, dv) = load_pair(args)?;
    let result = dataset_distance(&dt, &dv, &args.solver.hybrid())?;
    let report = calibrated_gradients(&result.solution);
    let mut out = Output::new(&args.out);
    out.converged = result.converged();
    out.add("values.csv", report.to_csv());
    out.report(
        "value",
        args,
        json!({ "distance": result.distance, "n": dt.len(), "provenance": report.provenance }),
    )?;
    Ok(out)
}

fn parse_per_class(pairs: &[String]) -> Result<BTreeMap<usize, usize>, Error> {
    pairs
        .iter()
        .map(|p| {
            let (l, c) = p
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("expected label:count, got {p:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number in {p:?}")))
            };
            Ok((parse(l)?, parse(c)?))
        })
        .collect()
}

fn cmd_corrupt(args: &CorruptArgs) -> Result<Output, Error> {
    let policy = match args.masses {
        Masses::Uniform => MassPolicy::Uniform,
        Masses::Column => MassPolicy::Column,
    };
    let ds = load_csv(&args.input, policy)?;
    let (corrupted, record) = match args.kind {
        Kind::Mislabel => corruption::mislabel(&ds, args.fraction, args.seed)?,
        Kind::FeatureNoise => corruption::feature_noise(&ds, args.fraction, args.sigma_scale, args.seed)?,
        Kind::BackdoorTrigger => corruption::backdoor_trigger(
            &ds,
            args.fraction,
            args.target_label,
            &args.patch_coords,
            args.patch_value,
            args.seed,
        )?,
        Kind::FeatureCollision => corruption::feature_collision(
            &ds,
            args.count,
            args.base_label,
            &args.blend_source,
            args.alpha,
            args.seed,
        )?,
        Kind::IrrelevantInjection => {
            let donor_path = args
                .donor
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("irrelevant-injection needs --donor".into()))?;
            let donor = load_csv(donor_path, MassPolicy::Uniform)?;
            corruption::irrelevant_injection(&ds, &donor, &parse_per_class(&args.per_class)?)?
        }
    };
    let mut out = Output::new(&args.out);
    out.add("corrupted.csv", corrupted.to_csv_string());
    out.add("record.json", record.to_json()?);
    out.report(
        "corrupt",
        args,
        json!({ "n": corrupted.len(), "corrupted": record.corrupted_indices.len() }),
    )?;
    Ok(out)
}

fn cmd_detect(args: &DetectArgs) -> Result<Output, Error> {
    let policy = args.solver.mass_policy();
    let dt = load_csv(&args.train, policy)?;
    let dv = load_csv(&args.valid, policy)?;
    let record = CorruptionRecord::from_json(&std::fs::read_to_string(&args.record)?)?;
    let budgets = if args.budgets.is_empty() { default_budgets(dt.len()) } else { args.budgets.clone() };
    let cfg = args.solver.hybrid();
    let result = dataset_distance(&dt, &dv, &cfg)?;
    let report = calibrated_gradients(&result.solution);
    let curve = detection_curve(&report, &record, &budgets)?;
    let mut out = Output::new(&args.out);
    out.converged = result.converged();
    out.add("curve.csv", curve.to_csv());
    let mut summary = json!({
        "distance": result.distance,
        "corruption_count": curve.corruption_count,
        "budgets": curve.budgets,
        "rates": curve.rates,
        "random_baseline": budgets.iter().map(|&b| detect::random_baseline_rate(b, dt.len())).collect::<Vec<_>>(),
    });
    if args.removal_distance {
        let removal_budgets: Vec<usize> = std::iter::once(0).chain(budgets.iter().copied()).collect();
        let distances = distance_after_removal(&dt, &dv, &report, &removal_budgets, &cfg)?;
        out.add("removal.csv", detect::distance_curve_csv(&removal_budgets, &distances));
        summary["removal_distances"] = json!(distances);
    }
    out.report("detect", args, summary)?;
    Ok(out)
}

fn cmd_oracle(args: &OracleArgs) -> Result<Output, Error> {
    let report = run_oracle_checks(&OracleConfig {
        size: args.size,
        epsilon: args.epsilon,
        seed: args.seed,
        fixtures: args.fixtures,
        ..Default::default()
    })?;
    let mut out = Output::new(&args.out);
    let passed = report.passed;
    out.report("oracle-check", args, serde_json::to_value(&report)?)?;
    if !passed {
        // Written first, then reported as a failure.
        out.write()?;
        return Err(Error::InvalidArgument("oracle checks failed, see report.json".into()));
    }
    Ok(out)
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("LAVA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("LAVA_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Usage errors are input errors; --help and --version are not.
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = || -> Result<bool, Error> {
        configure_threads()?;
        let out = match &cli.command {
            Command::Distance(a) => cmd_distance(a)?,
            Command::Value(a) => cmd_value(a)?,
            Command::Corrupt(a) => cmd_corrupt(a)?,
            Command::Detect(a) => cmd_detect(a)?,
            Command::OracleCheck(a) => cmd_oracle(a)?,
        };
        out.write()
    };
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: solver did not reach tolerance; outputs written");
            ExitCode::from(2)
        }
        Err(Error::NotConverged { residual, iterations }) => {
            eprintln!("error: solver did not converge (residual {residual:e} after {iterations} iterations)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
