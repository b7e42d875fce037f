//! `perturbkit` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.
//! Diagnostics go to stderr; data goes to `--output` (default stdout).
//! Whenever output goes to a file, the fully resolved arguments are written
//! next to it as `<output>.config.json` (`config.json` for directory outputs).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, ManifestRecord};
use crate::metrics::{self, EvalOptions, MissingPolicy, Scope};
use crate::model::{self, Split};
use crate::subsample::{self, BudgetSpec};
use crate::sweep::{self, GridSpec, LearningCurve, ResponderParams};
use crate::verification::{self, VerificationPolicy};

pub const SEED_ENV: &str = "PERTURBKIT_SEED";

#[derive(Debug, Parser, Serialize)]
#[command(name = "perturbkit", version, about = "Perturbation-cluster dataset tooling")]
pub struct Cli {
    /// Print the resolved configuration and progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Check dataset invariants; lists every violation.
    Validate(ValidateArgs),
    /// Question, label and cluster-size statistics.
    Stats(StatsArgs),
    /// Two-phase majority-vote filtering against annotation records.
    Verify(VerifyArgs),
    /// One budget-constrained subsample.
    Subsample(SubsampleArgs),
    /// Several independently seeded subsamples of the same budget point.
    Replicate(ReplicateArgs),
    /// Experiment grids.
    #[command(subcommand)]
    Grid(GridCommand),
    /// Metrics over external predictions.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Synthetic responder predictions.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum GridCommand {
    /// List the expanded grid points and their derived seeds.
    Plan(GridPlanArgs),
    /// Subsample every grid point into manifest files plus an index.
    Emit(GridEmitArgs),
    /// Aggregate external accuracy records per grid point.
    Collect(GridCollectArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum EvalCommand {
    Accuracy(AccuracyArgs),
    Consensus(ConsensusArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArg {
    /// Output path; `-` for stdout.
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    /// Print a human-readable table to stdout.
    #[arg(long)]
    pub summary: bool,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    #[arg(short, long)]
    pub annotations: PathBuf,
    /// Filtered dataset.
    #[command(flatten)]
    pub out: OutputArg,
    /// Per-phase report CSV; defaults to stdout when the dataset goes to a file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-question outcome CSV.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub phase1_annotators: usize,
    #[arg(long, default_value_t = 3)]
    pub phase2_annotators: usize,
    /// Keep phase-1 labels as final.
    #[arg(long)]
    pub skip_phase2: bool,
    /// Verify seed questions too instead of exempting them.
    #[arg(long)]
    pub verify_seeds: bool,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct BudgetArgs {
    /// Total budget in new-question units.
    #[arg(long = "b", visible_alias = "budget")]
    pub b: f64,
    /// Maximum instances per cluster.
    #[arg(long = "c", visible_alias = "max-cluster-size")]
    pub c: usize,
    /// Perturbation cost ratio in [0, 1].
    #[arg(long = "r", visible_alias = "cost-ratio")]
    pub r: f64,
    #[arg(long, default_value_t = 0.55)]
    pub target_yes_fraction: f64,
    #[arg(long, default_value_t = 0.02)]
    pub ratio_tolerance: f64,
    /// Allow selections without the cluster's seed.
    #[arg(long)]
    pub no_seed_required: bool,
}

impl BudgetArgs {
    fn spec(&self, seed: u64) -> BudgetSpec {
        BudgetSpec {
            b: self.b,
            c: self.c,
            r: self.r,
            target_yes_fraction: self.target_yes_fraction,
            ratio_tolerance: self.ratio_tolerance,
            seed,
            always_include_seed: !self.no_seed_required,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SubsampleArgs {
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Also write the selected instances as a dataset.
    #[arg(long)]
    pub dataset_out: Option<PathBuf>,
    #[arg(long)]
    pub summary: bool,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplicateArgs {
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value_t = 5)]
    pub replicas: u32,
    /// Base seed; replica i uses a seed derived from (seed, i).
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV: experiment_id, replica, b, c, r, realized_cost, C, N, yes_fraction.
    #[arg(long)]
    pub summary_csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Grid spec file (TOML: b, c, r, n_replicas, base_seed).
    #[arg(short, long)]
    pub grid: PathBuf,
    /// Overrides base_seed from the grid file.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

impl GridArgs {
    fn load(&self) -> Result<GridSpec> {
        let mut spec = GridSpec::from_file(&self.grid)?;
        if let Some(seed) = self.seed {
            spec.base_seed = seed;
        }
        Ok(spec)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GridPlanArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct GridEmitArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(short, long, alias = "dataset")]
    pub input: PathBuf,
    /// Receives manifests/, index.csv and config.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GridCollectArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Result records (experiment_id, replica, eval_set, accuracy).
    #[arg(long)]
    pub results: PathBuf,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub dataset: PathBuf,
    #[arg(short, long)]
    pub predictions: PathBuf,
    /// Restrict to one split.
    #[arg(long)]
    pub split: Option<String>,
    /// Count missing predictions as incorrect instead of failing.
    #[arg(long)]
    pub missing_as_incorrect: bool,
}

impl EvalArgs {
    fn options(&self) -> Result<EvalOptions> {
        let scope = match &self.split {
            Some(s) => Scope::Split(s.parse::<Split>().map_err(Error::Param)?),
            None => Scope::All,
        };
        let missing = if self.missing_as_incorrect {
            MissingPolicy::Incorrect
        } else {
            MissingPolicy::Error
        };
        Ok(EvalOptions { scope, missing })
    }

    fn scope_name(&self) -> &str {
        self.split.as_deref().unwrap_or("all")
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AccuracyArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(short, long, num_args = 1.., required = true)]
    pub k: Vec<usize>,
    /// Per-cluster CSV: k, cluster_id, n, m, score, score_exact.
    #[arg(long)]
    pub per_cluster: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Evaluation dataset to answer.
    #[arg(short, long)]
    pub dataset: PathBuf,
    /// Training manifest; its realized N drives the learning curve.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Which record of a multi-record manifest file to use.
    #[arg(long, default_value_t = 0)]
    pub manifest_index: usize,
    #[arg(long, default_value_t = 0.9)]
    pub p_mastered: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_unmastered: f64,
    #[arg(long, default_value_t = 0.6)]
    pub mastery: f64,
    /// Learning curve `a,beta,alpha` for mastery(N) = clamp(a - beta * N^-alpha).
    #[arg(long, value_parser = parse_curve)]
    pub curve: Option<(f64, f64, f64)>,
    #[arg(long, default_value_t = 1.0)]
    pub curve_weight: f64,
    /// Within-cluster correlation in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArg,
}

fn parse_curve(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [a, beta, alpha] => Ok((a, beta, alpha)),
        _ => Err("expected three comma-separated numbers a,beta,alpha".into()),
    }
}

/// Parses `argv` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.verbose > 0 {
        if let Ok(json) = serde_json::to_string(&cli) {
            eprintln!("config: {json}");
        }
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn companion_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(OsString::from).unwrap_or_default();
    name.push(".config.json");
    output.with_file_name(name)
}

fn write_config(cli: &Cli, path: &Path) -> Result<()> {
    let mut w = io::create_output(path)?;
    serde_json::to_writer_pretty(&mut w, cli).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes the companion config for each file output.
fn record_config(cli: &Cli, outputs: &[&Path]) -> Result<()> {
    for out in outputs.iter().filter(|p| !is_stdout(p)) {
        write_config(cli, &companion_path(out))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => validate(cli, a),
        Command::Stats(a) => stats(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Subsample(a) => subsample_cmd(cli, a),
        Command::Replicate(a) => replicate_cmd(cli, a),
        Command::Grid(GridCommand::Plan(a)) => grid_plan(cli, a),
        Command::Grid(GridCommand::Emit(a)) => grid_emit(cli, a),
        Command::Grid(GridCommand::Collect(a)) => grid_collect(cli, a),
        Command::Eval(EvalCommand::Accuracy(a)) => eval_accuracy(cli, a),
        Command::Eval(EvalCommand::Consensus(a)) => eval_consensus(cli, a),
        Command::Simulate(a) => simulate(cli, a),
    }
}

fn validate(cli: &Cli, a: &ValidateArgs) -> Result<()> {
    let ds = io::read_dataset_unvalidated(io::open_input(&a.input)?)?;
    let report = ds.validate();
    let mut w = io::csv_writer(io::create_output(&a.out.output)?);
    w.write_record(["violation"])?;
    for v in &report.violations {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    record_config(cli, &[&a.out.output])?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::Invalid(report))
    }
}

/// Columns: scope, n_questions, n_yes, n_no, n_clusters, mean_cluster_size,
/// median_cluster_size.
pub fn write_stats_csv<W: Write>(stats: &model::DatasetStats, writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record([
        "scope",
        "n_questions",
        "n_yes",
        "n_no",
        "n_clusters",
        "mean_cluster_size",
        "median_cluster_size",
    ])?;
    let rows = std::iter::once(("all", &stats.overall)).chain(stats.per_split.iter().map(|(s, c)| (s.as_str(), c)));
    for (scope, c) in rows {
        w.write_record([
            scope.to_string(),
            c.n_questions.to_string(),
            c.n_yes.to_string(),
            c.n_no.to_string(),
            c.n_clusters.to_string(),
            io::sig6(c.mean_cluster_size),
            io::sig6(c.median_cluster_size),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table in the layout of the usual dataset summary.
pub fn format_stats_table(stats: &model::DatasetStats) -> String {
    let mut cols: Vec<(&str, &model::Counts)> = vec![("Full", &stats.overall)];
    for (split, counts) in &stats.per_split {
        cols.push((
            match split {
                Split::Train => "Train",
                Split::Dev => "Dev",
                Split::Test => "Test",
            },
            counts,
        ));
    }
    let group = |n: usize| {
        let s = n.to_string();
        let mut out = String::new();
        for (i, ch) in s.chars().enumerate() {
            if i > 0 && (s.len() - i).is_multiple_of(3) {
                out.push(',');
            }
            out.push(ch);
        }
        out
    };
    let rows: Vec<(&str, Vec<String>)> = vec![
        (
            "# of questions",
            cols.iter().map(|(_, c)| group(c.n_questions)).collect(),
        ),
        (
            "# of \"yes\" questions",
            cols.iter().map(|(_, c)| group(c.n_yes)).collect(),
        ),
        (
            "# of \"no\" questions",
            cols.iter().map(|(_, c)| group(c.n_no)).collect(),
        ),
        ("# of clusters", cols.iter().map(|(_, c)| group(c.n_clusters)).collect()),
        (
            "average cluster size",
            cols.iter()
                .map(|(_, c)| format!("{:.1}", c.mean_cluster_size))
                .collect(),
        ),
        (
            "median cluster size",
            cols.iter()
                .map(|(_, c)| format!("{:.1}", c.median_cluster_size))
                .collect(),
        ),
    ];
    let mut out = format!("{:<24}", "Measure");
    for (name, _) in &cols {
        out.push_str(&format!("{name:>10}"));
    }
    out.push('\n');
    for (label, values) in rows {
        out.push_str(&format!("{label:<24}"));
        for v in values {
            out.push_str(&format!("{v:>10}"));
        }
        out.push('\n');
    }
    out
}

fn stats(cli: &Cli, a: &StatsArgs) -> Result<()> {
    let ds = io::read_dataset_file(&a.input)?;
    let stats = model::compute_stats(&ds)?;
    if a.summary && is_stdout(&a.out.output) {
        print!("{}", format_stats_table(&stats));
        return Ok(());
    }
    write_stats_csv(&stats, io::create_output(&a.out.output)?)?;
    if a.summary {
        print!("{}", format_stats_table(&stats));
    }
    record_config(cli, &[&a.out.output])
}

/// Columns: phase, total, kept, filtered_no_majority, filtered_cannot_infer,
/// filtered_disagreement, filtered_missing, label_flips.
pub fn write_verification_csv<W: Write>(report: &verification::VerificationReport, writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record([
        "phase",
        "total",
        "kept",
        "filtered_no_majority",
        "filtered_cannot_infer",
        "filtered_disagreement",
        "filtered_missing",
        "label_flips",
    ])?;
    let phases = std::iter::once((1, &report.phase1)).chain(report.phase2.as_ref().map(|p| (2, p)));
    for (phase, s) in phases {
        w.write_record([
            phase.to_string(),
            s.total.to_string(),
            s.kept.to_string(),
            s.filtered_no_majority.to_string(),
            s.filtered_cannot_infer.to_string(),
            s.filtered_disagreement.to_string(),
            s.filtered_missing.to_string(),
            s.label_flips.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<()> {
    let ds = io::read_dataset_file(&a.input)?;
    let annotations = io::read_annotations(io::open_input(&a.annotations)?)?;
    let policy = VerificationPolicy {
        phase1_annotators: a.phase1_annotators,
        phase2_annotators: a.phase2_annotators,
        require_phase2: !a.skip_phase2,
        exempt_seeds: !a.verify_seeds,
    };
    let (filtered, report) = verification::run_verification(&ds, &annotations, &policy)?;
    io::write_dataset(&filtered, io::create_output(&a.out.output)?)?;

    let report_path = match &a.report {
        Some(p) => Some(p.clone()),
        None if !is_stdout(&a.out.output) => Some(PathBuf::from("-")),
        None => None,
    };
    if let Some(p) = &report_path {
        write_verification_csv(&report, io::create_output(p)?)?;
    }
    if let Some(p) = &a.outcomes {
        let mut w = io::csv_writer(io::create_output(p)?);
        w.write_record(["question_id", "decision", "label", "reason"])?;
        for o in report.outcomes.values() {
            w.write_record([
                o.question_id.as_str(),
                if o.is_kept() { "keep" } else { "filter" },
                o.resolved_label.map(|l| l.as_str()).unwrap_or(""),
                &o.reason.to_string(),
            ])?;
        }
        w.flush()?;
    }
    for cid in &report.seed_lost {
        eprintln!("warning: cluster {cid} lost its seed; a perturbation was promoted");
    }
    if cli.verbose > 0 {
        eprintln!(
            "phase 1 yield {:.4}; {} cluster(s) emptied, {} reduced to singletons",
            report.phase1.yield_rate(),
            report.emptied.len(),
            report.degraded_to_singleton.len()
        );
    }
    let mut outputs: Vec<&Path> = vec![&a.out.output];
    outputs.extend(report_path.as_deref());
    outputs.extend(a.outcomes.as_deref());
    record_config(cli, &outputs)
}

fn warn_manifest(m: &subsample::SubsampleManifest) {
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
}

fn subsample_cmd(cli: &Cli, a: &SubsampleArgs) -> Result<()> {
    let ds = io::read_dataset_file(&a.input)?;
    let spec = a.budget.spec(a.seed);
    let manifest = subsample::subsample(&ds, &spec)?;
    warn_manifest(&manifest);
    let record = ManifestRecord::new(spec.experiment_id(), 0, &manifest);
    io::write_manifests(std::slice::from_ref(&record), io::create_output(&a.out.output)?)?;
    if let Some(p) = &a.dataset_out {
        io::write_dataset(&manifest.materialize(&ds), io::create_output(p)?)?;
    }
    if a.summary {
        eprintln!(
            "{}: N = {}, C = {}, cost = {} of {}, yes fraction = {:.4}",
            record.experiment_id,
            manifest.realized_n,
            manifest.realized_c_count,
            io::sig6(manifest.realized_cost),
            io::sig6(spec.b),
            manifest.realized_yes_fraction
        );
    }
    let mut outputs: Vec<&Path> = vec![&a.out.output];
    outputs.extend(a.dataset_out.as_deref());
    record_config(cli, &outputs)
}

fn replicate_cmd(cli: &Cli, a: &ReplicateArgs) -> Result<()> {
    let ds = io::read_dataset_file(&a.input)?;
    let spec = a.budget.spec(a.seed);
    let manifests = subsample::replicate(&ds, &spec, a.replicas, a.seed)?;
    let id = spec.experiment_id();
    let records: Vec<ManifestRecord> = manifests
        .iter()
        .enumerate()
        .map(|(i, m)| {
            warn_manifest(m);
            ManifestRecord::new(id.clone(), i as u32, m)
        })
        .collect();
    io::write_manifests(&records, io::create_output(&a.out.output)?)?;
    if let Some(p) = &a.summary_csv {
        sweep::write_manifest_summary_csv(&records, io::create_output(p)?)?;
    }
    let mut outputs: Vec<&Path> = vec![&a.out.output];
    outputs.extend(a.summary_csv.as_deref());
    record_config(cli, &outputs)
}

fn grid_plan(cli: &Cli, a: &GridPlanArgs) -> Result<()> {
    let spec = a.grid.load()?;
    let points = sweep::build_grid(&spec)?;
    let mut w = io::csv_writer(io::create_output(&a.out.output)?);
    w.write_record(["experiment_id", "replica", "b", "c", "r", "seed"])?;
    for p in &points {
        w.write_record([
            p.experiment_id.clone(),
            p.replica.to_string(),
            io::sig6(p.b),
            p.c.to_string(),
            io::sig6(p.r),
            p.seed.to_string(),
        ])?;
    }
    w.flush()?;
    record_config(cli, &[&a.out.output])
}

fn grid_emit(cli: &Cli, a: &GridEmitArgs) -> Result<()> {
    let spec = a.grid.load()?;
    let points = sweep::build_grid(&spec)?;
    let ds = io::read_dataset_file(&a.input)?;
    let rows = sweep::emit_manifests(&spec, &points, &ds, &a.out_dir)?;
    write_config(cli, &a.out_dir.join("config.json"))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} grid point(s) failed; see index.csv",
            rows.len()
        );
    }
    if cli.verbose > 0 {
        eprintln!("wrote {} manifest(s) to {}", rows.len() - failed, a.out_dir.display());
    }
    Ok(())
}

fn grid_collect(cli: &Cli, a: &GridCollectArgs) -> Result<()> {
    let spec = a.grid.load()?;
    let points = sweep::build_grid(&spec)?;
    let records = io::read_results(io::open_input(&a.results)?)?;
    let rows = sweep::collect_results(&points, &records)?;
    for row in rows.iter().filter(|r| !r.complete()) {
        eprintln!(
            "warning: {} / {}: {} of {} replicas",
            row.experiment_id, row.eval_set, row.replicas, row.expected_replicas
        );
    }
    sweep::write_aggregate_csv(&rows, io::create_output(&a.out.output)?)?;
    record_config(cli, &[&a.out.output])
}

fn load_eval(args: &EvalArgs) -> Result<(model::Dataset, metrics::PredictionSet, EvalOptions)> {
    let ds = io::read_dataset_file(&args.dataset)?;
    let preds = io::read_predictions(io::open_input(&args.predictions)?)?;
    Ok((ds, preds, args.options()?))
}

fn eval_accuracy(cli: &Cli, a: &AccuracyArgs) -> Result<()> {
    let (ds, preds, opts) = load_eval(&a.eval)?;
    let r = metrics::accuracy(&preds, &ds, &opts)?;
    let mut w = io::csv_writer(io::create_output(&a.out.output)?);
    w.write_record(["scope", "n", "correct", "missing", "accuracy"])?;
    w.write_record([
        a.eval.scope_name().to_string(),
        r.n_scored.to_string(),
        r.n_correct.to_string(),
        r.n_missing.to_string(),
        io::sig6(r.accuracy),
    ])?;
    w.flush()?;
    record_config(cli, &[&a.out.output])
}

/// Columns: k, cs, clusters_scored, clusters_skipped.
pub fn write_consensus_csv<W: Write>(curve: &[metrics::ConsensusReport], writer: W) -> Result<()> {
    let mut w = io::csv_writer(writer);
    w.write_record(["k", "cs", "clusters_scored", "clusters_skipped"])?;
    for r in curve {
        w.write_record([
            r.k.to_string(),
            io::sig6(r.cs_value),
            r.clusters_scored.to_string(),
            r.clusters_skipped_small.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn eval_consensus(cli: &Cli, a: &ConsensusArgs) -> Result<()> {
    let (ds, preds, opts) = load_eval(&a.eval)?;
    let curve = metrics::consensus_curve(&preds, &ds, &a.k, &opts)?;
    write_consensus_csv(&curve, io::create_output(&a.out.output)?)?;
    if let Some(p) = &a.per_cluster {
        let mut w = io::csv_writer(io::create_output(p)?);
        w.write_record(["k", "cluster_id", "n", "m", "score", "score_exact"])?;
        for r in &curve {
            for c in &r.per_cluster {
                w.write_record([
                    r.k.to_string(),
                    c.cluster_id.clone(),
                    c.n.to_string(),
                    c.m.to_string(),
                    io::sig6(num_traits::ToPrimitive::to_f64(&c.score).unwrap_or(f64::NAN)),
                    c.score.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    let mut outputs: Vec<&Path> = vec![&a.out.output];
    outputs.extend(a.per_cluster.as_deref());
    record_config(cli, &outputs)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let ds = io::read_dataset_file(&a.dataset)?;
    let manifest = match &a.manifest {
        Some(p) => {
            let records = io::read_manifests(io::open_input(p)?)?;
            let rec = records.get(a.manifest_index).ok_or_else(|| {
                Error::param(format!(
                    "manifest index {} out of range ({} record(s))",
                    a.manifest_index,
                    records.len()
                ))
            })?;
            Some(rec.to_manifest())
        }
        None => None,
    };
    let params = ResponderParams {
        p_mastered: a.p_mastered,
        p_unmastered: a.p_unmastered,
        mastery_base: a.mastery,
        learning_curve: a.curve.map(|(a, beta, alpha)| LearningCurve { a, beta, alpha }),
        curve_weight: a.curve_weight,
        rho: a.rho,
        seed: a.seed,
    };
    let preds = sweep::simulate_responder(&ds, &params, manifest.as_ref())?;
    io::write_predictions(&preds, io::create_output(&a.out.output)?)?;
    record_config(cli, &[&a.out.output])
}
