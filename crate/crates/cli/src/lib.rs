//! Command-line front end: argument model, dispatch and run manifests.
//!
//! Every subcommand is a pure function of its inputs, flags and seed. With
//! `--out DIR` the results are written there together with a
//! `manifest.json` that `pbrl replay` can re-execute.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use pbrl::bound::{
    bound_profile, full_bound_report, reduced_bound_report, subset_sum, BoundError,
    DEFAULT_ENUMERATION_CAP,
};
use pbrl::designer::{design, DesignConstraints, DesignError, Objective};
use pbrl::lifting::{lift_cpeg_ace, LiftError, LiftedCode, DEFAULT_ACE_DEPTH};
use pbrl::protomatrix::{Protomatrix, ProtomatrixError};
use pbrl::simulator::{parse_sweep, FerConfig, Harness, SimError, CSV_HEADER};
use pbrl::threshold::{threshold, threshold_profile, ThresholdError};
use pbrl::SCHEMA_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical or limit failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ProtomatrixError> for CliError {
    fn from(e: ProtomatrixError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Protomatrix(p) => p.into(),
            BoundError::SubsetSize { .. }
            | BoundError::BadColumn(_)
            | BoundError::NoPositiveRate { .. }
            | BoundError::EmptyInput => CliError::Input(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ThresholdError> for CliError {
    fn from(e: ThresholdError) -> Self {
        match e {
            ThresholdError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            ThresholdError::Protomatrix(p) => p.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Bound(b) => b.into(),
            DesignError::Threshold(t) => t.into(),
            DesignError::Protomatrix(p) => p.into(),
            DesignError::CoreBound(_) | DesignError::NoViableCandidate { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        match e {
            LiftError::NoAdmissibleShift { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::RankDeficient { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pbrl",
    version,
    about = "Design, bound, lift and simulate PBRL LDPC codes"
)]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum-distance upper bound of a protomatrix.
    Bound(BoundArgs),
    /// Greedy design of extension rows on top of a core.
    Design(DesignArgs),
    /// RCA decoding threshold.
    Threshold(ThresholdArgs),
    /// Quasi-cyclic lifting.
    Lift(LiftArgs),
    /// Monte Carlo frame error rates.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    pub file: PathBuf,
    /// Enumerate every column set.
    #[arg(long, conflicts_with = "reduced")]
    pub full: bool,
    /// Visit only the sets the raptor-like layout requires (default).
    #[arg(long)]
    pub reduced: bool,
    /// Bound of every rate-compatible prefix.
    #[arg(long, conflicts_with = "subset")]
    pub profile: bool,
    /// Restricted permanent sum of one 1-based column set, e.g. `1,2,3,4`.
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,
    /// Column-set limit for full enumeration.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u128,
    /// Directory for the result files and a replay manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Pbd,
    Threshold,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Pbd)]
    pub objective: ObjectiveArg,
    /// Extension rows to add.
    #[arg(long)]
    pub rows: usize,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Non-zeros per full row including the identity entry.
    #[arg(long, default_value_t = 4, conflicts_with = "free_weight")]
    pub row_weight: usize,
    /// Allow any row weight.
    #[arg(long)]
    pub free_weight: bool,
    #[arg(long, default_value_t = 1)]
    pub max_entry: u8,
    /// 1-based core columns every row must include.
    #[arg(long, value_delimiter = ',')]
    pub force: Vec<usize>,
    /// Directory for the result files and a replay manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    pub file: PathBuf,
    /// Threshold of every rate-compatible prefix.
    #[arg(long)]
    pub profile: bool,
    #[arg(long, default_value_t = pbrl::threshold::DEFAULT_TOL_DB)]
    pub tol_db: f64,
    #[arg(long, default_value_t = pbrl::threshold::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Directory for the result files and a replay manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    pub file: PathBuf,
    /// Lift factor N.
    #[arg(long)]
    pub factor: usize,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ACE_DEPTH)]
    pub ace_depth: usize,
    /// Directory for the result files and a replay manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Lifted code in the `qc` text format.
    pub code: PathBuf,
    /// Lines of `rate snr,snr,... stop max_frames`.
    pub sweep: PathBuf,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = pbrl::simulator::DEFAULT_BP_ITERATIONS)]
    pub max_iter: usize,
    #[arg(long, default_value_t = pbrl::simulator::DEFAULT_LLR_CLAMP)]
    pub clamp: f64,
    /// Directory for the result files and a replay manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the rerun here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub content: String,
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool_version: String,
    pub subcommand: String,
    /// Arguments after the program name, without `--workers` and `--out`.
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub outputs: Vec<PathBuf>,
}

/// What a command produced: named files, and the text for stdout.
pub struct Output {
    pub files: Vec<(String, String)>,
    pub stdout: String,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_protomatrix(path: &Path) -> Result<Protomatrix, CliError> {
    read(path)?
        .parse()
        .map_err(|e: ProtomatrixError| CliError::Input(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn cmd_bound(a: &BoundArgs) -> Result<Output, CliError> {
    let p = read_protomatrix(&a.file)?;
    let value = if let Some(cols) = &a.subset {
        let s = subset_sum(&p, cols)?;
        json!({ "schema": SCHEMA_VERSION, "columns": s.columns, "value": s.value })
    } else if a.profile {
        json!({ "schema": SCHEMA_VERSION, "profile": bound_profile(&p)? })
    } else {
        let (mode, report) = if a.full {
            ("full", full_bound_report(&p, a.cap)?)
        } else {
            ("reduced", reduced_bound_report(&p, None)?)
        };
        let mut v = json!({ "schema": SCHEMA_VERSION, "mode": mode });
        let extra = serde_json::to_value(report).expect("report serializes");
        v.as_object_mut()
            .unwrap()
            .extend(extra.as_object().unwrap().clone());
        v
    };
    let text = pretty(&value);
    Ok(Output {
        files: vec![("bound.json".into(), text.clone())],
        stdout: text,
    })
}

fn cmd_design(a: &DesignArgs) -> Result<Output, CliError> {
    let hrc = read_protomatrix(&a.file)?;
    let constraints = DesignConstraints {
        row_weight: (!a.free_weight).then_some(a.row_weight),
        max_entry: a.max_entry,
        forced_columns: a.force.iter().copied().collect(),
        num_irc_rows: a.rows,
    };
    let objective = match a.objective {
        ObjectiveArg::Pbd => Objective::Pbd,
        ObjectiveArg::Threshold => Objective::Threshold,
    };
    let record = design(&hrc, &constraints, objective, a.seed)?;
    let mut json = record.to_json();
    json.push('\n');
    Ok(Output {
        files: vec![
            ("design.json".into(), json.clone()),
            ("protomatrix.txt".into(), record.protomatrix.to_text()),
        ],
        stdout: json,
    })
}

fn cmd_threshold(a: &ThresholdArgs) -> Result<Output, CliError> {
    let p = read_protomatrix(&a.file)?;
    let value = if a.profile {
        json!({ "schema": SCHEMA_VERSION, "profile": threshold_profile(&p, a.tol_db, a.max_iter)? })
    } else {
        let t = threshold(&p, a.tol_db, a.max_iter)?;
        json!({
            "schema": SCHEMA_VERSION,
            "rate": p.rate()?.to_string(),
            "eb_n0_db": t.eb_n0_db,
            "converged": t.converged,
            "iterations_used": t.iterations_used,
        })
    };
    let text = pretty(&value);
    Ok(Output {
        files: vec![("threshold.json".into(), text.clone())],
        stdout: text,
    })
}

fn cmd_lift(a: &LiftArgs) -> Result<Output, CliError> {
    let p = read_protomatrix(&a.file)?;
    let code = lift_cpeg_ace(&p, a.factor, a.seed, a.ace_depth)?;
    let girth = code.girth();
    let report = pretty(&json!({
        "schema": SCHEMA_VERSION,
        "lift_factor": code.lift_factor(),
        "n": code.n(),
        "k": code.k(),
        "girth": girth,
    }));
    Ok(Output {
        files: vec![
            ("code.qc".into(), code.to_text()),
            ("code.alist".into(), code.expand().to_alist()),
            ("girth.json".into(), report.clone()),
        ],
        stdout: report,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let code: LiftedCode = read(&a.code)?
        .parse()
        .map_err(|e: LiftError| CliError::Input(format!("{}: {e}", a.code.display())))?;
    let sweep = parse_sweep(&read(&a.sweep)?)?;
    let harness = Harness::new(&code)?;
    let mut points = Vec::new();
    for line in &sweep {
        for &snr in &line.eb_n0_db {
            let cfg = FerConfig {
                stop: line.stop,
                max_frames: line.max_frames,
                max_iter: a.max_iter,
                seed: a.seed,
                clamp: a.clamp,
            };
            points.push(harness.fer_run(line.rate, snr, &cfg)?);
        }
    }
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.csv_row());
        csv.push('\n');
    }
    let json = pretty(&json!({ "schema": SCHEMA_VERSION, "points": points }));
    Ok(Output {
        files: vec![
            ("results.csv".into(), csv.clone()),
            ("results.json".into(), json),
        ],
        stdout: csv,
    })
}

/// Arguments as given, minus the flags that do not affect results.
fn replayable_args(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--workers" || a == "--out" {
            it.next();
        } else if a.starts_with("--workers=") || a.starts_with("--out=") {
        } else {
            out.push(a.clone());
        }
    }
    out
}

fn inputs_of(cmd: &Command) -> Vec<PathBuf> {
    match cmd {
        Command::Bound(a) => vec![a.file.clone()],
        Command::Design(a) => vec![a.file.clone()],
        Command::Threshold(a) => vec![a.file.clone()],
        Command::Lift(a) => vec![a.file.clone()],
        Command::Simulate(a) => vec![a.code.clone(), a.sweep.clone()],
        Command::Replay(a) => vec![a.manifest.clone()],
    }
}

fn out_of(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Bound(a) => a.out.as_ref(),
        Command::Design(a) => a.out.as_ref(),
        Command::Threshold(a) => a.out.as_ref(),
        Command::Lift(a) => a.out.as_ref(),
        Command::Simulate(a) => a.out.as_ref(),
        Command::Replay(a) => a.out.as_ref(),
    }
}

fn name_and_seed(cmd: &Command) -> (&'static str, Option<u64>) {
    match cmd {
        Command::Bound(_) => ("bound", None),
        Command::Design(a) => ("design", Some(a.seed)),
        Command::Threshold(_) => ("threshold", None),
        Command::Lift(a) => ("lift", Some(a.seed)),
        Command::Simulate(a) => ("simulate", Some(a.seed)),
        Command::Replay(_) => ("replay", None),
    }
}

fn execute(cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Bound(a) => cmd_bound(a),
        Command::Design(a) => cmd_design(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Lift(a) => cmd_lift(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match workers {
        None => f(),
        Some(0) => Err(CliError::Input("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Input(e.to_string()))?
            .install(f),
    }
}

fn write_outputs(dir: &Path, output: &Output, manifest: &mut RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for (name, content) in &output.files {
        let path = dir.join(name);
        fs::write(&path, content)?;
        manifest.outputs.push(path);
    }
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

/// Runs a parsed command line; `argv` is recorded in the manifest.
pub fn run(cli: Cli, argv: &[String]) -> Result<Output, CliError> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest, r.out.as_deref(), cli.workers);
    }
    let output = with_workers(cli.workers, || execute(&cli.command))?;
    if let Some(dir) = out_of(&cli.command) {
        let (name, seed) = name_and_seed(&cli.command);
        let inputs = inputs_of(&cli.command)
            .into_iter()
            .map(|path| {
                Ok(InputFile {
                    content: read(&path)?,
                    path,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let mut manifest = RunManifest {
            schema: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            subcommand: name.into(),
            args: replayable_args(argv),
            inputs,
            seed,
            workers: cli.workers,
            outputs: Vec::new(),
        };
        write_outputs(dir, &output, &mut manifest)?;
    }
    Ok(output)
}

/// Re-executes the command a manifest describes, after checking that its
/// input files still have the recorded contents.
pub fn replay(
    manifest: &Path,
    out: Option<&Path>,
    workers: Option<usize>,
) -> Result<Output, CliError> {
    let m: RunManifest = serde_json::from_str(&read(manifest)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest.display())))?;
    if m.schema != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "unsupported manifest schema {}",
            m.schema
        )));
    }
    for input in &m.inputs {
        if read(&input.path)? != input.content {
            return Err(CliError::Input(format!(
                "{} changed since the recorded run",
                input.path.display()
            )));
        }
    }
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let mut argv = vec!["pbrl".to_string()];
    argv.extend(m.args.iter().cloned());
    argv.push("--out".into());
    argv.push(dir.to_string_lossy().into_owned());
    if let Some(w) = workers.or(m.workers) {
        argv.push("--workers".into());
        argv.push(w.to_string());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Input(e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Input("a manifest cannot record a replay".into()));
    }
    run(cli, &argv)
}
