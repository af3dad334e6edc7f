//! The `spincat` command line: config loading, worker pool setup and the
//! subcommands that write simulation data.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::read_phase_points;
pub use config::{load_config, RunConfig};

use crate::error::Error;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNCONVERGED: i32 = 4;

/// Why a run stopped before writing its output.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StepSizeUnderflow { .. } | Error::NonFinite { .. } | Error::DegenerateBoundary(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spincat", version, about = "Spin cat dephasing, dissipative stabilization and mean-field synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact fidelity traces over detuning realizations with their mean.
    FreeDephasing(CommonArgs),
    /// Disorder-averaged closed-form fidelity and variance curves.
    Analytic(CommonArgs),
    /// Master-equation snapshots averaged over realizations.
    Lindblad(CommonArgs),
    /// Steady coherent amplitude versus squeezing strength.
    HpSweep(CommonArgs),
    /// Wigner function of the steady state.
    Wigner(CommonArgs),
    /// Full or reduced mean-field trajectory.
    MfTrajectory(CommonArgs),
    /// Synchronization phase diagram with a refined boundary.
    SyncSweep(CommonArgs),
    /// Elliptic fit of the boundary in a sync-sweep output file.
    EllipseFit(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::FreeDephasing(a) => ("free-dephasing", a),
            Command::Analytic(a) => ("analytic", a),
            Command::Lindblad(a) => ("lindblad", a),
            Command::HpSweep(a) => ("hp-sweep", a),
            Command::Wigner(a) => ("wigner", a),
            Command::MfTrajectory(a) => ("mf-trajectory", a),
            Command::SyncSweep(a) => ("sync-sweep", a),
            Command::EllipseFit(a) => ("ellipse-fit", a),
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON config, or an earlier output file whose echoed config is reused.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides `seeds.master_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (overrides `output_path`); standard output when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `worker_count`).
    #[arg(long)]
    workers: Option<usize>,
    /// Field overrides such as `params.eta=0.5`.
    #[arg(value_name = "FIELD=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
}

fn parse_override(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .ok_or_else(|| format!("`{raw}` is not of the form FIELD=VALUE"))
}

fn resolve_config(subcommand: &str, args: &CommonArgs) -> Result<RunConfig, Failure> {
    let text = config::read_config_text(&args.config).map_err(Failure::Config)?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(("seeds.master_seed".into(), seed.to_string()));
    }
    if let Some(out) = &args.out {
        let path = serde_json::to_string(&out.to_string_lossy()).expect("path serializes");
        overrides.push(("output_path".into(), path));
    }
    if let Some(w) = args.workers {
        overrides.push(("worker_count".into(), w.to_string()));
    }
    let mut config = load_config(&text, &overrides).map_err(Failure::Config)?;
    match &config.subcommand {
        Some(s) if s != subcommand => {
            return Err(Failure::Config(format!("config is for `{s}`, not `{subcommand}`")));
        }
        _ => config.subcommand = Some(subcommand.to_owned()),
    }
    config.params.validate()?;
    config.detuning.validate()?;
    config.seeds.validate()?;
    if let Some(g) = &config.grid {
        g.validate()?;
    }
    if config.worker_count == Some(0) {
        return Err(Failure::Config("worker_count must be at least 1".into()));
    }
    Ok(config)
}

fn execute(subcommand: &str, config: &RunConfig) -> Result<commands::Outcome, Failure> {
    match subcommand {
        "free-dephasing" => commands::free_dephasing(config),
        "analytic" => commands::analytic(config),
        "lindblad" => commands::lindblad(config),
        "hp-sweep" => commands::hp_sweep(config),
        "wigner" => commands::wigner_map(config),
        "mf-trajectory" => commands::mf_trajectory(config),
        "sync-sweep" => commands::sync_sweep(config),
        "ellipse-fit" => commands::ellipse_fit(config),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn run_parsed(subcommand: &str, args: &CommonArgs) -> Result<i32, Failure> {
    let config = resolve_config(subcommand, args)?;
    let workers = config
        .worker_count
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Io(format!("cannot start {workers} workers: {e}")))?;
    let outcome = pool.install(|| execute(subcommand, &config))?;
    match &config.output_path {
        Some(path) => output::write_atomic(path, outcome.contents.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(outcome.contents.as_bytes())
                .map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    if outcome.unconverged > 0 {
        eprintln!("spincat {subcommand}: {} unconverged point(s) flagged in the output", outcome.unconverged);
        return Ok(EXIT_UNCONVERGED);
    }
    Ok(EXIT_SUCCESS)
}

/// Run the command line given by `args` (program name first) and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_SUCCESS };
        }
    };
    let (subcommand, args) = cli.command.parts();
    match run_parsed(subcommand, args) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("spincat {subcommand}: {f}");
            f.exit_code()
        }
    }
}
