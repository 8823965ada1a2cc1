use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmimo::experiment::{db_to_linear, run_experiment_with, ExperimentConfig, FronthaulProfile};
use cmimo::parse::{parse_bits_sweep, parse_rate_vector, parse_scheme_list};
use cmimo::schemes::EvaluationSummary;
use cmimo::{sample_instance, SchemeContext, SchemeId, SystemInstance, Topology};
use serde::Serialize;

/// Sum-distortion of compress-and-forward beamforming over a cascade of
/// radio remote units (RRUs). Rates are in bits per sample, SNR in dB and
/// distortions in units of the receiver noise power.
#[derive(Parser, Debug)]
#[command(name = "cmimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Monte Carlo sweep over the per-user bit budget B.
    Run(RunArgs),
    /// Evaluate one scheme on one sampled (or loaded) instance; prints JSON.
    EvalOne(EvalOneArgs),
    /// Check a JSON experiment config; prints it with defaults filled in.
    ValidateConfig(ValidateArgs),
    /// Write a sampled instance (channel, covariance, beamformer) as JSON.
    DumpInstance(DumpArgs),
}

#[derive(Args, Debug, Clone)]
struct TopologyArgs {
    /// Number of users
    #[arg(long, value_name = "N")]
    users: Option<usize>,
    /// Number of RRUs in the cascade
    #[arg(long, value_name = "L")]
    rrus: Option<usize>,
    /// Antennas per RRU
    #[arg(long, value_name = "A")]
    antennas: Option<usize>,
    /// Per-user transmit SNR in dB
    #[arg(long = "snr-db", value_name = "DB", allow_negative_numbers = true)]
    snr_db: Option<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Profile {
    /// R_l = users * B bits per sample on every link
    Balanced,
    /// R_l = l * users * B bits per sample on link l
    Increasing,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON experiment config; inline flags override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    topology: TopologyArgs,
    /// Fronthaul capacity profile
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Sweep of bits per user B, e.g. "0..15" or "0,2,4.5" (bits per sample)
    #[arg(long, value_name = "SWEEP", value_parser = |s: &str| parse_bits_sweep(s).map(Sweep))]
    bits: Option<Sweep>,
    /// Number of channel draws (positive)
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Base seed; trial t uses a seed derived from (seed, t)
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Comma-separated schemes out of SR, IR, IP, LOWER_BOUND
    #[arg(long, value_name = "LIST", value_parser = |s: &str| parse_scheme_list(s).map(Schemes))]
    schemes: Option<Schemes>,
    /// Levels per link in the SR/IR allocation search grid (at least 1)
    #[arg(long = "grid-steps", value_name = "G", value_parser = clap::value_parser!(u64).range(1..))]
    grid_steps: Option<u64>,
    /// Output file; results go to stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads; 0 uses all available cores
    #[arg(long, value_name = "N", default_value_t = 0)]
    workers: usize,
    /// Report completed trials on stderr
    #[arg(long)]
    progress: bool,
}

#[derive(Args, Debug)]
struct EvalOneArgs {
    /// Instance seed (ignored with --instance)
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    topology: TopologyArgs,
    /// Instance JSON written by dump-instance, used instead of sampling
    #[arg(long, value_name = "PATH", conflicts_with_all = ["users", "rrus", "antennas", "snr_db"])]
    instance: Option<PathBuf>,
    /// Fronthaul rates R_1,..,R_L in bits per sample, e.g. "30,30,30,30"
    #[arg(long = "rate-vector", value_name = "RATES", value_parser = |s: &str| parse_rate_vector(s).map(Rates))]
    rate_vector: Rates,
    /// Scheme: SR, IR (alias WZR), IP or LOWER_BOUND
    #[arg(long, value_name = "SCHEME", value_parser = parse_scheme)]
    scheme: SchemeId,
    /// Levels per link in the SR/IR allocation search grid (at least 1)
    #[arg(long = "grid-steps", value_name = "G", default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    grid_steps: u64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// JSON experiment config
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct DumpArgs {
    /// Instance seed
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    topology: TopologyArgs,
    /// Output file; the JSON goes to stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Sweep(Vec<f64>);

#[derive(Debug, Clone)]
struct Rates(Vec<f64>);

#[derive(Debug, Clone)]
struct Schemes(Vec<SchemeId>);

fn parse_scheme(s: &str) -> cmimo::Result<SchemeId> {
    s.parse()
}

enum Failure {
    /// Bad arguments or input files; exit code 2.
    Usage(String),
    /// Numerical or I/O failure while running; exit code 3.
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(runtime),
    }
}

impl TopologyArgs {
    fn build(&self) -> CliResult<Topology> {
        let base = ExperimentConfig::default().topology;
        let snr_db = self.snr_db.unwrap_or(10.0);
        Topology::new(
            self.users.unwrap_or(base.n_users),
            self.rrus.unwrap_or(base.n_rrus),
            self.antennas.unwrap_or(base.antennas_per_rru),
            db_to_linear(snr_db),
        )
        .map_err(usage)
    }
}

fn build_config(args: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::default(),
    };
    let t = &args.topology;
    if let Some(v) = t.users {
        cfg.topology.n_users = v;
    }
    if let Some(v) = t.rrus {
        cfg.topology.n_rrus = v;
    }
    if let Some(v) = t.antennas {
        cfg.topology.antennas_per_rru = v;
    }
    if let Some(v) = t.snr_db {
        cfg.snr_db = v;
    }
    if let Some(p) = args.profile {
        cfg.fh_profile = match p {
            Profile::Balanced => FronthaulProfile::Balanced,
            Profile::Increasing => FronthaulProfile::Increasing,
        };
    }
    if let Some(b) = &args.bits {
        cfg.bits_per_user_sweep = b.0.clone();
    }
    if let Some(n) = args.trials {
        cfg.n_trials = n as usize;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(s) = &args.schemes {
        cfg.schemes = s.0.clone();
    }
    if let Some(g) = args.grid_steps {
        cfg.grid_steps = g as usize;
    }
    cfg.sync_snr();
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let cfg = build_config(&args)?;
    let report = |done: usize, total: usize| eprintln!("trial {done}/{total}");
    let progress: Option<&(dyn Fn(usize, usize) + Sync)> = if args.progress { Some(&report) } else { None };
    let table = run_experiment_with(&cfg, args.workers, progress).map_err(runtime)?;
    let text = match args.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
    .map_err(runtime)?;
    emit(args.out.as_deref(), &text)?;
    if let Some(path) = &args.out {
        eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOneOutput<'a> {
    seed: Option<u64>,
    topology: &'a Topology,
    fronthaul: &'a [f64],
    zero_rate_distortion: f64,
    evaluation: EvaluationSummary,
}

fn cmd_eval_one(args: EvalOneArgs) -> CliResult<()> {
    let inst = match &args.instance {
        Some(path) => SystemInstance::from_json(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => sample_instance(&args.topology.build()?, args.seed).map_err(runtime)?,
    };
    if args.rate_vector.0.len() != inst.n_rrus() {
        return Err(usage(format!(
            "--rate-vector has {} entries but the cascade has {} RRUs",
            args.rate_vector.0.len(),
            inst.n_rrus()
        )));
    }
    let ctx = SchemeContext::new(&inst).map_err(runtime)?;
    let rates = &args.rate_vector.0;
    let g = args.grid_steps as usize;
    let eval = match args.scheme {
        SchemeId::StandardRouting => ctx.optimize_sr_allocation(rates, g),
        SchemeId::ImprovedRouting => ctx.optimize_ir_allocation(rates, g),
        SchemeId::InNetworkProcessing => ctx.eval_ip(rates),
        SchemeId::LowerBound => ctx.eval_lower_bound(rates),
    }
    .map_err(runtime)?;
    let out = EvalOneOutput {
        seed: inst.seed,
        topology: &inst.topology,
        fronthaul: rates,
        zero_rate_distortion: ctx.zero_rate_distortion(),
        evaluation: eval.summary(),
    };
    let text = serde_json::to_string_pretty(&out).map_err(runtime)?;
    emit(None, &(text + "\n"))
}

fn cmd_validate(args: ValidateArgs) -> CliResult<()> {
    let cfg = ExperimentConfig::from_json(&read_text(&args.config)?)
        .map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    emit(None, &(cfg.to_json().map_err(runtime)? + "\n"))
}

fn cmd_dump(args: DumpArgs) -> CliResult<()> {
    let inst = sample_instance(&args.topology.build()?, args.seed).map_err(runtime)?;
    emit(args.out.as_deref(), &(inst.to_json().map_err(runtime)? + "\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::EvalOne(a) => cmd_eval_one(a),
        Command::ValidateConfig(a) => cmd_validate(a),
        Command::DumpInstance(a) => cmd_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
