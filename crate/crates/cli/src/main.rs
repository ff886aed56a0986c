//! `qpurify` — analytical tables and Monte Carlo experiments for
//! entanglement delivery over repeater chains.
//!
//! Exit codes: 0 success, 2 configuration/validation failure, 3 I/O
//! failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    apply_f0, apply_memory, parse_list, parse_policies, validate_common, IniFile, RunConfig,
};
use qpurify::Timestep;

/// A run failure with its exit code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qpurify",
    version,
    about = "Entanglement delivery policies over quantum repeater chains",
    after_help = "Values are resolved as defaults < --config file < flags."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit analytical tables: delta-table.csv, gain-grid.csv, delta-max.json
    Analyze(CommonArgs),
    /// Run one policy at one operating point: trials.csv, summary.json
    Simulate(CommonArgs),
    /// Delivery-rate surface over (policy, f_th, budget, hops): heatmap.csv
    Sweep(CommonArgs),
    /// Side-by-side policy comparison on fidelity-constrained delivery
    Compare(CommonArgs),
    /// Find the coherence time matching a target beneficial-gain fraction
    Calibrate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// INI-style configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per cell
    #[arg(long)]
    trials: Option<u64>,
    /// Hop count, or comma list for sweep/compare axes
    #[arg(long, value_name = "N[,N..]")]
    hops: Option<String>,
    /// Policy name(s): no-pur, sp, ps, delta-purify
    #[arg(long, value_name = "NAME[,NAME..]")]
    policy: Option<String>,
    /// Memory model kind: cmm, lmm, emm
    #[arg(long, value_name = "KIND")]
    memory: Option<String>,
    /// Coherence time in timesteps (lmm/emm)
    #[arg(long, value_name = "T")]
    t_coh: Option<f64>,
    /// Constant-memory lifetime in timesteps, or `inf`
    #[arg(long, value_name = "N|inf")]
    cutoff_tau: Option<String>,
    /// Initial link fidelity, or per-link comma list
    #[arg(long, value_name = "F[,F..]")]
    f0: Option<String>,
    /// Per-timestep generation probability
    #[arg(long)]
    pe: Option<f64>,
    /// Swap success probability
    #[arg(long)]
    ps: Option<f64>,
    /// Fidelity threshold(s)
    #[arg(long = "f-th", value_name = "F[,F..]")]
    f_th: Option<String>,
    /// Time budget(s) in timesteps
    #[arg(long, value_name = "N[,N..]")]
    budget: Option<String>,
    /// Per-trial simulation cutoff in timesteps
    #[arg(long)]
    cutoff: Option<Timestep>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid resolution for analytical tables
    #[arg(long, value_name = "N")]
    grid_res: Option<usize>,
    /// Write a per-trial event log (simulate only)
    #[arg(long)]
    debug_events: bool,
    /// Calibration target fraction
    #[arg(long)]
    target: Option<f64>,
    /// Calibration tolerance around the target
    #[arg(long)]
    tolerance: Option<f64>,
    /// Calibration sweep lower bound
    #[arg(long)]
    t_coh_min: Option<f64>,
    /// Calibration sweep upper bound
    #[arg(long)]
    t_coh_max: Option<f64>,
    /// Calibration sweep grid points
    #[arg(long)]
    t_coh_steps: Option<usize>,
}

impl CommonArgs {
    /// Defaults, then config file, then flags.
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            config::apply_file(&mut cfg, IniFile::load(path)?)?;
        }

        if let Some(seed) = self.seed {
            cfg.chain.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(hops) = &self.hops {
            let list: Vec<usize> = parse_list("--hops", hops)?;
            match list.as_slice() {
                [] => return Err(CliError::Config("--hops needs a value".into())),
                [one] => cfg.chain.hops = *one,
                _ => {
                    cfg.chain.hops = list[0];
                    cfg.hops_axis = list;
                }
            }
        }
        if let Some(policy) = &self.policy {
            cfg.policies = parse_policies("--policy", policy)?;
        }
        if let Some(pe) = self.pe {
            cfg.chain.p_e = pe;
        }
        if let Some(ps) = self.ps {
            cfg.chain.p_s = ps;
        }
        if let Some(cutoff) = self.cutoff {
            cfg.chain.cutoff = cutoff;
        }
        if let Some(f_th) = &self.f_th {
            cfg.f_th = parse_list("--f-th", f_th)?;
        }
        if let Some(budget) = &self.budget {
            cfg.budget = parse_list("--budget", budget)?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(grid_res) = self.grid_res {
            cfg.grid_res = grid_res;
        }
        if self.debug_events {
            cfg.debug_events = true;
        }
        if let Some(target) = self.target {
            cfg.target = target;
        }
        if let Some(tolerance) = self.tolerance {
            cfg.tolerance = tolerance;
        }
        if let Some(v) = self.t_coh_min {
            cfg.t_coh_min = v;
        }
        if let Some(v) = self.t_coh_max {
            cfg.t_coh_max = v;
        }
        if let Some(v) = self.t_coh_steps {
            cfg.t_coh_steps = v;
        }

        let cutoff_tau = match &self.cutoff_tau {
            None => None,
            Some(v) if v.eq_ignore_ascii_case("inf") => Some(None),
            Some(v) => {
                Some(Some(v.parse().map_err(|_| {
                    CliError::Config(format!("invalid --cutoff-tau `{v}`"))
                })?))
            }
        };
        let memory_kind = match &self.memory {
            None => None,
            Some(kind) => Some(match kind.to_ascii_lowercase().as_str() {
                "cmm" => "cmm",
                "lmm" => "lmm",
                "emm" => "emm",
                other => {
                    return Err(CliError::Config(format!(
                        "invalid --memory `{other}` (expected cmm, lmm, or emm)"
                    )))
                }
            }),
        };
        if memory_kind.is_some() || self.t_coh.is_some() || cutoff_tau.is_some() {
            apply_memory(&mut cfg, memory_kind, self.t_coh, cutoff_tau)?;
        }

        let f0_list = match &self.f0 {
            None => None,
            Some(v) => Some(parse_list("--f0", v)?),
        };
        apply_f0(&mut cfg, f0_list)?;

        validate_common(&cfg)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(args) => commands::analyze(&args.resolve()?),
        Command::Simulate(args) => commands::simulate(&args.resolve()?),
        Command::Sweep(args) => commands::sweep(&args.resolve()?),
        Command::Compare(args) => commands::compare(&args.resolve()?),
        Command::Calibrate(args) => commands::calibrate(&args.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
