//! `slicewise`: plan, emit, run, calibrate, simulate and report on sliced batch workflows.
//!
//! Exit codes: 0 success, 1 invalid input, 2 a local run did not complete, 3 I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::TaskFailure;
use slicewise_core::backends::BackendKind;
use slicewise_core::PlanMode;

#[derive(Debug, Parser)]
#[command(
    name = "slicewise",
    version,
    about = "Split, compute, merge planning for batch clusters"
)]
struct Cli {
    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Cpu,
    Gpu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Auto,
    Slurm,
    Sge,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one plan JSON per subject of a dataset manifest.
    Plan {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Devices to spread each subject over in gpu mode.
        #[arg(long, default_value_t = 1)]
        gpus: usize,
        #[arg(long, default_value_t = slicewise_core::workflow::DEFAULT_OVERHEAD_S)]
        overhead_s: u64,
        /// Device inventory; the first entry times gpu-mode chunks.
        #[arg(long)]
        inventory: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write submission scripts for one plan.
    Emit {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
        #[arg(long)]
        partition: String,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Execute a plan on this machine within a core and memory budget.
    RunLocal {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        cores: u64,
        #[arg(long)]
        mem_mb: u64,
    },
    /// Fit a resource model from measured samples.
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = slicewise_core::resmodel::DEFAULT_SAFETY_FACTOR)]
        safety: f64,
    },
    /// Replay a scenario on a modeled cluster.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a simulation result.
    Report {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        serial_baseline_s: Option<u64>,
    },
    /// Recommend a client rate cap for a bulk transfer.
    NetPlan {
        #[arg(long)]
        links: PathBuf,
        #[arg(long)]
        client_rate_mbps: f64,
        #[arg(long, default_value_t = slicewise_core::netplan::DEFAULT_SAFETY_FRACTION)]
        safety: f64,
        #[arg(long, default_value_t = 0.0)]
        reserved_mbps: f64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<TaskFailure>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<slicewise_core::Error>() {
            return if e.is_io() { 3 } else { 1 };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = config::CliConfig {
        verbosity: cli.verbose,
        ..Default::default()
    };
    match cli.command {
        Command::Plan {
            dataset,
            model,
            mode,
            gpus,
            overhead_s,
            inventory,
            out,
        } => {
            cfg.output_dir = Some(out);
            let mode = match mode {
                ModeArg::Cpu => PlanMode::CpuSlice,
                ModeArg::Gpu => PlanMode::GpuGroup,
            };
            cfg.validate()?;
            commands::plan(
                &cfg,
                &dataset,
                &model,
                mode,
                gpus,
                overhead_s,
                inventory.as_deref(),
            )
        }
        Command::Emit {
            plan,
            backend,
            partition,
            outdir,
        } => {
            cfg.backend = match backend {
                BackendArg::Auto => None,
                BackendArg::Slurm => Some(BackendKind::Slurm),
                BackendArg::Sge => Some(BackendKind::Sge),
            };
            cfg.partition = Some(partition);
            cfg.output_dir = Some(outdir);
            cfg.validate()?;
            commands::emit(&cfg, &plan)
        }
        Command::RunLocal {
            plan,
            cores,
            mem_mb,
        } => {
            cfg.validate()?;
            commands::run_local(&plan, cores, mem_mb)
        }
        Command::Calibrate {
            samples,
            out,
            safety,
        } => {
            cfg.resource_safety = safety;
            cfg.validate()?;
            commands::calibrate(&cfg, &samples, &out)
        }
        Command::Simulate { scenario, out } => {
            cfg.validate()?;
            commands::simulate(&scenario, &out)
        }
        Command::Report {
            result,
            serial_baseline_s,
        } => {
            cfg.validate()?;
            commands::report(&result, serial_baseline_s)
        }
        Command::NetPlan {
            links,
            client_rate_mbps,
            safety,
            reserved_mbps,
        } => {
            cfg.transfer_safety = safety;
            cfg.validate()?;
            commands::net_plan(&cfg, &links, client_rate_mbps, reserved_mbps)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
