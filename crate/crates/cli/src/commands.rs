use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};

use slicewise_core::backends::{
    self, detect_backend, emit_submission_scripts, process_env, slurm_time, BackendKind, RunStatus,
};
use slicewise_core::netplan::{plan_transfer, NetworkPath};
use slicewise_core::resmodel::{calibrate_with_safety, load_samples_csv, speedup};
use slicewise_core::sim::{
    read_records_csv, read_summary, simulate as run_sim, summary_path, Scenario, SimSummary,
};
use slicewise_core::workflow::{load_dataset_manifest, plan_subject_workflow, PlanOptions};
use slicewise_core::{ChunkPlan, Error, GpuInventory, PlanMode, ResourceModel};

use crate::config::CliConfig;

/// A local run finished without completing every task.
#[derive(Debug)]
pub struct TaskFailure(pub String);

impl fmt::Display for TaskFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TaskFailure {}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn load_plan(path: &Path) -> Result<ChunkPlan> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let plan = ChunkPlan::from_json(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(plan)
}

pub fn plan(
    cfg: &CliConfig,
    dataset: &Path,
    model: &Path,
    mode: PlanMode,
    gpus: usize,
    overhead_s: u64,
    inventory: Option<&Path>,
) -> Result<()> {
    let manifest = load_dataset_manifest(dataset)?;
    let model = ResourceModel::load(model)?;
    let gpu_device = match inventory {
        Some(p) => {
            let inv = GpuInventory::load(p)?;
            let first = inv
                .entries
                .into_iter()
                .next()
                .ok_or_else(|| Error::Schema {
                    field: "entries".into(),
                    message: format!("{}: inventory lists no devices", p.display()),
                })?;
            Some(first.device)
        }
        None => None,
    };
    if mode == PlanMode::CpuSlice && gpus != 1 {
        warn!("--gpus is ignored in cpu mode");
    }
    let opts = PlanOptions {
        gpu_groups: gpus,
        overhead_s,
        gpu_device,
        ..PlanOptions::default()
    };
    let out = cfg
        .output_dir
        .as_deref()
        .expect("plan sets an output directory");
    // plan every subject before writing so a bad one leaves no partial output
    let plans = manifest
        .subjects
        .iter()
        .map(|s| plan_subject_workflow(s, mode, Some(&model), &opts))
        .collect::<Result<Vec<_>, _>>()?;
    for p in &plans {
        let path = out.join(format!("{}.plan.json", p.subject_id));
        write_file(&path, &p.to_json())?;
        for w in &p.warnings {
            warn!("{}: {w}", p.subject_id);
        }
        println!("{}\t{} tasks", path.display(), p.tasks.len());
    }
    Ok(())
}

pub fn emit(cfg: &CliConfig, plan_path: &Path) -> Result<()> {
    let plan = load_plan(plan_path)?;
    let backend = detect_backend(&process_env(), cfg.backend)?;
    if backend == BackendKind::Local {
        return Err(Error::InvalidArgument(
            "no batch system detected; pass --backend slurm or --backend sge".into(),
        )
        .into());
    }
    info!("emitting {backend} scripts for {}", plan.subject_id);
    let partition = cfg.partition.as_deref().expect("emit sets a partition");
    let outdir = cfg
        .output_dir
        .as_deref()
        .expect("emit sets an output directory");
    for path in emit_submission_scripts(&plan, backend, partition, outdir)? {
        println!("{}", path.display());
    }
    Ok(())
}

pub fn run_local(plan_path: &Path, cores: u64, mem_mb: u64) -> Result<()> {
    let plan = load_plan(plan_path)?;
    let report = backends::run_local(&plan, cores, mem_mb)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    match report.status {
        RunStatus::Complete => Ok(()),
        status => {
            let failed: Vec<&str> = report
                .records
                .iter()
                .filter(|r| r.exit_code != 0)
                .map(|r| r.task_id.as_str())
                .collect();
            Err(TaskFailure(format!(
                "{}: {status:?}; failed tasks: {}",
                plan.subject_id,
                failed.join(", ")
            ))
            .into())
        }
    }
}

pub fn calibrate(cfg: &CliConfig, samples: &Path, out: &Path) -> Result<()> {
    let samples = load_samples_csv(samples)?;
    let model = calibrate_with_safety(&samples, cfg.resource_safety)?;
    write_file(out, &model.to_json())?;
    println!(
        "mem_mb = {:.4} * data_mb + {:.4}\ntime_s = {:.4} * data_mb + {:.4}\nsafety = {}",
        model.mem_slope,
        model.mem_intercept,
        model.time_slope,
        model.time_intercept,
        model.safety_factor
    );
    Ok(())
}

pub fn simulate(scenario: &Path, out: &Path) -> Result<()> {
    let scenario = Scenario::load(scenario)?;
    let result = run_sim(&scenario)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let summary = result.write(out)?;
    println!("{}\n{}", out.display(), summary.display());
    print!("{}", render_summary(&result.summary(), None)?);
    Ok(())
}

fn summary_for(result: &Path) -> Result<(PathBuf, SimSummary)> {
    let name = result
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    if name.ends_with(".summary.json") {
        return Ok((result.to_owned(), read_summary(result)?));
    }
    let records = read_records_csv(result)?;
    let path = summary_path(result);
    let summary = read_summary(&path)?;
    if records.len() != summary.jobs {
        return Err(Error::Parse {
            path: path.clone(),
            message: format!(
                "summary counts {} jobs but {} has {}",
                summary.jobs,
                result.display(),
                records.len()
            ),
        }
        .into());
    }
    Ok((path, summary))
}

fn render_summary(s: &SimSummary, serial_baseline_s: Option<u64>) -> Result<String> {
    let mut out = format!(
        "jobs: {}\nmakespan: {} s ({})\nutilization: {:.1}%\n",
        s.jobs,
        s.makespan_s,
        slurm_time(s.makespan_s),
        100.0 * s.utilization
    );
    if let Some(base) = serial_baseline_s {
        let x = speedup(base as f64, s.makespan_s as f64)?;
        out += &format!("speedup: {}x\n", x.floor() as u64);
    }
    if !s.user_peaks.is_empty() {
        out += "user\tpeak_cores\tpeak_mem_mb\n";
        for (user, p) in &s.user_peaks {
            out += &format!("{user}\t{}\t{}\n", p.cores, p.mem_mb);
        }
    }
    Ok(out)
}

pub fn report(result: &Path, serial_baseline_s: Option<u64>) -> Result<()> {
    let (path, summary) = summary_for(result)?;
    info!("summary from {}", path.display());
    print!("{}", render_summary(&summary, serial_baseline_s)?);
    Ok(())
}

pub fn net_plan(
    cfg: &CliConfig,
    links: &Path,
    client_rate_mbps: f64,
    reserved_mbps: f64,
) -> Result<()> {
    let path = NetworkPath::load(links)?;
    let p = plan_transfer(&path, client_rate_mbps, cfg.transfer_safety, reserved_mbps)?;
    println!(
        "bottleneck: {} ({} Mbps)\nsaturates: {}\nrecommended rate: {} Mbps",
        p.bottleneck_link, p.bottleneck_mbps, p.saturates, p.recommended_rate_mbps
    );
    Ok(())
}
