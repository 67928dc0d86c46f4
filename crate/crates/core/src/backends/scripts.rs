//! Commands manifest and batch submission scripts.
//!
//! Each plan becomes four files: `split.sh`, an array-job `compute.sh` that
//! reads its command line from `commands.txt`, and `merge.sh`. A
//! `submit_all.sh` driver submits them in order and substitutes the
//! `$SPLIT_JOB_ID` / `$COMPUTE_JOB_ID` placeholders with the real job ids.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::workflow::{validate_plan, ChunkPlan, ResourceRequest, Task, TaskKind};

use super::detect::BackendKind;

pub const COMMANDS_FILE: &str = "commands.txt";
pub const SPLIT_SCRIPT: &str = "split.sh";
pub const COMPUTE_SCRIPT: &str = "compute.sh";
pub const MERGE_SCRIPT: &str = "merge.sh";
pub const SUBMIT_SCRIPT: &str = "submit_all.sh";

pub const SPLIT_PLACEHOLDER: &str = "$SPLIT_JOB_ID";
pub const COMPUTE_PLACEHOLDER: &str = "$COMPUTE_JOB_ID";

/// One compute command per line, in ordinal order; line N is array index N.
pub fn write_commands_manifest(plan: &ChunkPlan) -> Result<String> {
    let mut out = String::new();
    for t in plan.compute_tasks() {
        if t.command.contains(['\n', '\r']) {
            return Err(Error::MultilineCommand { task: t.id.clone() });
        }
        out.push_str(&t.command);
        out.push('\n');
    }
    Ok(out)
}

/// `D-HH:MM:SS`.
pub fn slurm_time(seconds: u64) -> String {
    let (d, rem) = (seconds / 86_400, seconds % 86_400);
    format!(
        "{d}-{:02}:{:02}:{:02}",
        rem / 3600,
        rem % 3600 / 60,
        rem % 60
    )
}

/// `HH:MM:SS` with hours allowed past 24.
pub fn sge_time(seconds: u64) -> String {
    format!(
        "{:02}:{:02}:{:02}",
        seconds / 3600,
        seconds % 3600 / 60,
        seconds % 60
    )
}

enum Stage<'a> {
    Split(&'a Task),
    Compute { count: usize },
    Merge(&'a Task),
}

struct Job<'a> {
    name: String,
    resources: ResourceRequest,
    stage: Stage<'a>,
}

impl Job<'_> {
    fn array(&self) -> Option<usize> {
        match self.stage {
            Stage::Compute { count } => Some(count),
            _ => None,
        }
    }

    fn dependency(&self) -> Option<&'static str> {
        match self.stage {
            Stage::Split(_) => None,
            Stage::Compute { .. } => Some(SPLIT_PLACEHOLDER),
            Stage::Merge(_) => Some(COMPUTE_PLACEHOLDER),
        }
    }
}

fn slurm_script(job: &Job<'_>, partition: &str) -> String {
    let r = &job.resources;
    let mut s = String::from("#!/bin/bash\n");
    let _ = writeln!(s, "#SBATCH --job-name={}", job.name);
    let _ = writeln!(s, "#SBATCH --partition={partition}");
    let _ = writeln!(s, "#SBATCH --ntasks=1");
    let _ = writeln!(s, "#SBATCH --cpus-per-task={}", r.cores);
    let _ = writeln!(s, "#SBATCH --mem={}M", r.mem_mb);
    let _ = writeln!(s, "#SBATCH --time={}", slurm_time(r.walltime_s));
    if r.gpus > 0 {
        let _ = writeln!(s, "#SBATCH --gres=gpu:{}", r.gpus);
    }
    if let Some(n) = job.array() {
        let _ = writeln!(s, "#SBATCH --array=1-{n}");
    }
    if let Some(dep) = job.dependency() {
        let _ = writeln!(s, "#SBATCH --dependency=afterok:{dep}");
    }
    s.push_str("set -euo pipefail\n");
    body(&mut s, job, "SLURM_ARRAY_TASK_ID", "SLURM_SUBMIT_DIR");
    s
}

fn sge_script(job: &Job<'_>, partition: &str) -> String {
    let r = &job.resources;
    let mut s = String::from("#!/bin/bash\n");
    let _ = writeln!(s, "#$ -N {}", job.name);
    let _ = writeln!(s, "#$ -q {partition}");
    let _ = writeln!(s, "#$ -pe smp {}", r.cores);
    let _ = writeln!(s, "#$ -l h_vmem={}M", r.mem_mb);
    let _ = writeln!(s, "#$ -l h_rt={}", sge_time(r.walltime_s));
    if r.gpus > 0 {
        let _ = writeln!(s, "#$ -l gpu={}", r.gpus);
    }
    if let Some(n) = job.array() {
        let _ = writeln!(s, "#$ -t 1-{n}");
    }
    if let Some(dep) = job.dependency() {
        let _ = writeln!(s, "#$ -hold_jid {dep}");
    }
    s.push_str("set -euo pipefail\n");
    body(&mut s, job, "SGE_TASK_ID", "SGE_O_WORKDIR");
    s
}

fn body(s: &mut String, job: &Job<'_>, index_var: &str, dir_var: &str) {
    match job.stage {
        Stage::Split(t) | Stage::Merge(t) => {
            s.push_str(&t.command);
            s.push('\n');
        }
        Stage::Compute { .. } => {
            let _ = writeln!(
                s,
                "CMD=$(sed -n \"${{{index_var}}}p\" \"${{{dir_var}}}/{COMMANDS_FILE}\")"
            );
            s.push_str("eval \"$CMD\"\n");
        }
    }
}

fn submit_driver(backend: BackendKind, subject: &str) -> String {
    let (submit, trim) = match backend {
        BackendKind::Slurm => ("sbatch --parsable", ";"),
        _ => ("qsub -terse", "."),
    };
    let mut s = String::from("#!/bin/bash\n");
    let _ = writeln!(
        s,
        "# Submits split, compute array and merge for subject {subject}."
    );
    s.push_str("set -euo pipefail\ncd \"$(dirname \"$0\")\"\n");
    let _ = writeln!(s, "SPLIT_JOB_ID=$({submit} {SPLIT_SCRIPT})");
    let _ = writeln!(s, "SPLIT_JOB_ID=${{SPLIT_JOB_ID%%{trim}*}}");
    let _ = writeln!(
        s,
        "COMPUTE_JOB_ID=$(sed \"s/\\\\\\$SPLIT_JOB_ID/${{SPLIT_JOB_ID}}/\" {COMPUTE_SCRIPT} | {submit})"
    );
    let _ = writeln!(s, "COMPUTE_JOB_ID=${{COMPUTE_JOB_ID%%{trim}*}}");
    let _ = writeln!(
        s,
        "MERGE_JOB_ID=$(sed \"s/\\\\\\$COMPUTE_JOB_ID/${{COMPUTE_JOB_ID}}/\" {MERGE_SCRIPT} | {submit})"
    );
    let _ = writeln!(s, "MERGE_JOB_ID=${{MERGE_JOB_ID%%{trim}*}}");
    s.push_str("echo \"split=${SPLIT_JOB_ID} compute=${COMPUTE_JOB_ID} merge=${MERGE_JOB_ID}\"\n");
    s
}

fn check_partition(partition: &str) -> Result<()> {
    if partition.is_empty()
        || partition
            .chars()
            .any(|c| c.is_whitespace() || c.is_control())
    {
        return Err(Error::InvalidArgument(format!(
            "partition name `{partition}` must be nonempty without whitespace"
        )));
    }
    Ok(())
}

/// The largest request among the compute tasks; one array job must fit all of them.
fn array_request(plan: &ChunkPlan) -> ResourceRequest {
    plan.compute_tasks().fold(
        ResourceRequest {
            cores: 1,
            mem_mb: 1,
            walltime_s: 1,
            gpus: 0,
        },
        |acc, t| ResourceRequest {
            cores: acc.cores.max(t.resources.cores),
            mem_mb: acc.mem_mb.max(t.resources.mem_mb),
            walltime_s: acc.walltime_s.max(t.resources.walltime_s),
            gpus: acc.gpus.max(t.resources.gpus),
        },
    )
}

/// File name and content of every file `emit_submission_scripts` writes, in write order.
pub fn render_submission_scripts(
    plan: &ChunkPlan,
    backend: BackendKind,
    partition: &str,
) -> Result<Vec<(&'static str, String)>> {
    if backend == BackendKind::Local {
        return Err(Error::InvalidArgument(
            "the local backend has no submission scripts".into(),
        ));
    }
    check_partition(partition)?;
    let violations = validate_plan(plan);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations));
    }
    let manifest = write_commands_manifest(plan)?;
    for t in &plan.tasks {
        if t.kind != TaskKind::Compute && t.command.contains(['\n', '\r']) {
            return Err(Error::MultilineCommand { task: t.id.clone() });
        }
    }

    let split = plan.first_of(TaskKind::Split).expect("validated");
    let merge = plan.first_of(TaskKind::Merge).expect("validated");
    let jobs = [
        Job {
            name: split.id.clone(),
            resources: split.resources,
            stage: Stage::Split(split),
        },
        Job {
            name: format!("{}_compute", plan.subject_id),
            resources: array_request(plan),
            stage: Stage::Compute {
                count: plan.compute_tasks().count(),
            },
        },
        Job {
            name: merge.id.clone(),
            resources: merge.resources,
            stage: Stage::Merge(merge),
        },
    ];
    let render = |job: &Job<'_>| match backend {
        BackendKind::Slurm => slurm_script(job, partition),
        _ => sge_script(job, partition),
    };
    Ok(vec![
        (SPLIT_SCRIPT, render(&jobs[0])),
        (COMPUTE_SCRIPT, render(&jobs[1])),
        (MERGE_SCRIPT, render(&jobs[2])),
        (COMMANDS_FILE, manifest),
        (SUBMIT_SCRIPT, submit_driver(backend, &plan.subject_id)),
    ])
}

/// Writes the stage scripts, commands manifest and submit driver into `outdir`.
pub fn emit_submission_scripts(
    plan: &ChunkPlan,
    backend: BackendKind,
    partition: &str,
    outdir: &Path,
) -> Result<Vec<PathBuf>> {
    let files = render_submission_scripts(plan, backend, partition)?;
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = outdir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        if name.ends_with(".sh") {
            make_executable(&path)?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(unix)]
fn make_executable(path: &Path) -> Result<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))
        .map_err(|e| Error::io(path, e))
}

#[cfg(not(unix))]
fn make_executable(_: &Path) -> Result<()> {
    Ok(())
}
