//! Batch environment detection, submission script emission and local execution.

mod detect;
mod local;
mod scripts;

pub use detect::{detect_backend, process_env, BackendKind, BACKEND_ENV};
pub use local::{run_local, ExecutionReport, RunStatus, TaskRecord};
pub use scripts::{
    emit_submission_scripts, render_submission_scripts, sge_time, slurm_time,
    write_commands_manifest, COMMANDS_FILE, COMPUTE_PLACEHOLDER, COMPUTE_SCRIPT, MERGE_SCRIPT,
    SPLIT_PLACEHOLDER, SPLIT_SCRIPT, SUBMIT_SCRIPT,
};
