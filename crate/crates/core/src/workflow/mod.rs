//! Dataset manifests and the split, compute, merge task planner.

mod manifest;
mod plan;
mod types;
mod validate;

pub use manifest::{load_dataset_manifest, parse_dataset_manifest, validate_manifest};
pub use plan::{
    default_walltime, plan_subject_workflow, CommandTemplates, PlanOptions, DEFAULT_GPU_MEM_MB,
    DEFAULT_OVERHEAD_S, STAGE_MEM_MB,
};
pub use types::{
    ChunkPlan, DatasetManifest, PlanMode, ResourceRequest, SliceInfo, SubjectImage, Task, TaskKind,
};
pub use validate::validate_plan;
