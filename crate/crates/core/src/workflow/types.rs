use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One 2-D plane of a subject image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceInfo {
    pub index: usize,
    /// Data volume in megabytes; zero for an all-mask slice.
    pub data_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectImage {
    pub id: String,
    pub slices: Vec<SliceInfo>,
}

impl SubjectImage {
    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset: String,
    pub subjects: Vec<SubjectImage>,
}

/// Cores, memory, walltime and devices requested for one batch job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceRequest {
    pub cores: u32,
    pub mem_mb: u64,
    pub walltime_s: u64,
    #[serde(default)]
    pub gpus: u32,
}

impl ResourceRequest {
    /// Describes the first field that breaks the positivity rules, if any.
    pub fn violation(&self) -> Option<&'static str> {
        if self.cores == 0 {
            Some("cores must be >= 1")
        } else if self.mem_mb == 0 {
            Some("mem_mb must be >= 1")
        } else if self.walltime_s == 0 {
            Some("walltime_s must be >= 1")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Split,
    Compute,
    Merge,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Split => "split",
            TaskKind::Compute => "compute",
            TaskKind::Merge => "merge",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a subject's slices are turned into compute tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanMode {
    /// One CPU task per slice.
    #[serde(rename = "cpu-slice")]
    CpuSlice,
    /// One GPU task per contiguous group of slices.
    #[serde(rename = "gpu-group")]
    GpuGroup,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::CpuSlice => "cpu-slice",
            PlanMode::GpuGroup => "gpu-group",
        })
    }
}

impl FromStr for PlanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "cpu" | "cpu-slice" => Ok(PlanMode::CpuSlice),
            "gpu" | "gpu-group" => Ok(PlanMode::GpuGroup),
            other => Err(Error::InvalidArgument(format!(
                "unknown plan mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
    /// Filled from the owning plan when read from a plan file.
    #[serde(skip)]
    pub subject_id: String,
    #[serde(default)]
    pub chunk: Vec<usize>,
    pub command: String,
    #[serde(flatten)]
    pub resources: ResourceRequest,
    /// Predicted runtime before walltime padding; equals `walltime_s` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_s: Option<u64>,
}

impl Task {
    /// Expected runtime: the model estimate when known, else the requested walltime.
    pub fn expected_runtime_s(&self) -> u64 {
        self.estimate_s.unwrap_or(self.resources.walltime_s)
    }
}

/// Task DAG for one subject: split, then compute chunks, then merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub subject_id: String,
    pub mode: PlanMode,
    /// Number of slices in the subject; compute chunks must partition `0..slice_count`.
    pub slice_count: usize,
    pub tasks: Vec<Task>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ChunkPlan {
    pub fn compute_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(|t| t.kind == TaskKind::Compute)
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn first_of(&self, kind: TaskKind) -> Option<&Task> {
        self.tasks.iter().find(|t| t.kind == kind)
    }

    /// Ids of the tasks `id` directly depends on.
    pub fn dependencies_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(_, to)| to == id)
            .map(|(from, _)| from.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut plan: ChunkPlan = serde_json::from_str(text)?;
        for t in &mut plan.tasks {
            t.subject_id.clone_from(&plan.subject_id);
        }
        Ok(plan)
    }
}
