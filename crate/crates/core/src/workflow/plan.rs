use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpuplan::{split_slices, GpuDeviceClass};
use crate::resmodel::{estimate, ResourceModel};

use super::types::{ChunkPlan, PlanMode, ResourceRequest, SubjectImage, Task, TaskKind};
use super::validate::validate_plan;

pub const DEFAULT_OVERHEAD_S: u64 = 60;
pub const DEFAULT_GPU_MEM_MB: u64 = 8192;
pub const STAGE_MEM_MB: u64 = 1024;

/// Command lines for each stage.
///
/// Placeholders: `{subject}`, `{ordinal}` (1-based compute ordinal), `{chunk}`
/// (comma-separated slice indices), `{first}` and `{last}` (chunk bounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandTemplates {
    pub split: String,
    pub compute: String,
    pub merge: String,
}

impl Default for CommandTemplates {
    fn default() -> Self {
        CommandTemplates {
            split: "slicewise-split {subject}".into(),
            compute: "slicewise-compute {subject} {chunk}".into(),
            merge: "slicewise-merge {subject}".into(),
        }
    }
}

fn render(template: &str, subject: &str, ordinal: Option<usize>, chunk: &[usize]) -> String {
    let joined = chunk
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let bound = |v: Option<&usize>| v.map(usize::to_string).unwrap_or_default();
    template
        .replace("{subject}", subject)
        .replace(
            "{ordinal}",
            &ordinal.map(|o| o.to_string()).unwrap_or_default(),
        )
        .replace("{chunk}", &joined)
        .replace("{first}", &bound(chunk.first()))
        .replace("{last}", &bound(chunk.last()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    /// Requested device groups in gpu-group mode; ignored for cpu-slice.
    pub gpu_groups: usize,
    /// Walltime for the split and merge stages.
    pub overhead_s: u64,
    pub gpu_mem_mb: u64,
    /// Timing source for gpu-group chunks; falls back to the CPU model when absent.
    pub gpu_device: Option<GpuDeviceClass>,
    pub commands: CommandTemplates,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            gpu_groups: 1,
            overhead_s: DEFAULT_OVERHEAD_S,
            gpu_mem_mb: DEFAULT_GPU_MEM_MB,
            gpu_device: None,
            commands: CommandTemplates::default(),
        }
    }
}

fn task_id(subject: &str, kind: TaskKind, ordinal: Option<usize>) -> String {
    match ordinal {
        Some(n) => format!("{subject}_{kind}_{n}"),
        None => format!("{subject}_{kind}"),
    }
}

/// Builds the split, compute, merge DAG for one subject.
pub fn plan_subject_workflow(
    subject: &SubjectImage,
    mode: PlanMode,
    model: Option<&ResourceModel>,
    options: &PlanOptions,
) -> Result<ChunkPlan> {
    let slice_count = subject.slice_count();
    if slice_count == 0 {
        return Err(Error::InvalidArgument(format!(
            "subject `{}` has no slices",
            subject.id
        )));
    }
    if options.gpu_mem_mb == 0 {
        return Err(Error::InvalidArgument("gpu memory must be >= 1 MB".into()));
    }
    if let Some(m) = model {
        m.validate()?;
    }
    let sid = subject.id.as_str();
    let mut warnings = Vec::new();

    let compute: Vec<Task> = match mode {
        PlanMode::CpuSlice => {
            let model = model.ok_or(Error::UncalibratedModel)?;
            subject
                .slices
                .iter()
                .enumerate()
                .map(|(i, slice)| {
                    let (mem_mb, time_s) = estimate(model, slice.data_mb);
                    let chunk = vec![slice.index];
                    Task {
                        id: task_id(sid, TaskKind::Compute, Some(i + 1)),
                        kind: TaskKind::Compute,
                        subject_id: sid.to_owned(),
                        command: render(&options.commands.compute, sid, Some(i + 1), &chunk),
                        chunk,
                        resources: ResourceRequest {
                            cores: 1,
                            mem_mb,
                            walltime_s: time_s,
                            gpus: 0,
                        },
                        estimate_s: Some(time_s),
                    }
                })
                .collect()
        }
        PlanMode::GpuGroup => {
            let requested = options.gpu_groups.max(1);
            let groups = if requested > slice_count {
                let msg = format!(
                    "gpu_groups {requested} exceeds {slice_count} slices; clamped to {slice_count}"
                );
                warn!("{sid}: {msg}");
                warnings.push(msg);
                slice_count
            } else {
                requested
            };
            let per_slice_gpu_s = options
                .gpu_device
                .as_ref()
                .map(|d| d.subject_time_s / slice_count as f64);
            if per_slice_gpu_s.is_none() && model.is_none() {
                return Err(Error::InvalidArgument(
                    "gpu-group mode needs a GPU device timing or a calibrated model".into(),
                ));
            }
            split_slices(slice_count, groups)?
                .into_iter()
                .enumerate()
                .map(|(g, range)| {
                    let chunk: Vec<usize> = range.collect();
                    let time_s = match (per_slice_gpu_s, model) {
                        (Some(per), _) => {
                            ((chunk.len() as f64 * per) - 1e-9).ceil().max(1.0) as u64
                        }
                        (None, Some(m)) => chunk
                            .iter()
                            .map(|&i| estimate(m, subject.slices[i].data_mb).1)
                            .sum(),
                        (None, None) => unreachable!(),
                    };
                    Task {
                        id: task_id(sid, TaskKind::Compute, Some(g + 1)),
                        kind: TaskKind::Compute,
                        subject_id: sid.to_owned(),
                        command: render(&options.commands.compute, sid, Some(g + 1), &chunk),
                        chunk,
                        resources: ResourceRequest {
                            cores: 1,
                            mem_mb: options.gpu_mem_mb,
                            walltime_s: time_s,
                            gpus: 1,
                        },
                        estimate_s: Some(time_s),
                    }
                })
                .collect()
        }
    };

    let stage = |kind: TaskKind, template: &str| {
        let walltime_s = options.overhead_s.max(1);
        Task {
            id: task_id(sid, kind, None),
            kind,
            subject_id: sid.to_owned(),
            chunk: Vec::new(),
            command: render(template, sid, None, &[]),
            resources: ResourceRequest {
                cores: 1,
                mem_mb: STAGE_MEM_MB,
                walltime_s,
                gpus: 0,
            },
            estimate_s: Some(options.overhead_s),
        }
    };
    let split = stage(TaskKind::Split, &options.commands.split);
    let merge = stage(TaskKind::Merge, &options.commands.merge);

    let mut edges = Vec::with_capacity(2 * compute.len());
    edges.extend(compute.iter().map(|c| (split.id.clone(), c.id.clone())));
    edges.extend(compute.iter().map(|c| (c.id.clone(), merge.id.clone())));

    let mut tasks = Vec::with_capacity(compute.len() + 2);
    tasks.push(split);
    tasks.extend(compute);
    tasks.push(merge);

    let mut plan = ChunkPlan {
        subject_id: sid.to_owned(),
        mode,
        slice_count,
        tasks,
        edges,
        warnings,
    };
    let wall = default_walltime(&plan)?;
    for t in plan
        .tasks
        .iter_mut()
        .filter(|t| t.kind == TaskKind::Compute)
    {
        t.resources.walltime_s = wall;
    }

    let violations = validate_plan(&plan);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations));
    }
    Ok(plan)
}

/// Longest compute walltime in the plan, used as the request for every compute task.
pub fn default_walltime(plan: &ChunkPlan) -> Result<u64> {
    plan.compute_tasks()
        .map(|t| t.resources.walltime_s)
        .max()
        .ok_or_else(|| Error::InvalidArgument("plan has no compute tasks".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::types::SliceInfo;

    fn subject(n: usize) -> SubjectImage {
        SubjectImage {
            id: "s1".into(),
            slices: (0..n)
                .map(|index| SliceInfo {
                    index,
                    data_mb: index as f64,
                })
                .collect(),
        }
    }

    fn model() -> ResourceModel {
        ResourceModel {
            mem_slope: 20.0,
            mem_intercept: 100.0,
            time_slope: 10.0,
            time_intercept: 10.0,
            safety_factor: 1.0,
        }
    }

    #[test]
    fn cpu_plan_for_full_subject() {
        let plan = plan_subject_workflow(
            &subject(145),
            PlanMode::CpuSlice,
            Some(&model()),
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.tasks.len(), 147);
        assert_eq!(plan.edges.len(), 290);
        assert_eq!(plan.tasks[0].id, "s1_split");
        assert_eq!(plan.tasks[1].id, "s1_compute_1");
        assert_eq!(plan.tasks[146].id, "s1_merge");
        // slice 144: 10 * 144 + 10
        let wall = 1450;
        for t in plan.compute_tasks() {
            assert_eq!(t.resources.walltime_s, wall);
            assert_eq!((t.resources.cores, t.resources.gpus), (1, 0));
        }
        assert_eq!(plan.tasks[1].resources.mem_mb, 100);
        assert_eq!(plan.tasks[1].estimate_s, Some(10));
        let split = &plan.tasks[0].resources;
        assert_eq!((split.cores, split.mem_mb, split.walltime_s), (1, 1024, 60));
    }

    #[test]
    fn single_slice_chain() {
        let plan = plan_subject_workflow(
            &subject(1),
            PlanMode::CpuSlice,
            Some(&model()),
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.tasks.len(), 3);
        assert_eq!(
            plan.edges,
            vec![
                ("s1_split".to_string(), "s1_compute_1".to_string()),
                ("s1_compute_1".to_string(), "s1_merge".to_string())
            ]
        );
    }

    #[test]
    fn gpu_groups_use_balanced_contiguous_chunks() {
        let opts = PlanOptions {
            gpu_groups: 4,
            ..PlanOptions::default()
        };
        let plan =
            plan_subject_workflow(&subject(10), PlanMode::GpuGroup, Some(&model()), &opts).unwrap();
        let sizes: Vec<_> = plan.compute_tasks().map(|t| t.chunk.len()).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        for t in plan.compute_tasks() {
            assert_eq!((t.resources.gpus, t.resources.mem_mb), (1, 8192));
        }
        assert_eq!(plan.compute_tasks().next().unwrap().chunk, vec![0, 1, 2]);
    }

    /// Every composition of 10 into 4 positive parts; only one is balanced and
    /// ordered largest-first.
    #[test]
    fn balanced_partition_is_unique() {
        let mut balanced = Vec::new();
        for a in 1..=7 {
            for b in 1..=7 {
                for c in 1..=7 {
                    let used = a + b + c;
                    if used >= 10 {
                        continue;
                    }
                    let d = 10 - used;
                    let parts = [a, b, c, d];
                    let spread = parts.iter().max().unwrap() - parts.iter().min().unwrap();
                    let ordered = parts.windows(2).all(|w| w[0] >= w[1]);
                    if spread <= 1 && ordered {
                        balanced.push(parts.to_vec());
                    }
                }
            }
        }
        assert_eq!(balanced, vec![vec![3, 3, 2, 2]]);
    }

    #[test]
    fn too_many_groups_are_clamped() {
        let opts = PlanOptions {
            gpu_groups: 9,
            ..PlanOptions::default()
        };
        let plan =
            plan_subject_workflow(&subject(3), PlanMode::GpuGroup, Some(&model()), &opts).unwrap();
        assert_eq!(plan.compute_tasks().count(), 3);
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn gpu_device_timing_drives_walltime() {
        let opts = PlanOptions {
            gpu_groups: 68,
            gpu_device: Some(GpuDeviceClass {
                model: "P100".into(),
                subject_time_s: 1800.0,
                logical_split: 1,
            }),
            ..PlanOptions::default()
        };
        let plan = plan_subject_workflow(&subject(145), PlanMode::GpuGroup, None, &opts).unwrap();
        // 3 slices * 1800/145 s, rounded up
        assert!(plan.compute_tasks().all(|t| t.resources.walltime_s == 38));
    }

    #[test]
    fn cpu_mode_needs_a_model() {
        let err = plan_subject_workflow(
            &subject(4),
            PlanMode::CpuSlice,
            None,
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UncalibratedModel));
    }

    #[test]
    fn commands_render_placeholders() {
        let opts = PlanOptions {
            gpu_groups: 2,
            commands: CommandTemplates {
                split: "split {subject}".into(),
                compute: "xfit {subject} {first}-{last} #{ordinal} [{chunk}]".into(),
                merge: "merge {subject}".into(),
            },
            ..PlanOptions::default()
        };
        let plan =
            plan_subject_workflow(&subject(5), PlanMode::GpuGroup, Some(&model()), &opts).unwrap();
        let cmds: Vec<_> = plan.compute_tasks().map(|t| t.command.as_str()).collect();
        assert_eq!(cmds, vec!["xfit s1 0-2 #1 [0,1,2]", "xfit s1 3-4 #2 [3,4]"]);
        assert_eq!(plan.tasks[0].command, "split s1");
    }

    fn with_walltimes(walls: &[u64]) -> ChunkPlan {
        let mut plan = plan_subject_workflow(
            &subject(walls.len()),
            PlanMode::CpuSlice,
            Some(&model()),
            &PlanOptions::default(),
        )
        .unwrap();
        for (t, &w) in plan
            .tasks
            .iter_mut()
            .filter(|t| t.kind == TaskKind::Compute)
            .zip(walls)
        {
            t.resources.walltime_s = w;
        }
        plan
    }

    #[test]
    fn default_walltime_examples() {
        assert_eq!(
            default_walltime(&with_walltimes(&[100, 300, 200])).unwrap(),
            300
        );
        assert_eq!(default_walltime(&with_walltimes(&[25200])).unwrap(), 25200);
        let mut walls = vec![9000; 145];
        walls[77] = 25200;
        assert_eq!(default_walltime(&with_walltimes(&walls)).unwrap(), 25200);

        let mut empty = with_walltimes(&[5]);
        empty.tasks.retain(|t| t.kind != TaskKind::Compute);
        assert!(default_walltime(&empty).is_err());
    }

    #[test]
    fn default_walltime_ignores_order_and_is_idempotent() {
        let mut plan = with_walltimes(&[4, 9, 1, 7]);
        let first = default_walltime(&plan).unwrap();
        plan.tasks[1..5].reverse();
        assert_eq!(default_walltime(&plan).unwrap(), first);
        assert_eq!(default_walltime(&plan).unwrap(), first);
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = plan_subject_workflow(
            &subject(3),
            PlanMode::CpuSlice,
            Some(&model()),
            &PlanOptions::default(),
        )
        .unwrap();
        let text = plan.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let task = &v["tasks"][1];
        for key in [
            "id",
            "kind",
            "chunk",
            "command",
            "cores",
            "mem_mb",
            "walltime_s",
            "gpus",
        ] {
            assert!(task.get(key).is_some(), "missing {key}");
        }
        assert_eq!(
            v["edges"][0],
            serde_json::json!(["s1_split", "s1_compute_1"])
        );
        assert_eq!(v["mode"], "cpu-slice");
        let back = ChunkPlan::from_json(&text).unwrap();
        assert_eq!(back, plan);
    }
}
