//! Planning, sizing, script emission and simulation for split, compute, merge
//! batch workflows over sliced datasets.
//!
//! * [`workflow`] turns a dataset manifest into per-subject task DAGs.
//! * [`resmodel`] fits and applies linear memory/runtime predictors.
//! * [`backends`] detects the batch environment, writes submission scripts and runs plans locally.
//! * [`gpuplan`] counts logical devices and groups slices across them.
//! * [`sim`] replays job streams on a modeled cluster under FIFO or fair-share priority.
//! * [`netplan`] sizes bulk-transfer rate caps against a path bottleneck.

pub mod backends;
pub mod error;
pub mod gpuplan;
pub mod netplan;
pub mod resmodel;
pub mod sim;
pub mod workflow;

pub use error::{Error, Result};
pub use gpuplan::{GpuDeviceClass, GpuInventory};
pub use resmodel::{ResourceModel, ResourceSample};
pub use workflow::{
    ChunkPlan, DatasetManifest, PlanMode, ResourceRequest, SubjectImage, Task, TaskKind,
};
