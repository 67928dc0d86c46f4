//! Logical GPU device accounting, slice grouping and per-subject GPU timing.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A kind of accelerator board and how fast one logical device processes a subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuDeviceClass {
    pub model: String,
    /// Seconds one logical device needs for a whole subject.
    pub subject_time_s: f64,
    /// Logical devices exposed by one physical board (a K80 presents two).
    pub logical_split: u32,
}

impl GpuDeviceClass {
    pub fn validate(&self) -> Result<()> {
        if !(self.subject_time_s.is_finite() && self.subject_time_s > 0.0) {
            return Err(Error::schema("subject_time_s", "must be > 0"));
        }
        if self.logical_split == 0 {
            return Err(Error::schema("logical_split", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    #[serde(flatten)]
    pub device: GpuDeviceClass,
    pub board_count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GpuInventory {
    pub entries: Vec<InventoryEntry>,
}

impl GpuInventory {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let inv: GpuInventory = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        for e in &inv.entries {
            e.device.validate()?;
        }
        Ok(inv)
    }
}

/// Total logical devices: boards times their split factor, summed.
pub fn logical_devices(inv: &GpuInventory) -> u64 {
    inv.entries
        .iter()
        .map(|e| u64::from(e.board_count) * u64::from(e.device.logical_split))
        .sum()
}

/// Splits `0..slice_count` into `groups` contiguous ranges whose sizes differ by
/// at most one, larger ranges first.
pub fn split_slices(slice_count: usize, groups: usize) -> Result<Vec<Range<usize>>> {
    if slice_count == 0 || groups == 0 {
        return Err(Error::InvalidArgument(format!(
            "slice count and group count must be >= 1 (got {slice_count}, {groups})"
        )));
    }
    if groups > slice_count {
        return Err(Error::InvalidArgument(format!(
            "{groups} groups exceed {slice_count} slices"
        )));
    }
    let base = slice_count / groups;
    let extra = slice_count % groups;
    let mut start = 0;
    Ok((0..groups)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Predicted wall time for one subject spread over `groups` devices.
///
/// Each group runs its slices one after another on a single device, so the
/// subject finishes when the largest group does.
pub fn gpu_subject_time(
    device: &GpuDeviceClass,
    slice_count: usize,
    groups: usize,
    fixed_overhead_s: f64,
) -> f64 {
    assert!(
        groups >= 1 && groups <= slice_count,
        "1 <= groups <= slice_count"
    );
    if groups == 1 {
        return device.subject_time_s + fixed_overhead_s;
    }
    let largest = slice_count.div_ceil(groups);
    largest as f64 * (device.subject_time_s / slice_count as f64) + fixed_overhead_s
}
