//! Priority, QoS admission and analytic fleet throughput.

use crate::workflow::ResourceRequest;

use super::types::{Algorithm, SchedulingPolicy};

/// Fractional caps are floored after this much slack, so `0.15 * 160` yields 24.
const FLOOR_SLACK: f64 = 1e-9;

/// Multi-factor priority: a fair-share term that shrinks as the user's recent
/// usage approaches the window capacity, plus an age term that grows with wait.
///
/// Under FIFO every job scores 0, so ordering falls through to submit time
/// and id.
pub fn compute_priority(
    user_usage_in_window_s: f64,
    window_capacity_s: f64,
    wait_s: f64,
    policy: &SchedulingPolicy,
) -> f64 {
    match policy.algorithm {
        Algorithm::Fifo => 0.0,
        Algorithm::Multifactor => {
            let used = if window_capacity_s > 0.0 {
                (user_usage_in_window_s.max(0.0) / window_capacity_s).min(1.0)
            } else {
                1.0
            };
            let aged = (wait_s.max(0.0) / policy.age_cap_s as f64).min(1.0);
            policy.w_fairshare * (1.0 - used) + policy.w_age * aged
        }
    }
}

/// Largest whole amount a user may hold under `frac` of `total`.
pub fn qos_budget(frac: f64, total: u64) -> u64 {
    (frac * total as f64 + FLOOR_SLACK).floor() as u64
}

/// Whether a user already holding the given cores and memory may start `job`.
pub fn qos_admit(
    user_running_cores: u64,
    user_running_mem_mb: u64,
    job: &ResourceRequest,
    cluster_total_cores: u64,
    cluster_total_mem_mb: u64,
    policy: &SchedulingPolicy,
) -> bool {
    let cores_ok = policy.qos_core_frac.is_none_or(|f| {
        user_running_cores + u64::from(job.cores) <= qos_budget(f, cluster_total_cores)
    });
    let mem_ok = policy
        .qos_mem_frac
        .is_none_or(|f| user_running_mem_mb + job.mem_mb <= qos_budget(f, cluster_total_mem_mb));
    cores_ok && mem_ok
}

/// Wave model: subjects run `concurrent_slots` at a time, each taking `per_subject_s`.
pub fn fleet_makespan(subjects: u64, per_subject_s: u64, concurrent_slots: u64) -> u64 {
    assert!(concurrent_slots > 0, "need at least one slot");
    subjects.div_ceil(concurrent_slots) * per_subject_s
}
