//! Deterministic discrete-event cluster simulation.

mod engine;
mod policy;
mod types;

pub use engine::simulate;
pub use policy::{compute_priority, fleet_makespan, qos_admit, qos_budget};
pub use types::{
    jobs_from_plan, read_records_csv, read_summary, summary_path, Algorithm, JobRecord, NodeSpec,
    Scenario, SchedulingPolicy, SimJob, SimResult, SimSummary, UserPeak, DEFAULT_AGE_CAP_S,
    DEFAULT_USAGE_WINDOW_S, DEFAULT_W_AGE, DEFAULT_W_FAIRSHARE,
};
