use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workflow::{ChunkPlan, ResourceRequest};

use super::policy::qos_admit;

pub const DEFAULT_W_FAIRSHARE: f64 = 1000.0;
pub const DEFAULT_W_AGE: f64 = 100.0;
pub const DEFAULT_USAGE_WINDOW_S: u64 = 30 * 86_400;
pub const DEFAULT_AGE_CAP_S: u64 = 7 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub cores: u32,
    pub mem_mb: u64,
    #[serde(default)]
    pub gpus: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Fifo,
    Multifactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulingPolicy {
    pub algorithm: Algorithm,
    pub w_fairshare: f64,
    pub w_age: f64,
    pub usage_window_s: u64,
    pub age_cap_s: u64,
    /// Per-user cap on concurrently held cores, as a fraction of the cluster.
    pub qos_core_frac: Option<f64>,
    /// Per-user cap on concurrently held memory, as a fraction of the cluster.
    pub qos_mem_frac: Option<f64>,
    /// Stop each scheduling pass at the first job that cannot start instead of
    /// scanning past it.
    pub strict_order: bool,
}

impl Default for SchedulingPolicy {
    fn default() -> Self {
        SchedulingPolicy {
            algorithm: Algorithm::Fifo,
            w_fairshare: DEFAULT_W_FAIRSHARE,
            w_age: DEFAULT_W_AGE,
            usage_window_s: DEFAULT_USAGE_WINDOW_S,
            age_cap_s: DEFAULT_AGE_CAP_S,
            qos_core_frac: None,
            qos_mem_frac: None,
            strict_order: false,
        }
    }
}

impl SchedulingPolicy {
    pub fn multifactor() -> Self {
        SchedulingPolicy {
            algorithm: Algorithm::Multifactor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_fairshare", self.w_fairshare), ("w_age", self.w_age)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::schema(format!("policy.{name}"), "must be >= 0"));
            }
        }
        for (name, frac) in [
            ("qos_core_frac", self.qos_core_frac),
            ("qos_mem_frac", self.qos_mem_frac),
        ] {
            if let Some(f) = frac {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::schema(format!("policy.{name}"), "must be in [0, 1]"));
                }
            }
        }
        if self.usage_window_s == 0 {
            return Err(Error::schema("policy.usage_window_s", "must be >= 1"));
        }
        if self.age_cap_s == 0 {
            return Err(Error::schema("policy.age_cap_s", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimJob {
    pub id: u64,
    pub user: String,
    pub submit_s: u64,
    pub duration_s: u64,
    pub resources: ResourceRequest,
    pub depends_on: Vec<u64>,
}

/// Flat wire form of [`SimJob`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct JobWire {
    id: u64,
    user: String,
    #[serde(default)]
    submit_s: u64,
    duration_s: u64,
    cores: u32,
    mem_mb: u64,
    #[serde(default)]
    gpus: u32,
    #[serde(default)]
    depends_on: Vec<u64>,
}

impl From<JobWire> for SimJob {
    fn from(w: JobWire) -> Self {
        SimJob {
            id: w.id,
            user: w.user,
            submit_s: w.submit_s,
            duration_s: w.duration_s,
            resources: ResourceRequest {
                cores: w.cores,
                mem_mb: w.mem_mb,
                walltime_s: w.duration_s.max(1),
                gpus: w.gpus,
            },
            depends_on: w.depends_on,
        }
    }
}

impl From<&SimJob> for JobWire {
    fn from(j: &SimJob) -> Self {
        JobWire {
            id: j.id,
            user: j.user.clone(),
            submit_s: j.submit_s,
            duration_s: j.duration_s,
            cores: j.resources.cores,
            mem_mb: j.resources.mem_mb,
            gpus: j.resources.gpus,
            depends_on: j.depends_on.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cluster: Vec<NodeSpec>,
    pub policy: SchedulingPolicy,
    pub jobs: Vec<SimJob>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioWire {
    cluster: Vec<NodeSpec>,
    #[serde(default)]
    policy: SchedulingPolicy,
    jobs: Vec<JobWire>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: ScenarioWire = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        let scenario = Scenario {
            cluster: wire.cluster,
            policy: wire.policy,
            jobs: wire.jobs.into_iter().map(SimJob::from).collect(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_owned(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let wire = ScenarioWire {
            cluster: self.cluster.clone(),
            policy: self.policy.clone(),
            jobs: self.jobs.iter().map(JobWire::from).collect(),
        };
        serde_json::to_string_pretty(&wire).expect("scenario serializes") + "\n"
    }

    pub fn total_cores(&self) -> u64 {
        self.cluster.iter().map(|n| u64::from(n.cores)).sum()
    }

    pub fn total_mem_mb(&self) -> u64 {
        self.cluster.iter().map(|n| n.mem_mb).sum()
    }

    /// Rejects scenarios the simulator cannot run to completion.
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.cluster.is_empty() {
            return Err(Error::InvalidScenario("cluster has no nodes".into()));
        }
        let mut names = HashSet::new();
        for n in &self.cluster {
            if n.cores == 0 || n.mem_mb == 0 {
                return Err(Error::InvalidScenario(format!(
                    "node `{}` needs at least one core and 1 MB",
                    n.name
                )));
            }
            if !names.insert(n.name.as_str()) {
                return Err(Error::InvalidScenario(format!(
                    "duplicate node name `{}`",
                    n.name
                )));
            }
        }
        let (total_cores, total_mem) = (self.total_cores(), self.total_mem_mb());
        let mut earlier = HashSet::new();
        for job in &self.jobs {
            if job.duration_s == 0 {
                return Err(Error::InvalidScenario(format!(
                    "job {} has zero duration",
                    job.id
                )));
            }
            if job.resources.cores == 0 || job.resources.mem_mb == 0 {
                return Err(Error::InvalidScenario(format!(
                    "job {} needs at least one core and 1 MB",
                    job.id
                )));
            }
            for dep in &job.depends_on {
                if !earlier.contains(dep) {
                    return Err(Error::InvalidScenario(format!(
                        "job {} depends on {dep}, which is not an earlier job",
                        job.id
                    )));
                }
            }
            if !earlier.insert(job.id) {
                return Err(Error::InvalidScenario(format!(
                    "duplicate job id {}",
                    job.id
                )));
            }
            let r = &job.resources;
            let fits = self
                .cluster
                .iter()
                .any(|n| n.cores >= r.cores && n.mem_mb >= r.mem_mb && n.gpus >= r.gpus);
            if !fits {
                return Err(Error::UnplaceableJob {
                    job: job.id,
                    reason: format!(
                        "{} cores, {} MB, {} GPUs exceeds every node",
                        r.cores, r.mem_mb, r.gpus
                    ),
                });
            }
            if !qos_admit(0, 0, r, total_cores, total_mem, &self.policy) {
                return Err(Error::ExceedsQosCap {
                    job: job.id,
                    reason: format!(
                        "{} cores / {} MB against caps {:?} / {:?} of {total_cores} cores / {total_mem} MB",
                        r.cores, r.mem_mb, self.policy.qos_core_frac, self.policy.qos_mem_frac
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Turns a plan into simulator jobs with ids `first_id..`, all submitted at `submit_s`.
///
/// Durations are the tasks' expected runtimes; dependencies follow the plan edges.
pub fn jobs_from_plan(plan: &ChunkPlan, user: &str, first_id: u64, submit_s: u64) -> Vec<SimJob> {
    let ids: HashMap<&str, u64> = plan
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), first_id + i as u64))
        .collect();
    plan.tasks
        .iter()
        .map(|t| SimJob {
            id: ids[t.id.as_str()],
            user: user.to_owned(),
            submit_s,
            duration_s: t.expected_runtime_s().max(1),
            resources: t.resources,
            depends_on: plan.dependencies_of(&t.id).map(|d| ids[d]).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: u64,
    pub user: String,
    pub submit_s: u64,
    pub start_s: u64,
    pub end_s: u64,
    pub wait_s: u64,
    pub node: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPeak {
    pub cores: u64,
    pub mem_mb: u64,
}

/// Aggregates written next to the per-job CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub jobs: usize,
    pub makespan_s: u64,
    pub utilization: f64,
    pub user_peaks: BTreeMap<String, UserPeak>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// One record per job, in scenario order.
    pub records: Vec<JobRecord>,
    pub makespan_s: u64,
    pub user_peaks: BTreeMap<String, UserPeak>,
    /// Busy core-seconds over total cores times makespan.
    pub utilization: f64,
}

impl SimResult {
    pub fn summary(&self) -> SimSummary {
        SimSummary {
            jobs: self.records.len(),
            makespan_s: self.makespan_s,
            utilization: self.utilization,
            user_peaks: self.user_peaks.clone(),
        }
    }

    pub fn records_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes") + "\n"
    }

    pub fn record(&self, job_id: u64) -> Option<&JobRecord> {
        self.records.iter().find(|r| r.job_id == job_id)
    }

    /// Writes the CSV to `csv_path` and the summary beside it; returns the summary path.
    pub fn write(&self, csv_path: &Path) -> Result<std::path::PathBuf> {
        std::fs::write(csv_path, self.records_csv()).map_err(|e| Error::io(csv_path, e))?;
        let summary = summary_path(csv_path);
        std::fs::write(&summary, self.summary_json()).map_err(|e| Error::io(&summary, e))?;
        Ok(summary)
    }
}

/// `result.csv` pairs with `result.summary.json`.
pub fn summary_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("summary.json")
}

pub fn read_records_csv(path: &Path) -> Result<Vec<JobRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
}

pub fn read_summary(path: &Path) -> Result<SimSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}
