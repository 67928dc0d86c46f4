//! Runs a plan on this host with bounded cores and memory.
//!
//! The coordinator thread owns the ready queue and budget ledger; each started
//! task runs `sh -c <command>` on its own thread and reports back over a
//! channel. Memory is accounted from the declared requests, not measured.

use std::collections::{HashMap, HashSet};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workflow::{validate_plan, ChunkPlan, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    Failed,
    MergeSkipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    /// Seconds since the run began.
    pub start_s: f64,
    pub end_s: f64,
    /// Process exit code; -1 when the process could not be spawned or was killed.
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub status: RunStatus,
    /// Wall-clock start of the run, milliseconds since the Unix epoch.
    pub started_at_ms: u128,
    /// Records in start order.
    pub records: Vec<TaskRecord>,
    pub peak_cores: u64,
    pub peak_mem_mb: u64,
}

impl ExecutionReport {
    pub fn record(&self, task_id: &str) -> Option<&TaskRecord> {
        self.records.iter().find(|r| r.task_id == task_id)
    }
}

#[derive(Debug, Default)]
struct Ledger {
    cores: u64,
    mem_mb: u64,
    peak_cores: u64,
    peak_mem_mb: u64,
}

impl Ledger {
    fn take(&mut self, cores: u64, mem_mb: u64) {
        self.cores += cores;
        self.mem_mb += mem_mb;
        self.peak_cores = self.peak_cores.max(self.cores);
        self.peak_mem_mb = self.peak_mem_mb.max(self.mem_mb);
    }

    fn give(&mut self, cores: u64, mem_mb: u64) {
        self.cores -= cores;
        self.mem_mb -= mem_mb;
    }
}

fn run_command(command: &str) -> i32 {
    match Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .status()
    {
        Ok(status) => status.code().unwrap_or(-1),
        Err(e) => {
            debug!("spawn failed for `{command}`: {e}");
            -1
        }
    }
}

pub fn run_local(
    plan: &ChunkPlan,
    core_budget: u64,
    mem_budget_mb: u64,
) -> Result<ExecutionReport> {
    let violations = validate_plan(plan);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations));
    }
    if core_budget == 0 || mem_budget_mb == 0 {
        return Err(Error::InvalidArgument("budgets must be >= 1".into()));
    }
    for t in &plan.tasks {
        let r = &t.resources;
        if u64::from(r.cores) > core_budget || r.mem_mb > mem_budget_mb {
            return Err(Error::BudgetTooSmall {
                task: t.id.clone(),
                need: format!("{} cores / {} MB", r.cores, r.mem_mb),
                budget: format!("{core_budget} cores / {mem_budget_mb} MB"),
            });
        }
    }

    let deps: Vec<Vec<usize>> = {
        let pos: HashMap<&str, usize> = plan
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();
        plan.tasks
            .iter()
            .map(|t| plan.dependencies_of(&t.id).map(|d| pos[d]).collect())
            .collect()
    };

    let epoch = Instant::now();
    let started_at_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let (tx, rx) = mpsc::channel::<(usize, i32, f64)>();

    let mut ledger = Ledger::default();
    let mut started: HashSet<usize> = HashSet::new();
    let mut exit: Vec<Option<i32>> = vec![None; plan.tasks.len()];
    let mut records: Vec<TaskRecord> = Vec::new();
    let mut slot_of: HashMap<usize, usize> = HashMap::new();
    let mut in_flight = 0usize;

    loop {
        for (i, t) in plan.tasks.iter().enumerate() {
            if started.contains(&i) || !deps[i].iter().all(|&d| exit[d] == Some(0)) {
                continue;
            }
            let (cores, mem) = (u64::from(t.resources.cores), t.resources.mem_mb);
            if ledger.cores + cores > core_budget || ledger.mem_mb + mem > mem_budget_mb {
                continue;
            }
            ledger.take(cores, mem);
            assert!(ledger.cores <= core_budget && ledger.mem_mb <= mem_budget_mb);
            started.insert(i);
            in_flight += 1;
            slot_of.insert(i, records.len());
            records.push(TaskRecord {
                task_id: t.id.clone(),
                start_s: epoch.elapsed().as_secs_f64(),
                end_s: f64::NAN,
                exit_code: -1,
            });
            debug!("start {} ({cores} cores, {mem} MB)", t.id);
            let tx = tx.clone();
            let command = t.command.clone();
            thread::spawn(move || {
                let code = run_command(&command);
                let _ = tx.send((i, code, epoch.elapsed().as_secs_f64()));
            });
        }
        if in_flight == 0 {
            break;
        }
        let (i, code, end_s) = rx.recv().expect("worker threads hold a sender");
        in_flight -= 1;
        exit[i] = Some(code);
        let rec = &mut records[slot_of[&i]];
        rec.end_s = end_s;
        rec.exit_code = code;
        let t = &plan.tasks[i];
        ledger.give(u64::from(t.resources.cores), t.resources.mem_mb);
        debug!("end {} exit {code}", t.id);
    }

    let failed = |kind: TaskKind| {
        plan.tasks
            .iter()
            .enumerate()
            .any(|(i, t)| t.kind == kind && matches!(exit[i], Some(c) if c != 0))
    };
    let status = if failed(TaskKind::Compute) {
        RunStatus::MergeSkipped
    } else if records.len() == plan.tasks.len() && records.iter().all(|r| r.exit_code == 0) {
        RunStatus::Complete
    } else {
        RunStatus::Failed
    };
    info!(
        "{}: {:?} after {:.2}s",
        plan.subject_id,
        status,
        epoch.elapsed().as_secs_f64()
    );

    Ok(ExecutionReport {
        status,
        started_at_ms,
        records,
        peak_cores: ledger.peak_cores,
        peak_mem_mb: ledger.peak_mem_mb,
    })
}
