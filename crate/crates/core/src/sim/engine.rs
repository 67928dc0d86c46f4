//! Event-driven cluster replay.
//!
//! Time advances only to submission and completion instants. At each instant
//! completions are applied first, then new submissions join the queue, then one
//! scheduling pass orders eligible jobs by (priority desc, submit asc, id asc)
//! and places each first-fit over the nodes in declaration order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::error::{Error, Result};

use super::policy::{compute_priority, qos_admit};
use super::types::{Algorithm, JobRecord, Scenario, SimResult, UserPeak};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Unsubmitted,
    Queued,
    Running,
    Done,
}

#[derive(Debug, Clone, Copy)]
struct Free {
    cores: u64,
    mem_mb: u64,
    gpus: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Held {
    cores: u64,
    mem_mb: u64,
}

struct Placement {
    node: usize,
    start_s: u64,
    end_s: u64,
}

pub fn simulate(scenario: &Scenario) -> Result<SimResult> {
    scenario.validate()?;
    let jobs = &scenario.jobs;
    let policy = &scenario.policy;
    let total_cores = scenario.total_cores();
    let total_mem = scenario.total_mem_mb();
    let window_capacity = (total_cores * policy.usage_window_s) as f64;

    let index: HashMap<u64, usize> = jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let deps: Vec<Vec<usize>> = jobs
        .iter()
        .map(|j| j.depends_on.iter().map(|d| index[d]).collect())
        .collect();

    let mut arrivals: Vec<usize> = (0..jobs.len()).collect();
    arrivals.sort_by_key(|&i| (jobs[i].submit_s, jobs[i].id));

    let mut free: Vec<Free> = scenario
        .cluster
        .iter()
        .map(|n| Free {
            cores: u64::from(n.cores),
            mem_mb: n.mem_mb,
            gpus: u64::from(n.gpus),
        })
        .collect();
    let mut state = vec![State::Unsubmitted; jobs.len()];
    let mut placed: Vec<Option<Placement>> = (0..jobs.len()).map(|_| None).collect();
    let mut held: HashMap<&str, Held> = HashMap::new();
    let mut peaks: BTreeMap<String, UserPeak> = BTreeMap::new();
    let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, j) in jobs.iter().enumerate() {
        by_user.entry(j.user.as_str()).or_default().push(i);
        peaks.entry(j.user.clone()).or_default();
    }

    let mut running: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut queue: Vec<usize> = Vec::new();
    let mut next_arrival = 0;
    let mut done = 0;

    let Some(&first) = arrivals.first() else {
        return Ok(SimResult {
            records: Vec::new(),
            makespan_s: 0,
            user_peaks: peaks,
            utilization: 0.0,
        });
    };
    let mut now = jobs[first].submit_s;

    loop {
        while let Some(&Reverse((end, i))) = running.peek() {
            if end > now {
                break;
            }
            running.pop();
            let job = &jobs[i];
            let p = placed[i].as_ref().expect("running job is placed");
            let slot = &mut free[p.node];
            slot.cores += u64::from(job.resources.cores);
            slot.mem_mb += job.resources.mem_mb;
            slot.gpus += u64::from(job.resources.gpus);
            let h = held
                .get_mut(job.user.as_str())
                .expect("user holds resources");
            h.cores -= u64::from(job.resources.cores);
            h.mem_mb -= job.resources.mem_mb;
            state[i] = State::Done;
            done += 1;
        }

        while next_arrival < arrivals.len() && jobs[arrivals[next_arrival]].submit_s <= now {
            let i = arrivals[next_arrival];
            state[i] = State::Queued;
            queue.push(i);
            next_arrival += 1;
        }

        // Scheduling pass.
        let mut eligible: Vec<(f64, usize)> = queue
            .iter()
            .copied()
            .filter(|&i| deps[i].iter().all(|&d| state[d] == State::Done))
            .map(|i| {
                let prio = match policy.algorithm {
                    Algorithm::Fifo => 0.0,
                    Algorithm::Multifactor => {
                        let usage = window_usage(
                            &by_user[jobs[i].user.as_str()],
                            &placed,
                            jobs,
                            now,
                            policy.usage_window_s,
                        );
                        let wait = (now - jobs[i].submit_s) as f64;
                        compute_priority(usage, window_capacity, wait, policy)
                    }
                };
                (prio, i)
            })
            .collect();
        eligible.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| jobs[a.1].submit_s.cmp(&jobs[b.1].submit_s))
                .then_with(|| jobs[a.1].id.cmp(&jobs[b.1].id))
        });

        for &(_, i) in &eligible {
            let job = &jobs[i];
            let r = &job.resources;
            let h = held.entry(job.user.as_str()).or_default();
            let admitted = qos_admit(h.cores, h.mem_mb, r, total_cores, total_mem, policy);
            let node = admitted
                .then(|| {
                    free.iter().position(|f| {
                        f.cores >= u64::from(r.cores)
                            && f.mem_mb >= r.mem_mb
                            && f.gpus >= u64::from(r.gpus)
                    })
                })
                .flatten();
            let Some(node) = node else {
                if policy.strict_order {
                    break;
                }
                continue;
            };
            let slot = &mut free[node];
            slot.cores -= u64::from(r.cores);
            slot.mem_mb -= r.mem_mb;
            slot.gpus -= u64::from(r.gpus);
            h.cores += u64::from(r.cores);
            h.mem_mb += r.mem_mb;
            let peak = peaks.get_mut(&job.user).expect("user registered");
            peak.cores = peak.cores.max(h.cores);
            peak.mem_mb = peak.mem_mb.max(h.mem_mb);

            let end_s = now + job.duration_s;
            placed[i] = Some(Placement {
                node,
                start_s: now,
                end_s,
            });
            state[i] = State::Running;
            running.push(Reverse((end_s, i)));
        }
        queue.retain(|&i| state[i] == State::Queued);
        check_conservation(scenario, &free);

        let next_end = running.peek().map(|Reverse((t, _))| *t);
        let next_submit = arrivals.get(next_arrival).map(|&i| jobs[i].submit_s);
        now = match (next_end, next_submit) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => break,
        };
    }

    if done != jobs.len() {
        return Err(Error::InvalidScenario(format!(
            "{} jobs could never start",
            jobs.len() - done
        )));
    }

    let records: Vec<JobRecord> = jobs
        .iter()
        .zip(&placed)
        .map(|(job, p)| {
            let p = p.as_ref().expect("all jobs ran");
            JobRecord {
                job_id: job.id,
                user: job.user.clone(),
                submit_s: job.submit_s,
                start_s: p.start_s,
                end_s: p.end_s,
                wait_s: p.start_s - job.submit_s,
                node: scenario.cluster[p.node].name.clone(),
            }
        })
        .collect();
    let first_start = records.iter().map(|r| r.start_s).min().unwrap_or(0);
    let last_end = records.iter().map(|r| r.end_s).max().unwrap_or(0);
    let makespan_s = last_end - first_start;
    let busy: f64 = jobs
        .iter()
        .map(|j| j.resources.cores as f64 * j.duration_s as f64)
        .sum();
    let utilization = if makespan_s == 0 {
        0.0
    } else {
        busy / (total_cores as f64 * makespan_s as f64)
    };

    Ok(SimResult {
        records,
        makespan_s,
        user_peaks: peaks,
        utilization,
    })
}

/// Core-seconds the user's jobs consumed inside `[now - window, now]`.
fn window_usage(
    user_jobs: &[usize],
    placed: &[Option<Placement>],
    jobs: &[super::types::SimJob],
    now: u64,
    window: u64,
) -> f64 {
    let from = now.saturating_sub(window);
    user_jobs
        .iter()
        .filter_map(|&i| placed[i].as_ref().map(|p| (i, p)))
        .map(|(i, p)| {
            let lo = p.start_s.max(from);
            let hi = p.end_s.min(now);
            let overlap = hi.saturating_sub(lo);
            overlap as f64 * f64::from(jobs[i].resources.cores)
        })
        .sum()
}

fn check_conservation(scenario: &Scenario, free: &[Free]) {
    for (node, f) in scenario.cluster.iter().zip(free) {
        assert!(
            f.cores <= u64::from(node.cores)
                && f.mem_mb <= node.mem_mb
                && f.gpus <= u64::from(node.gpus),
            "node {} over-released",
            node.name
        );
    }
}
