//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use slicewise_core::sim::{Algorithm, NodeSpec, Scenario, SchedulingPolicy, SimJob, SimResult};
use slicewise_core::ResourceRequest;

/// Grid points are multiples of 2^-FINE_BITS.
const FINE_BITS: u32 = 40;
const HALF_WINDOW: i128 = 16;

/// Exact line search over integer-scaled samples.
///
/// Samples are `(x, y) = (X / 10, Y / 10)`. Lines are `A / 2^40 * x + B / 2^40`.
/// The residual sum of squares scaled by `(10 * 2^40)^2` is an exact `i128`, so
/// comparisons between grid points never round. The grid starts at a spacing
/// of 256 and halves around the best point until it reaches 2^-40.
pub fn grid_search_line(points_tenths: &[(i64, i64)]) -> (f64, f64, f64) {
    let one = 1i128 << FINE_BITS;
    let rss = |a: i128, b: i128| -> i128 {
        points_tenths
            .iter()
            .map(|&(x, y)| {
                let r = i128::from(y) * one - a * i128::from(x) - 10 * b;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (0i128, 0i128);
    let mut step = 256 * one;
    loop {
        let mut best = (rss(a, b), a, b, 0, 0);
        for i in -HALF_WINDOW..=HALF_WINDOW {
            for j in -HALF_WINDOW..=HALF_WINDOW {
                let (ca, cb) = (a + i * step, b + j * step);
                let v = rss(ca, cb);
                if v < best.0 {
                    best = (v, ca, cb, i, j);
                }
            }
        }
        let on_edge = best.3.abs() == HALF_WINDOW || best.4.abs() == HALF_WINDOW;
        a = best.1;
        b = best.2;
        if on_edge {
            continue;
        }
        if step == 1 {
            let scale = 10.0 * one as f64;
            return (
                a as f64 / one as f64,
                b as f64 / one as f64,
                best.0 as f64 / (scale * scale),
            );
        }
        step /= 2;
    }
}

/// Start/end/node per job from a per-second replay that rebuilds all state
/// from the placements made so far at every tick.
pub fn tick_oracle(s: &Scenario) -> Vec<(u64, u64, usize)> {
    let n = s.jobs.len();
    let idx: HashMap<u64, usize> = s.jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let total_cores: u64 = s.cluster.iter().map(|c| u64::from(c.cores)).sum();
    let total_mem: u64 = s.cluster.iter().map(|c| c.mem_mb).sum();
    let budget =
        |frac: Option<f64>, total: u64| frac.map(|f| (f * total as f64 + 1e-9).floor() as u64);
    let core_cap = budget(s.policy.qos_core_frac, total_cores);
    let mem_cap = budget(s.policy.qos_mem_frac, total_mem);

    let mut placed: Vec<Option<(u64, u64, usize)>> = vec![None; n];
    let mut t = s.jobs.iter().map(|j| j.submit_s).min().unwrap_or(0);
    while placed.iter().any(Option::is_none) {
        let running: Vec<usize> = (0..n)
            .filter(|&i| matches!(placed[i], Some((st, en, _)) if st <= t && t < en))
            .collect();
        let mut free: Vec<(i64, i64, i64)> = s
            .cluster
            .iter()
            .map(|c| (i64::from(c.cores), c.mem_mb as i64, i64::from(c.gpus)))
            .collect();
        let mut held: HashMap<&str, (u64, u64)> = HashMap::new();
        for &i in &running {
            let (_, _, node) = placed[i].unwrap();
            let r = &s.jobs[i].resources;
            free[node].0 -= i64::from(r.cores);
            free[node].1 -= r.mem_mb as i64;
            free[node].2 -= i64::from(r.gpus);
            let h = held.entry(s.jobs[i].user.as_str()).or_default();
            h.0 += u64::from(r.cores);
            h.1 += r.mem_mb;
        }
        let finished = |i: usize, placed: &[Option<(u64, u64, usize)>]| matches!(placed[i], Some((_, en, _)) if en <= t);
        let mut cands: Vec<(f64, usize)> = (0..n)
            .filter(|&i| placed[i].is_none() && s.jobs[i].submit_s <= t)
            .filter(|&i| {
                s.jobs[i]
                    .depends_on
                    .iter()
                    .all(|d| finished(idx[d], &placed))
            })
            .map(|i| (priority(s, &placed, i, t, total_cores), i))
            .collect();
        cands.sort_by(|x, y| {
            y.0.partial_cmp(&x.0)
                .unwrap()
                .then(s.jobs[x.1].submit_s.cmp(&s.jobs[y.1].submit_s))
                .then(s.jobs[x.1].id.cmp(&s.jobs[y.1].id))
        });
        for (_, i) in cands {
            let job = &s.jobs[i];
            let r = &job.resources;
            let h = held.entry(job.user.as_str()).or_default();
            if core_cap.is_some_and(|cap| h.0 + u64::from(r.cores) > cap)
                || mem_cap.is_some_and(|cap| h.1 + r.mem_mb > cap)
            {
                continue;
            }
            let Some(node) = free.iter().position(|f| {
                f.0 >= i64::from(r.cores) && f.1 >= r.mem_mb as i64 && f.2 >= i64::from(r.gpus)
            }) else {
                continue;
            };
            free[node].0 -= i64::from(r.cores);
            free[node].1 -= r.mem_mb as i64;
            free[node].2 -= i64::from(r.gpus);
            h.0 += u64::from(r.cores);
            h.1 += r.mem_mb;
            placed[i] = Some((t, t + job.duration_s, node));
        }
        t += 1;
        assert!(t < 10_000_000, "oracle did not converge");
    }
    placed.into_iter().map(Option::unwrap).collect()
}

fn priority(
    s: &Scenario,
    placed: &[Option<(u64, u64, usize)>],
    i: usize,
    t: u64,
    total_cores: u64,
) -> f64 {
    let p = &s.policy;
    if p.algorithm == Algorithm::Fifo {
        return 0.0;
    }
    let from = t.saturating_sub(p.usage_window_s);
    let mut usage = 0.0;
    for (k, job) in s.jobs.iter().enumerate() {
        if job.user != s.jobs[i].user {
            continue;
        }
        if let Some((st, en, _)) = placed[k] {
            let lo = st.max(from);
            let hi = en.min(t);
            if hi > lo {
                usage += (hi - lo) as f64 * f64::from(job.resources.cores);
            }
        }
    }
    let cap = (total_cores * p.usage_window_s) as f64;
    let fs = 1.0 - (usage / cap).min(1.0);
    let age = ((t - s.jobs[i].submit_s) as f64 / p.age_cap_s as f64).min(1.0);
    p.w_fairshare * fs + p.w_age * age
}

/// Random scenario; `small` keeps it within the oracle's size limits.
pub fn random_scenario<R: Rng>(rng: &mut R, small: bool) -> Scenario {
    let nodes = if small {
        rng.gen_range(1..=2)
    } else {
        rng.gen_range(1..=5)
    };
    let jobs_n = if small {
        rng.gen_range(1..=6)
    } else {
        rng.gen_range(1..=50)
    };
    let cluster: Vec<NodeSpec> = (0..nodes)
        .map(|k| NodeSpec {
            name: format!("n{k}"),
            cores: rng.gen_range(1..=16),
            mem_mb: rng.gen_range(1..=8) * 1024,
            gpus: rng.gen_range(0..=2),
        })
        .collect();
    let max_cores = cluster.iter().map(|c| c.cores).max().unwrap();
    let max_mem = cluster.iter().map(|c| c.mem_mb).max().unwrap();
    let max_gpus = cluster.iter().map(|c| c.gpus).max().unwrap();
    let total_cores: u64 = cluster.iter().map(|c| u64::from(c.cores)).sum();
    let total_mem: u64 = cluster.iter().map(|c| c.mem_mb).sum();

    let mut policy = if rng.gen_bool(0.5) {
        SchedulingPolicy::multifactor()
    } else {
        SchedulingPolicy::default()
    };
    if policy.algorithm == Algorithm::Multifactor {
        policy.usage_window_s = rng.gen_range(10..=200);
        policy.age_cap_s = rng.gen_range(1..=100);
    }
    if rng.gen_bool(0.4) {
        policy.qos_core_frac = Some(rng.gen_range(0.3..=1.0));
    }
    if rng.gen_bool(0.3) {
        policy.qos_mem_frac = Some(rng.gen_range(0.3..=1.0));
    }
    let core_cap = policy
        .qos_core_frac
        .map_or(u64::MAX, |f| (f * total_cores as f64 + 1e-9).floor() as u64);
    let mem_cap = policy
        .qos_mem_frac
        .map_or(u64::MAX, |f| (f * total_mem as f64 + 1e-9).floor() as u64);
    if core_cap == 0 {
        policy.qos_core_frac = None;
    }
    let core_cap = if core_cap == 0 { u64::MAX } else { core_cap };
    let core_limit = u64::from(max_cores).min(core_cap).max(1) as u32;
    let mem_limit = max_mem.min(mem_cap).max(1);

    let users = ["ann", "bob", "cy"];
    let mut jobs: Vec<SimJob> = Vec::with_capacity(jobs_n);
    for id in 0..jobs_n as u64 {
        let duration_s = rng.gen_range(1..=30);
        let mut depends_on = Vec::new();
        if id > 0 && rng.gen_bool(0.25) {
            depends_on.push(rng.gen_range(0..id));
        }
        jobs.push(SimJob {
            id,
            user: users[rng.gen_range(0..users.len())].to_string(),
            submit_s: rng.gen_range(0..=40),
            duration_s,
            resources: ResourceRequest {
                cores: rng.gen_range(1..=core_limit),
                mem_mb: rng.gen_range(1..=mem_limit),
                walltime_s: duration_s,
                gpus: if max_gpus > 0 && rng.gen_bool(0.2) {
                    rng.gen_range(1..=max_gpus)
                } else {
                    0
                },
            },
            depends_on,
        });
    }
    let mut s = Scenario {
        cluster,
        policy,
        jobs,
    };
    // A job may still be unplaceable when its mem/gpu draw exceeds the node that has the cores.
    for j in &mut s.jobs {
        let r = j.resources;
        let fits = s
            .cluster
            .iter()
            .any(|c| c.cores >= r.cores && c.mem_mb >= r.mem_mb && c.gpus >= r.gpus);
        if !fits {
            let c = &s.cluster[0];
            j.resources.cores = r.cores.min(c.cores);
            j.resources.mem_mb = r.mem_mb.min(c.mem_mb);
            j.resources.gpus = r.gpus.min(c.gpus);
        }
    }
    s
}

/// Checks capacity, QoS, submit and dependency invariants at every start instant.
pub fn check_invariants(s: &Scenario, r: &SimResult) -> Result<(), String> {
    let node_idx: HashMap<&str, usize> = s
        .cluster
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let by_id: HashMap<u64, usize> = s.jobs.iter().enumerate().map(|(i, j)| (j.id, i)).collect();
    let total_cores: u64 = s.cluster.iter().map(|c| u64::from(c.cores)).sum();
    let total_mem: u64 = s.cluster.iter().map(|c| c.mem_mb).sum();
    for rec in &r.records {
        let job = &s.jobs[by_id[&rec.job_id]];
        if rec.start_s < job.submit_s {
            return Err(format!("job {} starts before submission", job.id));
        }
        if rec.end_s != rec.start_s + job.duration_s {
            return Err(format!("job {} end != start + duration", job.id));
        }
        for d in &job.depends_on {
            let dep = r.record(*d).unwrap();
            if rec.start_s < dep.end_s {
                return Err(format!("job {} starts before dependency {d} ends", job.id));
            }
        }
    }
    for probe in r.records.iter().map(|x| x.start_s) {
        let mut used = vec![(0u64, 0u64, 0u64); s.cluster.len()];
        let mut per_user: HashMap<&str, (u64, u64)> = HashMap::new();
        for rec in r
            .records
            .iter()
            .filter(|x| x.start_s <= probe && probe < x.end_s)
        {
            let job = &s.jobs[by_id[&rec.job_id]];
            let u = &mut used[node_idx[rec.node.as_str()]];
            u.0 += u64::from(job.resources.cores);
            u.1 += job.resources.mem_mb;
            u.2 += u64::from(job.resources.gpus);
            let h = per_user.entry(job.user.as_str()).or_default();
            h.0 += u64::from(job.resources.cores);
            h.1 += job.resources.mem_mb;
        }
        for (c, u) in s.cluster.iter().zip(&used) {
            if u.0 > u64::from(c.cores) || u.1 > c.mem_mb || u.2 > u64::from(c.gpus) {
                return Err(format!("node {} over capacity at t={probe}", c.name));
            }
        }
        for (user, h) in per_user {
            if let Some(f) = s.policy.qos_core_frac {
                if h.0 > (f * total_cores as f64 + 1e-9).floor() as u64 {
                    return Err(format!("user {user} over core cap at t={probe}"));
                }
            }
            if let Some(f) = s.policy.qos_mem_frac {
                if h.1 > (f * total_mem as f64 + 1e-9).floor() as u64 {
                    return Err(format!("user {user} over memory cap at t={probe}"));
                }
            }
        }
    }
    Ok(())
}

/// Balanced contiguous partition check used by the partition property suites.
pub fn check_partition(
    ranges: &[std::ops::Range<usize>],
    slices: usize,
    groups: usize,
) -> Result<(), String> {
    if ranges.len() != groups {
        return Err(format!("{} ranges for {groups} groups", ranges.len()));
    }
    let mut seen = vec![0u32; slices];
    for r in ranges {
        if r.is_empty() {
            return Err("empty range".into());
        }
        for i in r.clone() {
            if i >= slices {
                return Err(format!("index {i} out of range"));
            }
            seen[i] += 1;
        }
    }
    if let Some(i) = seen.iter().position(|&c| c != 1) {
        return Err(format!("slice {i} covered {} times", seen[i]));
    }
    for w in ranges.windows(2) {
        if w[0].end != w[1].start {
            return Err("ranges are not contiguous in order".into());
        }
    }
    let max = ranges.iter().map(|r| r.len()).max().unwrap();
    let min = ranges.iter().map(|r| r.len()).min().unwrap();
    if max - min > 1 {
        return Err(format!("size spread {} > 1", max - min));
    }
    Ok(())
}
