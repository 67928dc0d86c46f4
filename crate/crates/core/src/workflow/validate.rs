use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};

use super::types::{ChunkPlan, TaskKind};

/// Every way `plan` breaks the split/compute/merge shape. Empty means valid.
pub fn validate_plan(plan: &ChunkPlan) -> Vec<String> {
    let mut out = Vec::new();

    let mut ids = HashSet::new();
    for t in &plan.tasks {
        if !ids.insert(t.id.as_str()) {
            out.push(format!("duplicate task id {}", t.id));
        }
        if t.subject_id != plan.subject_id {
            out.push(format!(
                "task {} belongs to subject {} not {}",
                t.id, t.subject_id, plan.subject_id
            ));
        }
        if let Some(v) = t.resources.violation() {
            out.push(format!("task {}: {v}", t.id));
        }
        match t.kind {
            TaskKind::Compute if t.chunk.is_empty() => {
                out.push(format!("compute task {} has an empty chunk", t.id));
            }
            TaskKind::Split | TaskKind::Merge if !t.chunk.is_empty() => {
                out.push(format!("{} task {} must not carry slices", t.kind, t.id));
            }
            _ => {}
        }
    }

    let of_kind = |k: TaskKind| plan.tasks.iter().filter(move |t| t.kind == k);
    for kind in [TaskKind::Split, TaskKind::Merge] {
        let n = of_kind(kind).count();
        if n != 1 {
            out.push(format!("expected exactly one {kind} task, found {n}"));
        }
    }
    if of_kind(TaskKind::Compute).next().is_none() {
        out.push("no compute tasks".to_string());
    }

    // Chunk partition over 0..slice_count.
    let mut cover: BTreeMap<usize, usize> = BTreeMap::new();
    for t in of_kind(TaskKind::Compute) {
        for &i in &t.chunk {
            *cover.entry(i).or_default() += 1;
        }
    }
    for (&i, &n) in &cover {
        if i >= plan.slice_count {
            out.push(format!(
                "slice {i} out of range (slice_count {})",
                plan.slice_count
            ));
        } else if n > 1 {
            out.push(format!("slice {i} covered more than once"));
        }
    }
    for i in 0..plan.slice_count {
        if !cover.contains_key(&i) {
            out.push(format!("slice {i} not covered"));
        }
    }

    out.extend(edge_violations(plan));
    out
}

fn edge_violations(plan: &ChunkPlan) -> Vec<String> {
    let mut out = Vec::new();
    let mut graph = DiGraph::<&str, ()>::new();
    let mut index: HashMap<&str, NodeIndex> = HashMap::new();
    for t in &plan.tasks {
        index
            .entry(t.id.as_str())
            .or_insert_with(|| graph.add_node(t.id.as_str()));
    }

    let mut seen = BTreeSet::new();
    let mut known_edges = Vec::new();
    for (from, to) in &plan.edges {
        let mut ok = true;
        for end in [from, to] {
            if !index.contains_key(end.as_str()) {
                out.push(format!("edge references unknown task {end}"));
                ok = false;
            }
        }
        if !seen.insert((from.as_str(), to.as_str())) {
            out.push(format!("duplicate edge {from} -> {to}"));
            continue;
        }
        if ok {
            graph.add_edge(index[from.as_str()], index[to.as_str()], ());
            known_edges.push((from.as_str(), to.as_str()));
        }
    }

    // Edges inside a strongly connected component are reported once, as the cycle.
    let mut component = HashMap::new();
    for (c, scc) in tarjan_scc(&graph).into_iter().enumerate() {
        for n in scc {
            component.insert(graph[n], c);
        }
    }
    let on_cycle = |a: &str, b: &str| a == b || component.get(a) == component.get(b);
    if toposort(&graph, None).is_err() {
        out.push("cycle detected".to_string());
    }

    let kind_of: HashMap<&str, TaskKind> =
        plan.tasks.iter().map(|t| (t.id.as_str(), t.kind)).collect();
    let split = plan.first_of(TaskKind::Split).map(|t| t.id.as_str());
    let merge = plan.first_of(TaskKind::Merge).map(|t| t.id.as_str());

    for &(from, to) in &known_edges {
        let expected = matches!(
            (kind_of[from], kind_of[to]),
            (TaskKind::Split, TaskKind::Compute) | (TaskKind::Compute, TaskKind::Merge)
        );
        if !expected && !on_cycle(from, to) {
            out.push(format!("unexpected edge {from} -> {to}"));
        }
    }
    for t in plan.compute_tasks() {
        let c = t.id.as_str();
        if let Some(s) = split {
            if !seen.contains(&(s, c)) {
                out.push(format!("missing edge {s} -> {c}"));
            }
        }
        if let Some(m) = merge {
            if !seen.contains(&(c, m)) {
                out.push(format!("missing edge {c} -> {m}"));
            }
        }
    }
    out
}
