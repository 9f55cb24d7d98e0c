//! Prize-collecting Steiner forest via Goemans–Williamson moat growing.
//!
//! Every node starts as an active cluster whose moat grows at unit rate.
//! Edges are split into two halves, one per endpoint; an edge becomes tight
//! when the moats covering its two halves sum to its cost, at which point the
//! two clusters merge. A cluster deactivates once the moats inside it have
//! paid for its total prize. Growth stops as soon as at most
//! `target_components` clusters remain active; the surviving clusters are
//! then strong-pruned into maximum-objective subtrees.
//!
//! Pending edge events are kept per cluster in a pairing heap with lazy
//! additive offsets, so a cluster absorbed by a merge can shift all of its
//! pending events at once and heaps meld in constant time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::graph::{Graph, Support};

/// Event times closer than this are treated as simultaneous.
pub const EVENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PcstInstance<'a> {
    pub graph: &'a Graph,
    pub prizes: &'a [f64],
    pub target_components: usize,
    pub cost_scale: f64,
}

impl PcstInstance<'_> {
    fn validate(&self) -> Result<()> {
        let p = self.graph.num_nodes();
        if p == 0 {
            return invalid("empty graph");
        }
        if self.prizes.len() != p {
            return invalid(format!("{} prizes for {p} nodes", self.prizes.len()));
        }
        if let Some(bad) = self.prizes.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return invalid(format!("prizes must be finite and nonnegative, got {bad}"));
        }
        if self.target_components == 0 {
            return invalid("target component count must be positive");
        }
        if !(self.cost_scale > 0.0) || !self.cost_scale.is_finite() {
            return invalid(format!("cost scale must be positive, got {}", self.cost_scale));
        }
        Ok(())
    }

    fn edge_cost(&self, edge: usize) -> f64 {
        self.graph.edges()[edge].weight * self.cost_scale
    }

    /// Penalty form of the objective: paid edge cost plus uncollected prize.
    pub fn penalty(&self, forest: &Forest) -> f64 {
        let paid: f64 = forest.edges.iter().map(|&e| self.edge_cost(e)).sum();
        let missed: f64 = (0..self.prizes.len())
            .filter(|&i| !forest.nodes.contains(i))
            .map(|i| self.prizes[i])
            .sum();
        paid + missed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub nodes: Support,
    pub edges: Vec<usize>,
    /// Collected prize minus paid (scaled) edge cost.
    pub objective: f64,
}

impl Forest {
    pub fn empty() -> Self {
        Self {
            nodes: Support::empty(),
            edges: Vec::new(),
            objective: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct HeapNode {
    /// True value minus the `child_offset` of every proper ancestor.
    value: f64,
    /// Pending shift for all descendants of this node.
    child_offset: f64,
    child: u32,
    sibling: u32,
    part: u32,
    version: u32,
}

/// Arena of pairing heaps with whole-heap shifts, one heap per cluster.
/// Roots hold true values; ties are broken by edge part.
#[derive(Debug, Default)]
struct HeapArena {
    nodes: Vec<HeapNode>,
    pairing_buf: Vec<u32>,
}

impl HeapArena {
    fn with_capacity(n: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(n),
            pairing_buf: Vec::new(),
        }
    }

    fn key(&self, n: u32) -> (f64, u32) {
        let node = &self.nodes[n as usize];
        (node.value, node.part)
    }

    /// Makes the larger of two roots a child of the smaller.
    fn link(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        let (ka, kb) = (self.key(a), self.key(b));
        let (top, below) = if ka.0 < kb.0 || (ka.0 == kb.0 && ka.1 <= kb.1) {
            (a, b)
        } else {
            (b, a)
        };
        let offset = self.nodes[top as usize].child_offset;
        let first_child = self.nodes[top as usize].child;
        let lower = &mut self.nodes[below as usize];
        lower.value -= offset;
        lower.child_offset -= offset;
        lower.sibling = first_child;
        self.nodes[top as usize].child = below;
        top
    }

    fn push(&mut self, root: u32, value: f64, part: usize, version: u32) -> u32 {
        let idx = self.nodes.len() as u32;
        self.nodes.push(HeapNode {
            value,
            child_offset: 0.0,
            child: NIL,
            sibling: NIL,
            part: part as u32,
            version,
        });
        self.link(root, idx)
    }

    fn shift(&mut self, root: u32, delta: f64) {
        if root != NIL {
            let node = &mut self.nodes[root as usize];
            node.value += delta;
            node.child_offset += delta;
        }
    }

    /// Removes the root and returns the new root.
    fn pop(&mut self, root: u32) -> u32 {
        let offset = self.nodes[root as usize].child_offset;
        let mut buf = std::mem::take(&mut self.pairing_buf);
        buf.clear();
        let mut c = self.nodes[root as usize].child;
        while c != NIL {
            let node = &mut self.nodes[c as usize];
            node.value += offset;
            node.child_offset += offset;
            let next = node.sibling;
            node.sibling = NIL;
            buf.push(c);
            c = next;
        }
        // Two-pass pairing: left to right in pairs, then fold right to left.
        let mut paired = Vec::with_capacity(buf.len().div_ceil(2));
        for pair in buf.chunks(2) {
            let b = pair.get(1).copied().unwrap_or(NIL);
            paired.push(self.link(pair[0], b));
        }
        let mut result = NIL;
        for &h in paired.iter().rev() {
            result = self.link(h, result);
        }
        self.pairing_buf = buf;
        result
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct EdgePart {
    deleted: bool,
    version: u32,
}

#[derive(Debug)]
struct Cluster {
    heap: u32,
    active: bool,
    active_start: f64,
    active_end: f64,
    merged_into: Option<usize>,
    prize_sum: f64,
    subcluster_moat_sum: f64,
    moat: f64,
    skip_up: Option<usize>,
    skip_up_sum: f64,
    children: Option<(usize, usize)>,
    edge_event_key: Option<(Time, usize)>,
    deactivation_key: Option<Time>,
}

impl Cluster {
    fn singleton(prize: f64) -> Self {
        Self {
            heap: NIL,
            active: true,
            active_start: 0.0,
            active_end: -1.0,
            merged_into: None,
            prize_sum: prize,
            subcluster_moat_sum: 0.0,
            moat: 0.0,
            skip_up: None,
            skip_up_sum: 0.0,
            children: None,
            edge_event_key: None,
            deactivation_key: None,
        }
    }
}

struct MoatGrowth<'a> {
    inst: &'a PcstInstance<'a>,
    heaps: HeapArena,
    parts: Vec<EdgePart>,
    clusters: Vec<Cluster>,
    // (time, edge index, cluster)
    // Lazily deleted: an entry is live only while it matches the cluster's
    // current key.
    edge_events: BinaryHeap<Reverse<(Time, usize, usize)>>,
    deactivations: BinaryHeap<Reverse<(Time, usize)>>,
    num_active: usize,
    now: f64,
    phase1_edges: Vec<usize>,
    compress_buf: Vec<(usize, f64)>,
}

struct PartSum {
    covered: f64,
    cluster: usize,
}

impl<'a> MoatGrowth<'a> {
    fn new(inst: &'a PcstInstance<'a>) -> Self {
        let graph = inst.graph;
        let mut clusters: Vec<Cluster> =
            inst.prizes.iter().map(|&p| Cluster::singleton(p)).collect();
        let parts = vec![EdgePart::default(); 2 * graph.num_edges()];
        let mut heaps = HeapArena::with_capacity(4 * graph.num_edges());
        for (idx, e) in graph.edges().iter().enumerate() {
            let half = inst.edge_cost(idx) / 2.0;
            clusters[e.u].heap = heaps.push(clusters[e.u].heap, half, 2 * idx, 0);
            clusters[e.v].heap = heaps.push(clusters[e.v].heap, half, 2 * idx + 1, 0);
        }
        let mut run = Self {
            inst,
            heaps,
            parts,
            clusters,
            edge_events: BinaryHeap::new(),
            deactivations: BinaryHeap::new(),
            num_active: graph.num_nodes(),
            now: 0.0,
            phase1_edges: Vec::new(),
            compress_buf: Vec::new(),
        };
        for c in 0..graph.num_nodes() {
            let t = Time(run.clusters[c].prize_sum);
            run.clusters[c].deactivation_key = Some(t);
            run.deactivations.push(Reverse((t, c)));
            run.refresh_edge_event(c);
        }
        run
    }

    fn heap_push(&mut self, c: usize, time: f64, part: usize, version: u32) {
        self.clusters[c].heap = self.heaps.push(self.clusters[c].heap, time, part, version);
    }

    /// Earliest live entry of cluster `c` as `(time, part)`, discarding
    /// entries for deleted or rescheduled parts on the way.
    fn heap_peek(&mut self, c: usize) -> Option<(f64, usize)> {
        let mut root = self.clusters[c].heap;
        while root != NIL {
            let node = self.heaps.nodes[root as usize];
            let part = &self.parts[node.part as usize];
            if !part.deleted && part.version == node.version {
                break;
            }
            root = self.heaps.pop(root);
        }
        self.clusters[c].heap = root;
        (root != NIL).then(|| {
            let node = &self.heaps.nodes[root as usize];
            (node.value, node.part as usize)
        })
    }

    fn refresh_edge_event(&mut self, c: usize) {
        self.clusters[c].edge_event_key = None;
        if !self.clusters[c].active {
            return;
        }
        if let Some((t, part)) = self.heap_peek(c) {
            let key = (Time(t), part / 2);
            self.clusters[c].edge_event_key = Some(key);
            self.edge_events.push(Reverse((key.0, key.1, c)));
        }
    }

    fn deactivate(&mut self, c: usize) {
        let cl = &mut self.clusters[c];
        debug_assert!(cl.active);
        cl.active = false;
        cl.active_end = self.now;
        cl.moat = cl.active_end - cl.active_start;
        cl.deactivation_key = None;
        self.num_active -= 1;
        self.refresh_edge_event(c);
    }

    fn endpoint(&self, part: usize) -> usize {
        let e = self.inst.graph.edges()[part / 2];
        if part % 2 == 0 {
            e.u
        } else {
            e.v
        }
    }

    /// Total moat covering the half-edge `part`, walking up the merge tree
    /// with path compression.
    fn sum_on_part(&mut self, part: usize) -> PartSum {
        let mut cur = self.endpoint(part);
        let mut total = 0.0;
        self.compress_buf.clear();
        while let Some(parent) = self.clusters[cur].merged_into {
            self.compress_buf.push((cur, total));
            if let Some(up) = self.clusters[cur].skip_up {
                total += self.clusters[cur].skip_up_sum;
                cur = up;
            } else {
                total += self.clusters[cur].moat;
                cur = parent;
            }
        }
        for &(idx, before) in &self.compress_buf {
            self.clusters[idx].skip_up = Some(cur);
            self.clusters[idx].skip_up_sum = total - before;
        }
        let top = &self.clusters[cur];
        total += if top.active {
            self.now - top.active_start
        } else {
            top.moat
        };
        PartSum {
            covered: total,
            cluster: cur,
        }
    }

    fn bump(&mut self, part: usize) -> u32 {
        let p = &mut self.parts[part];
        p.version = p.version.wrapping_add(1);
        p.version
    }

    fn next_edge_event(&mut self) -> Option<(Time, usize, usize)> {
        while let Some(&Reverse((t, e, c))) = self.edge_events.peek() {
            if self.clusters[c].edge_event_key == Some((t, e)) {
                return Some((t, e, c));
            }
            self.edge_events.pop();
        }
        None
    }

    fn next_deactivation(&mut self) -> Option<(Time, usize)> {
        while let Some(&Reverse((t, c))) = self.deactivations.peek() {
            if self.clusters[c].deactivation_key == Some(t) {
                return Some((t, c));
            }
            self.deactivations.pop();
        }
        None
    }

    fn run(&mut self) {
        while self.num_active > self.inst.target_components {
            let edge_next = self.next_edge_event();
            let cluster_next = self.next_deactivation();
            let take_edge = match (edge_next, cluster_next) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some((te, _, _)), Some((tc, _))) => te.0 <= tc.0 + EVENT_TOLERANCE,
            };
            if take_edge {
                let (t, _, c) = edge_next.unwrap();
                // Entries go stale when parts are deleted from under them.
                match self.heap_peek(c) {
                    Some((live, _)) if live <= t.0 => {}
                    _ => {
                        self.refresh_edge_event(c);
                        continue;
                    }
                }
                self.now = self.now.max(t.0);
                self.edge_event(c);
            } else {
                let (t, c) = cluster_next.unwrap();
                self.now = self.now.max(t.0);
                self.deactivate(c);
            }
        }
    }

    fn edge_event(&mut self, c: usize) {
        let (_, part) = self
            .heap_peek(c)
            .expect("scheduled cluster has a pending edge part");
        self.clusters[c].heap = self.heaps.pop(self.clusters[c].heap);
        self.refresh_edge_event(c);
        let other_part = part ^ 1;
        let edge = part / 2;
        let cost = self.inst.edge_cost(edge);
        let here = self.sum_on_part(part);
        let there = self.sum_on_part(other_part);
        debug_assert_eq!(here.cluster, c);
        if here.cluster == there.cluster {
            self.parts[part].deleted = true;
            self.parts[other_part].deleted = true;
            return;
        }
        let remainder = cost - here.covered - there.covered;
        if remainder <= EVENT_TOLERANCE * cost.max(1.0) {
            self.parts[part].deleted = true;
            self.parts[other_part].deleted = true;
            self.merge(here.cluster, there.cluster, edge);
        } else if self.clusters[there.cluster].active {
            let t = self.now + remainder / 2.0;
            let v = self.bump(part);
            self.heap_push(here.cluster, t, part, v);
            let v = self.bump(other_part);
            self.heap_push(there.cluster, t, other_part, v);
            self.refresh_edge_event(here.cluster);
            self.refresh_edge_event(there.cluster);
        } else {
            let t = self.now + remainder;
            let v = self.bump(part);
            self.heap_push(here.cluster, t, part, v);
            self.refresh_edge_event(here.cluster);
            // Fires as soon as the inactive side is absorbed by a merge.
            let end = self.clusters[there.cluster].active_end;
            let v = self.bump(other_part);
            self.heap_push(there.cluster, end, other_part, v);
        }
    }

    fn merge(&mut self, a: usize, b: usize, edge: usize) {
        self.phase1_edges.push(edge);
        let new_idx = self.clusters.len();
        for &c in &[a, b] {
            if self.clusters[c].active {
                self.deactivate(c);
            } else {
                let shift = self.now - self.clusters[c].active_end;
                self.heaps.shift(self.clusters[c].heap, shift);
            }
            self.clusters[c].merged_into = Some(new_idx);
        }
        let heap_a = std::mem::replace(&mut self.clusters[a].heap, NIL);
        let heap_b = std::mem::replace(&mut self.clusters[b].heap, NIL);
        let (ca, cb) = (&self.clusters[a], &self.clusters[b]);
        let prize_sum = ca.prize_sum + cb.prize_sum;
        let subcluster_moat_sum =
            ca.subcluster_moat_sum + cb.subcluster_moat_sum + ca.moat + cb.moat;
        let mut merged = Cluster::singleton(prize_sum);
        merged.heap = self.heaps.link(heap_a, heap_b);
        merged.active_start = self.now;
        merged.subcluster_moat_sum = subcluster_moat_sum;
        merged.children = Some((a, b));
        let deactivate_at = Time(self.now + (prize_sum - subcluster_moat_sum).max(0.0));
        merged.deactivation_key = Some(deactivate_at);
        self.clusters.push(merged);
        self.deactivations.push(Reverse((deactivate_at, new_idx)));
        self.num_active += 1;
        self.refresh_edge_event(new_idx);
    }

    fn active_cluster_nodes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for (idx, c) in self.clusters.iter().enumerate() {
            if !c.active {
                continue;
            }
            let mut nodes = Vec::new();
            let mut stack = vec![idx];
            while let Some(k) = stack.pop() {
                match self.clusters[k].children {
                    Some((x, y)) => {
                        stack.push(x);
                        stack.push(y);
                    }
                    None => nodes.push(k),
                }
            }
            out.push(nodes);
        }
        out
    }
}

const NO_PARENT: usize = usize::MAX;

struct PruneScratch {
    parent: Vec<(usize, usize)>,
    value: Vec<f64>,
    full: Vec<f64>,
    order: Vec<usize>,
}

impl PruneScratch {
    fn new(p: usize) -> Self {
        Self {
            parent: vec![(NO_PARENT, NO_PARENT); p],
            value: vec![0.0; p],
            full: vec![0.0; p],
            order: Vec::new(),
        }
    }

    /// DFS from `root`; leaves `value[v]` as the best pruned subtree hanging
    /// from `v` (prize of `v` plus every child branch that pays for itself).
    fn root_at(&mut self, inst: &PcstInstance<'_>, root: usize, adjacency: &[Vec<(usize, usize)>]) {
        self.order.clear();
        self.parent[root] = (NO_PARENT, NO_PARENT);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            self.order.push(v);
            for &(w, e) in &adjacency[v] {
                if w != self.parent[v].0 {
                    self.parent[w] = (v, e);
                    stack.push(w);
                }
            }
        }
        for &v in &self.order {
            self.value[v] = inst.prizes[v];
        }
        for &v in self.order.iter().rev() {
            let (par, e) = self.parent[v];
            if par != NO_PARENT {
                let gain = self.value[v] - inst.edge_cost(e);
                if gain > 0.0 {
                    self.value[par] += gain;
                }
            }
        }
    }
}

/// Best connected subtree of a tree (node prizes minus edge costs), choosing
/// the root that maximizes the pruned objective.
fn strong_prune(
    inst: &PcstInstance<'_>,
    nodes: &[usize],
    adjacency: &[Vec<(usize, usize)>],
    scratch: &mut PruneScratch,
) -> Forest {
    let start = *nodes.iter().min().expect("non-empty tree");
    scratch.root_at(inst, start, adjacency);
    // Rerooting: full[v] is the best subtree value containing v.
    for i in 0..scratch.order.len() {
        let v = scratch.order[i];
        let (par, e) = scratch.parent[v];
        scratch.full[v] = if par == NO_PARENT {
            scratch.value[v]
        } else {
            let cost = inst.edge_cost(e);
            let own = (scratch.value[v] - cost).max(0.0);
            let rest = scratch.full[par] - own;
            scratch.value[v] + (rest - cost).max(0.0)
        };
    }
    let full = &scratch.full;
    let best_root = scratch
        .order
        .iter()
        .copied()
        .max_by(|&a, &b| full[a].total_cmp(&full[b]).then(b.cmp(&a)))
        .unwrap();

    scratch.root_at(inst, best_root, adjacency);
    let mut kept_nodes = vec![best_root];
    let mut kept_edges = Vec::new();
    let mut stack = vec![best_root];
    while let Some(v) = stack.pop() {
        for &(w, e) in &adjacency[v] {
            if scratch.parent[w].0 == v
                && w != scratch.parent[v].0
                && scratch.value[w] - inst.edge_cost(e) > 0.0
            {
                kept_nodes.push(w);
                kept_edges.push(e);
                stack.push(w);
            }
        }
    }
    kept_edges.sort_unstable();
    Forest {
        nodes: Support::new(kept_nodes),
        edges: kept_edges,
        objective: scratch.value[best_root],
    }
}

/// Solves the prize-collecting Steiner forest problem on `inst`, returning at
/// most `target_components` trees.
pub fn solve_pcst(inst: &PcstInstance<'_>) -> Result<Forest> {
    inst.validate()?;
    let mut growth = MoatGrowth::new(inst);
    growth.run();

    let p = inst.graph.num_nodes();
    let groups = growth.active_cluster_nodes();
    let mut good = vec![false; p];
    for group in &groups {
        for &v in group {
            good[v] = true;
        }
    }
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
    for &e in &growth.phase1_edges {
        let edge = inst.graph.edges()[e];
        if good[edge.u] && good[edge.v] {
            adjacency[edge.u].push((edge.v, e));
            adjacency[edge.v].push((edge.u, e));
        }
    }
    let mut scratch = PruneScratch::new(p);
    let mut trees: Vec<Forest> = groups
        .iter()
        .map(|group| strong_prune(inst, group, &adjacency, &mut scratch))
        .collect();
    trees.sort_by(|a, b| {
        b.objective
            .total_cmp(&a.objective)
            .then(a.nodes.indices()[0].cmp(&b.nodes.indices()[0]))
    });
    trees.truncate(inst.target_components);

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut objective = 0.0;
    for t in trees {
        nodes.extend_from_slice(t.nodes.indices());
        edges.extend(t.edges);
        objective += t.objective;
    }
    edges.sort_unstable();
    Ok(Forest {
        nodes: Support::new(nodes),
        edges,
        objective,
    })
}
