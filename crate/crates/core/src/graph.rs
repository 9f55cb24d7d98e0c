//! Underlying graph, the weighted graph model and support sets.
//!
//! A support is in the `(G, s, g, C)` weighted graph model when it has at
//! most `s` nodes, induces at most `g` connected components and the minimum
//! spanning forest of the induced subgraph weighs at most `C`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph over the coefficient indices `0..p`.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    // (neighbor, edge index)
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        if num_nodes == 0 {
            return invalid("graph must have at least one node");
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); num_nodes];
        for (idx, e) in edges.iter().enumerate() {
            if e.u >= num_nodes || e.v >= num_nodes {
                return invalid(format!(
                    "edge {idx} ({}, {}) out of range for {num_nodes} nodes",
                    e.u, e.v
                ));
            }
            if e.u == e.v {
                return invalid(format!("edge {idx} is a self-loop on node {}", e.u));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid(format!("edge {idx} has invalid weight {}", e.weight));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return invalid(format!("duplicate edge ({}, {})", e.u, e.v));
            }
            adjacency[e.u].push((e.v, idx));
            adjacency[e.v].push((e.u, idx));
        }
        Ok(Self {
            num_nodes,
            edges,
            adjacency,
        })
    }

    /// Builds a graph from `(u, v)` pairs with unit weights.
    pub fn unit_weight(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(u, v)| Edge { u, v, weight: 1.0 })
            .collect();
        Self::new(num_nodes, edges)
    }

    /// Every pair of nodes adjacent, unit weights.
    pub fn complete(num_nodes: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for u in 0..num_nodes {
            for v in (u + 1)..num_nodes {
                pairs.push((u, v));
            }
        }
        Self::unit_weight(num_nodes, &pairs)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node].iter().map(|&(v, _)| v)
    }

    /// Neighbors paired with the index of the connecting edge.
    pub fn incident(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text, &path.display().to_string())
    }

    /// Parses the edge-list text format: a `p <num_nodes>` header followed
    /// by one `u v weight` triple per line. Blank lines and `#` comments are
    /// skipped.
    pub fn parse_edge_list(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut num_nodes = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match num_nodes {
                None => {
                    if fields.len() != 2 || fields[0] != "p" {
                        return Err(parse_err(line_no, "expected header `p <num_nodes>`".into()));
                    }
                    let p = fields[1]
                        .parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad node count: {e}")))?;
                    num_nodes = Some(p);
                }
                Some(_) => {
                    if fields.len() != 3 {
                        return Err(parse_err(line_no, "expected `u v weight`".into()));
                    }
                    let u = fields[0]
                        .parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad node index: {e}")))?;
                    let v = fields[1]
                        .parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad node index: {e}")))?;
                    let weight = fields[2]
                        .parse::<f64>()
                        .map_err(|e| parse_err(line_no, format!("bad weight: {e}")))?;
                    edges.push(Edge { u, v, weight });
                }
            }
        }
        let num_nodes = num_nodes.ok_or_else(|| parse_err(0, "missing header".into()))?;
        Self::new(num_nodes, edges).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("p {}\n", self.num_nodes);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.weight);
        }
        out
    }
}

/// `(s, g, C)`: sparsity, maximum component count and weight budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgmParams {
    pub sparsity: usize,
    pub components: usize,
    pub budget: f64,
}

impl WgmParams {
    pub fn new(sparsity: usize, components: usize, budget: f64) -> Result<Self> {
        if components == 0 || sparsity == 0 {
            return invalid("sparsity and component count must be positive");
        }
        if components > sparsity {
            return invalid(format!(
                "component count {components} exceeds sparsity {sparsity}"
            ));
        }
        if !(budget >= 0.0) {
            return invalid(format!("weight budget must be nonnegative, got {budget}"));
        }
        Ok(Self {
            sparsity,
            components,
            budget,
        })
    }

    /// Checks `s <= p` against a concrete graph.
    pub fn validate_for(&self, graph: &Graph) -> Result<()> {
        if self.sparsity > graph.num_nodes() {
            return invalid(format!(
                "sparsity {} exceeds node count {}",
                self.sparsity,
                graph.num_nodes()
            ));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free set of node indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Support(indices)
    }

    pub fn empty() -> Self {
        Support(Vec::new())
    }

    pub fn full(p: usize) -> Self {
        Support((0..p).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    pub fn check_bounds(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= p => {
                invalid(format!("support index {last} out of range for length {p}"))
            }
            _ => Ok(()),
        }
    }

    /// `|A ∩ B| / |A ∪ B|`; 1 for two empty sets.
    pub fn jaccard(&self, other: &Support) -> f64 {
        let inter = self.0.iter().filter(|&&i| other.contains(i)).count();
        let union = self.len() + other.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Indices of the nonzero entries of `x`.
    pub fn of_nonzeros(x: &[f64]) -> Self {
        Support(
            x.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

impl FromIterator<usize> for Support {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Support::new(iter.into_iter().collect())
    }
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Grid of `rows × cols` nodes, 4-connected, unit edge weights. Node `(r, c)`
/// has index `r * cols + c`.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return invalid(format!("grid dimensions must be positive, got {rows}x{cols}"));
    }
    let mut pairs = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            if c + 1 < cols {
                pairs.push((idx, idx + 1));
            }
            if r + 1 < rows {
                pairs.push((idx, idx + cols));
            }
        }
    }
    Graph::unit_weight(rows * cols, &pairs)
}

/// Index of the center node of a grid, rounding down on even sides.
pub fn grid_center(rows: usize, cols: usize) -> usize {
    (rows / 2) * cols + cols / 2
}

fn induced_mask(graph: &Graph, support: &Support) -> Result<Vec<bool>> {
    support.check_bounds(graph.num_nodes())?;
    let mut mask = vec![false; graph.num_nodes()];
    for &i in support.indices() {
        mask[i] = true;
    }
    Ok(mask)
}

/// Number of connected components of the subgraph induced by `support`.
pub fn connected_component_count(graph: &Graph, support: &Support) -> Result<usize> {
    let mask = induced_mask(graph, support)?;
    let mut sets = DisjointSets::new(graph.num_nodes());
    let mut components = support.len();
    for e in graph.edges() {
        if mask[e.u] && mask[e.v] && sets.union(e.u, e.v) {
            components -= 1;
        }
    }
    Ok(components)
}

/// Weight of a minimum spanning forest of the induced subgraph (Kruskal).
pub fn spanning_forest_weight(graph: &Graph, support: &Support) -> Result<f64> {
    let mask = induced_mask(graph, support)?;
    let mut inner: Vec<&Edge> = graph
        .edges()
        .iter()
        .filter(|e| mask[e.u] && mask[e.v])
        .collect();
    inner.sort_by(|a, b| a.weight.total_cmp(&b.weight));
    let mut sets = DisjointSets::new(graph.num_nodes());
    Ok(inner
        .into_iter()
        .filter(|e| sets.union(e.u, e.v))
        .map(|e| e.weight)
        .sum())
}

pub fn is_in_wgm(graph: &Graph, support: &Support, params: &WgmParams) -> Result<bool> {
    support.check_bounds(graph.num_nodes())?;
    if support.len() > params.sparsity {
        return Ok(false);
    }
    if connected_component_count(graph, support)? > params.components {
        return Ok(false);
    }
    Ok(spanning_forest_weight(graph, support)? <= params.budget)
}

/// Random walk from `start` moving to a uniformly chosen neighbor until `s`
/// distinct nodes are visited. Gives up after `100 * s` steps.
pub fn random_walk_support<R: Rng + ?Sized>(
    graph: &Graph,
    start: usize,
    s: usize,
    rng: &mut R,
) -> Result<Support> {
    let p = graph.num_nodes();
    if s == 0 || s > p {
        return invalid(format!("walk length {s} must be in 1..={p}"));
    }
    if start >= p {
        return invalid(format!("start node {start} out of range"));
    }
    let mut visited = vec![false; p];
    visited[start] = true;
    let mut count = 1;
    let mut current = start;
    let cap = 100 * s;
    let mut steps = 0;
    while count < s {
        if steps >= cap {
            return Err(Error::GenerationFailure(format!(
                "visited {count} of {s} nodes after {cap} steps"
            )));
        }
        let nbrs = graph.incident(current);
        if nbrs.is_empty() {
            return Err(Error::GenerationFailure(format!(
                "walk stuck on isolated node {current}"
            )));
        }
        current = nbrs[rng.gen_range(0..nbrs.len())].0;
        if !visited[current] {
            visited[current] = true;
            count += 1;
        }
        steps += 1;
    }
    Ok(visited
        .iter()
        .enumerate()
        .filter(|(_, v)| **v)
        .map(|(i, _)| i)
        .collect())
}
