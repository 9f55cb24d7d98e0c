//! Head and tail approximate projections onto the weighted graph model.
//!
//! Both are a bisection over a multiplicative scale on the edge costs of a
//! prize-collecting Steiner forest instance whose prizes are the squared
//! entries of the input: cheap edges yield large forests, expensive ones
//! yield a few high-prize nodes. The search stops as soon as the forest size
//! lands in `[sparsity_low, sparsity_high]`.

use crate::error::{invalid, Result};
use crate::graph::{Graph, Support, WgmParams};
use crate::pcst::{solve_pcst, Forest, PcstInstance};

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_MAX_BINARY_ITERS: usize = 50;
pub const COST_SCALE_MIN: f64 = 1e-6;
pub const COST_SCALE_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionConfig {
    pub kind: ProjectionKind,
    pub sparsity_low: usize,
    pub sparsity_high: usize,
    pub tolerance: f64,
    pub max_binary_iters: usize,
    pub wgm: WgmParams,
}

impl ProjectionConfig {
    pub fn new(
        kind: ProjectionKind,
        sparsity_low: usize,
        tolerance: f64,
        max_binary_iters: usize,
        wgm: WgmParams,
    ) -> Result<Self> {
        if sparsity_low == 0 {
            return invalid("lower sparsity must be positive");
        }
        if !(tolerance >= 0.0) {
            return invalid(format!("tolerance must be nonnegative, got {tolerance}"));
        }
        if max_binary_iters == 0 {
            return invalid("at least one bisection step is required");
        }
        let sparsity_high = (sparsity_low as f64 * (1.0 + tolerance)).round() as usize;
        Ok(Self {
            kind,
            sparsity_low,
            sparsity_high,
            tolerance,
            max_binary_iters,
            wgm,
        })
    }

    /// Head bounds: `s_l = p / 2`, `s_u = s_l (1 + ω)`.
    pub fn head(p: usize, wgm: WgmParams) -> Result<Self> {
        Self::new(
            ProjectionKind::Head,
            (p / 2).max(1),
            DEFAULT_TOLERANCE,
            DEFAULT_MAX_BINARY_ITERS,
            wgm,
        )
    }

    /// Head bounds placed at the model sparsity instead of `p / 2`.
    pub fn head_at_sparsity(wgm: WgmParams) -> Result<Self> {
        Self::new(
            ProjectionKind::Head,
            wgm.sparsity,
            DEFAULT_TOLERANCE,
            DEFAULT_MAX_BINARY_ITERS,
            wgm,
        )
    }

    /// Tail bounds: `s_l = s`, `s_u = s (1 + ω)`.
    pub fn tail(wgm: WgmParams) -> Result<Self> {
        Self::new(
            ProjectionKind::Tail,
            wgm.sparsity,
            DEFAULT_TOLERANCE,
            DEFAULT_MAX_BINARY_ITERS,
            wgm,
        )
    }

    /// Model parameters the tail output is guaranteed to satisfy on unit
    /// weight graphs.
    pub fn output_model(&self) -> WgmParams {
        WgmParams {
            sparsity: self.sparsity_high,
            components: self.wgm.components,
            budget: self.wgm.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub support: Support,
    pub vector: Vec<f64>,
    pub achieved_sparsity: usize,
    pub iterations_used: usize,
}

impl ProjectionResult {
    fn from_support(x: &[f64], support: Support, iterations_used: usize) -> Self {
        let vector = restrict(x, &support);
        Self {
            achieved_sparsity: support.len(),
            support,
            vector,
            iterations_used,
        }
    }
}

/// Copy of `x` with every entry outside `support` set to zero.
pub fn restrict(x: &[f64], support: &Support) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for &i in support.indices() {
        out[i] = x[i];
    }
    out
}

pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Keeps the `s` largest-magnitude entries; ties go to the lower index.
pub fn top_s_projection(x: &[f64], s: usize) -> ProjectionResult {
    let s = s.min(x.len());
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(s);
    ProjectionResult::from_support(x, Support::new(order), 0)
}

pub fn head_projection(
    x: &[f64],
    graph: &Graph,
    config: &ProjectionConfig,
) -> Result<ProjectionResult> {
    if config.kind != ProjectionKind::Head {
        return invalid("head projection called with a tail configuration");
    }
    bisect(x, graph, config)
}

pub fn tail_projection(
    x: &[f64],
    graph: &Graph,
    config: &ProjectionConfig,
) -> Result<ProjectionResult> {
    if config.kind != ProjectionKind::Tail {
        return invalid("tail projection called with a head configuration");
    }
    bisect(x, graph, config)
}

fn bisect(x: &[f64], graph: &Graph, config: &ProjectionConfig) -> Result<ProjectionResult> {
    let p = graph.num_nodes();
    if x.len() != p {
        return invalid(format!("vector of length {} for a graph of {p} nodes", x.len()));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return invalid(format!("non-finite entry {bad} in projection input"));
    }
    let peak = x.iter().map(|v| v * v).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(ProjectionResult::from_support(x, Support::empty(), 0));
    }
    // Projections are scale invariant; normalizing keeps the cost-scale
    // bracket meaningful whatever the magnitude of x.
    let prizes: Vec<f64> = x.iter().map(|v| v * v / peak).collect();
    let nonzeros = prizes.iter().filter(|v| **v > 0.0).count();
    let (low, high) = (config.sparsity_low, config.sparsity_high);
    let g = config.wgm.components;

    let mut calls = 0;
    let run = |scale: f64| -> Result<Forest> {
        solve_pcst(&PcstInstance {
            graph,
            prizes: &prizes,
            target_components: g,
            cost_scale: scale,
        })
    };

    // On the cap: the smallest forest reaching the lower bound, or failing
    // that the largest one seen, trimmed back to the upper bound.
    let mut above: Option<Forest> = None;
    let mut largest: Option<Forest> = None;
    let mut record = |f: &Forest| {
        let k = f.nodes.len();
        if k >= low && above.as_ref().map_or(true, |b| k < b.nodes.len()) {
            above = Some(f.clone());
        }
        if largest.as_ref().map_or(true, |b| k > b.nodes.len()) {
            largest = Some(f.clone());
        }
    };

    let (mut lo, mut hi) = (COST_SCALE_MIN.ln(), COST_SCALE_MAX.ln());
    if nonzeros <= high {
        // Few enough nonzeros that the cheapest forest may already fit.
        let f = run(COST_SCALE_MIN)?;
        calls += 1;
        if f.nodes.len() <= high {
            return Ok(ProjectionResult::from_support(x, f.nodes, calls));
        }
        record(&f);
    }
    while calls < config.max_binary_iters {
        let mid = 0.5 * (lo + hi);
        let f = run(mid.exp())?;
        calls += 1;
        let k = f.nodes.len();
        if (low..=high).contains(&k) {
            return Ok(ProjectionResult::from_support(x, f.nodes, calls));
        }
        if k > high {
            lo = mid;
        } else {
            hi = mid;
        }
        record(&f);
    }
    let chosen = above.or(largest).expect("at least one forest evaluated");
    let nodes = shrink_to(&chosen, &prizes, graph, high);
    Ok(ProjectionResult::from_support(x, nodes, calls))
}

/// Drops lowest-prize leaves until at most `limit` nodes remain. Leaf
/// removal never splits a tree, so the component count cannot grow.
fn shrink_to(forest: &Forest, prizes: &[f64], graph: &Graph, limit: usize) -> Support {
    let mut nodes = forest.nodes.indices().to_vec();
    if nodes.len() <= limit {
        return forest.nodes.clone();
    }
    let mut edges: Vec<(usize, usize)> = forest.edges.iter().map(|&e| (graph.edges()[e].u, graph.edges()[e].v)).collect();
    while nodes.len() > limit {
        let degree = |n: usize| edges.iter().filter(|&&(u, v)| u == n || v == n).count();
        let leaf = *nodes
            .iter()
            .filter(|&&n| degree(n) <= 1)
            .min_by(|&&a, &&b| prizes[a].total_cmp(&prizes[b]).then(a.cmp(&b)))
            .expect("a finite forest has a leaf");
        nodes.retain(|&n| n != leaf);
        edges.retain(|&(u, v)| u != leaf && v != leaf);
    }
    Support::new(nodes)
}
