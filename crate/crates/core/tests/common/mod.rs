//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's algorithms, only its data types.

#![allow(dead_code)]

use graph_stoiht::graph::Graph;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn adjacency(graph: &Graph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); graph.num_nodes()];
    for e in graph.edges() {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    adj
}

fn is_connected(adj: &[Vec<usize>], nodes: &[usize]) -> bool {
    let Some(&first) = nodes.first() else {
        return true;
    };
    let mut seen = vec![first];
    let mut stack = vec![first];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if nodes.contains(&v) && !seen.contains(&v) {
                seen.push(v);
                stack.push(v);
            }
        }
    }
    seen.len() == nodes.len()
}

/// Every connected node set of exactly `size` nodes, by bitmask enumeration.
pub fn connected_subsets(graph: &Graph, size: usize) -> Vec<Vec<usize>> {
    let p = graph.num_nodes();
    assert!(p <= 20, "enumeration is exponential in p");
    let adj = adjacency(graph);
    (0u32..1 << p)
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..p).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|nodes| is_connected(&adj, nodes))
        .collect()
}

pub fn energy(x: &[f64], nodes: &[usize]) -> f64 {
    nodes.iter().map(|&i| x[i] * x[i]).sum()
}

/// Largest captured energy over `subsets`.
pub fn best_energy(x: &[f64], subsets: &[Vec<usize>]) -> f64 {
    subsets.iter().map(|s| energy(x, s)).fold(0.0, f64::max)
}

/// Gradient by central differences with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn lsq_value(rows: &[Vec<f64>], y: &[f64], x: &[f64]) -> f64 {
    let sum: f64 = rows
        .iter()
        .zip(y)
        .map(|(a, yi)| {
            let r: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - yi;
            r * r
        })
        .sum();
    sum / (2.0 * rows.len() as f64)
}

pub fn logistic_value(rows: &[Vec<f64>], y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let sum: f64 = rows
        .iter()
        .zip(y)
        .map(|(a, yi)| {
            let margin: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
            (1.0 + (-yi * margin).exp()).ln()
        })
        .sum();
    sum / rows.len() as f64 + 0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>()
}

/// Near-equal contiguous blocks: `max(1, m / b)` of them, longer ones first.
pub fn block_ranges(m: usize, b: usize) -> Vec<std::ops::Range<usize>> {
    let n = (m / b).max(1);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = m / n + usize::from(i < m % n);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Block visiting order: a fresh shuffle of all blocks every epoch, drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn block_order(n: usize, seed: u64, iterations: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(iterations);
    while out.len() < iterations {
        order.shuffle(&mut rng);
        out.extend_from_slice(&order);
    }
    out.truncate(iterations);
    out
}

/// Plain stochastic IHT: gradient step on one block, keep the `s` largest
/// magnitudes. Returns the sorted support after every iteration.
pub fn reference_sto_iht(
    rows: &[Vec<f64>],
    y: &[f64],
    s: usize,
    b: usize,
    eta: f64,
    seed: u64,
    iterations: usize,
) -> Vec<Vec<usize>> {
    let p = rows[0].len();
    let ranges = block_ranges(rows.len(), b);
    let mut x = vec![0.0; p];
    let mut supports = Vec::with_capacity(iterations);
    for block in block_order(ranges.len(), seed, iterations) {
        let r = ranges[block].clone();
        let len = r.len() as f64;
        let mut grad = vec![0.0; p];
        for j in r {
            let resid: f64 = rows[j].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() - y[j];
            for (g, a) in grad.iter_mut().zip(&rows[j]) {
                *g += a * resid / len;
            }
        }
        let z: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - eta * g).collect();
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&i, &j| z[j].abs().total_cmp(&z[i].abs()).then(i.cmp(&j)));
        let mut keep = idx[..s].to_vec();
        keep.sort_unstable();
        x = vec![0.0; p];
        for &i in &keep {
            x[i] = z[i];
        }
        supports.push(keep);
    }
    supports
}

/// Area under the ROC curve by counting correctly ordered pairs; ties count half.
pub fn pairwise_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut good, mut total) = (0.0, 0.0);
    for (si, li) in scores.iter().zip(labels) {
        if *li <= 0.0 {
            continue;
        }
        for (sj, lj) in scores.iter().zip(labels) {
            if *lj > 0.0 {
                continue;
            }
            total += 1.0;
            if si > sj {
                good += 1.0;
            } else if si == sj {
                good += 0.5;
            }
        }
    }
    good / total
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cheapest forest over exactly `nodes` with at most `g` trees: Kruskal on
/// the induced subgraph, stopped once only `g` trees remain. `None` if the
/// induced subgraph has more than `g` components.
pub fn forest_cost(graph: &Graph, nodes: &[usize], g: usize) -> Option<f64> {
    let mut parent: Vec<usize> = (0..graph.num_nodes()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges: Vec<(f64, usize, usize)> = graph
        .edges()
        .iter()
        .filter(|e| nodes.contains(&e.u) && nodes.contains(&e.v))
        .map(|e| (e.weight, e.u, e.v))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut trees = nodes.len();
    let mut cost = 0.0;
    for (w, u, v) in edges {
        if trees <= g.max(1) {
            break;
        }
        let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            trees -= 1;
            cost += w;
        }
    }
    (trees <= g.max(1)).then_some(cost)
}

/// Optimal prize-collecting penalty (forest cost plus missed prize) with at
/// most `g` trees, over every node subset.
pub fn brute_force_penalty(graph: &Graph, prizes: &[f64], g: usize) -> f64 {
    let p = graph.num_nodes();
    assert!(p <= 16, "enumeration is exponential in p");
    let total: f64 = prizes.iter().sum();
    let mut best = total;
    for mask in 1u32..(1 << p) {
        let nodes: Vec<usize> = (0..p).filter(|i| mask >> i & 1 == 1).collect();
        if let Some(cost) = forest_cost(graph, &nodes, g) {
            let kept: f64 = nodes.iter().map(|&i| prizes[i]).sum();
            best = best.min(cost + total - kept);
        }
    }
    best
}
