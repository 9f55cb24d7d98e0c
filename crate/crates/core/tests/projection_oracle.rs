mod common;

use common::{best_energy, connected_subsets, energy};
use graph_stoiht::graph::{grid_graph, is_in_wgm, Graph, WgmParams};
use graph_stoiht::projection::{
    head_projection, restrict, squared_norm, tail_projection, ProjectionConfig, ProjectionResult,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Frozen regression floors from the worst ratios seen over the inputs below.
const HEAD_FLOOR: f64 = 0.25;
const TAIL_CEILING: f64 = 4.0;

fn wgm(s: usize) -> WgmParams {
    WgmParams::new(s, 1, f64::INFINITY).unwrap()
}

/// Dense Gaussian inputs alternate with a planted connected bump plus noise.
fn random_input(rng: &mut ChaCha8Rng, graph: &Graph, subsets: &[Vec<usize>]) -> Vec<f64> {
    let p = graph.num_nodes();
    let mut x: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if rng.gen_bool(0.5) {
        let bump = &subsets[rng.gen_range(0..subsets.len())];
        for v in x.iter_mut() {
            *v *= 0.3;
        }
        for &i in bump {
            x[i] += if rng.gen_bool(0.5) { 2.0 } else { -2.0 };
        }
    }
    x
}

fn assert_pythagorean(x: &[f64], r: &ProjectionResult) {
    let kept = squared_norm(&restrict(x, &r.support));
    let resid: f64 = x.iter().zip(&r.vector).map(|(a, b)| (a - b).powi(2)).sum();
    let total = squared_norm(x);
    assert!((total - kept - resid).abs() <= 1e-10 * total.max(f64::MIN_POSITIVE));
    assert_eq!(r.vector, restrict(x, &r.support));
    assert_eq!(r.achieved_sparsity, r.support.len());
}

struct Worst {
    head: f64,
    tail: f64,
}

fn run_grid(rows: usize, cols: usize, s: usize, inputs: usize, seed: u64) -> Worst {
    let graph = grid_graph(rows, cols).unwrap();
    let subsets = connected_subsets(&graph, s);
    let head_cfg = ProjectionConfig::head_at_sparsity(wgm(s)).unwrap();
    let tail_cfg = ProjectionConfig::tail(wgm(s)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst { head: f64::INFINITY, tail: 0.0 };
    for _ in 0..inputs {
        let x = random_input(&mut rng, &graph, &subsets);
        let total = squared_norm(&x);
        let best = best_energy(&x, &subsets);

        let head = head_projection(&x, &graph, &head_cfg).unwrap();
        assert_pythagorean(&x, &head);
        worst.head = worst.head.min(energy(&x, head.support.indices()) / best);

        let tail = tail_projection(&x, &graph, &tail_cfg).unwrap();
        assert_pythagorean(&x, &tail);
        assert!(is_in_wgm(&graph, &tail.support, &tail_cfg.output_model()).unwrap());
        let resid = total - energy(&x, tail.support.indices());
        worst.tail = worst.tail.max(resid / (total - best));
    }
    worst
}

#[test]
fn head_and_tail_against_brute_force() {
    for (rows, cols) in [(3, 3), (4, 4)] {
        for s in [2, 3] {
            let w = run_grid(rows, cols, s, 1000, (rows * 10 + s) as u64);
            eprintln!("{rows}x{cols} s={s}: worst head ratio {:.4}, worst tail ratio {:.4}", w.head, w.tail);
            assert!(w.head >= HEAD_FLOOR, "head ratio {}", w.head);
            assert!(w.tail <= TAIL_CEILING, "tail ratio {}", w.tail);
        }
    }
}

#[test]
fn default_head_window_captures_at_least_the_best_s_set() {
    // With the window at p/2 the head keeps far more than s nodes.
    let graph = grid_graph(4, 4).unwrap();
    let subsets = connected_subsets(&graph, 3);
    let cfg = ProjectionConfig::head(16, wgm(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x = random_input(&mut rng, &graph, &subsets);
        let r = head_projection(&x, &graph, &cfg).unwrap();
        assert_pythagorean(&x, &r);
        assert!(energy(&x, r.support.indices()) >= HEAD_FLOOR * best_energy(&x, &subsets));
    }
}

#[test]
fn energy_maximizer_is_residual_minimizer() {
    let graph = grid_graph(3, 3).unwrap();
    let subsets = connected_subsets(&graph, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let x: Vec<f64> = (0..9).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let total = squared_norm(&x);
        let by_energy = subsets
            .iter()
            .max_by(|a, b| energy(&x, a).total_cmp(&energy(&x, b)))
            .unwrap();
        let by_residual = subsets
            .iter()
            .min_by(|a, b| (total - energy(&x, a)).total_cmp(&(total - energy(&x, b))))
            .unwrap();
        assert_eq!(by_energy, by_residual);
    }
}

#[test]
fn brute_force_enumeration_counts() {
    // Connected pairs are edges; connected triples on a 3x3 grid are paths of
    // three (straight or bent) counted by their middle node's neighbor pairs.
    let graph = grid_graph(3, 3).unwrap();
    assert_eq!(connected_subsets(&graph, 2).len(), 12);
    let triples: usize = (0..9)
        .map(|v| {
            let d = graph.degree(v);
            d * (d - 1) / 2
        })
        .sum();
    assert_eq!(connected_subsets(&graph, 3).len(), triples);
}
