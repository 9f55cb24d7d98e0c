//! Synthetic recovery experiments: recovery curves and the block size,
//! learning rate and noise sweeps.
//!
//! Trial `k` of every grid point draws its instance from the RNG stream
//! `(seed, k)`, so all solvers at a point see the same instances and the
//! results do not depend on how trials are scheduled.

use std::time::Instant;

use rand::Rng;

use crate::config::{parse_range_list, Config};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, trial_rng, Execution};
use crate::graph::{grid_center, grid_graph, Graph, Support, WgmParams};
use crate::metrics::{mean, probability_of_recovery, std_dev, trimmed_trials};
use crate::report::{Report, Row};
use crate::solver::{solve, Loss, Method, SolveTrace, SolverConfig, StepSize, DEFAULT_MAX_EPOCHS};
use crate::synth::{synth_instance, synth_on_support, DesignScale, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RecoveryCurve,
    BlockSize,
    LearningRate,
    Noise,
    /// Recovery curve on a user-supplied graph and support.
    BenchmarkGraphs,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RecoveryCurve => "recovery_curve",
            ExperimentKind::BlockSize => "block_size",
            ExperimentKind::LearningRate => "learning_rate",
            ExperimentKind::Noise => "noise",
            ExperimentKind::BenchmarkGraphs => "benchmark_graphs",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "recovery_curve" => ExperimentKind::RecoveryCurve,
            "block_size" => ExperimentKind::BlockSize,
            "learning_rate" => ExperimentKind::LearningRate,
            "noise" => ExperimentKind::Noise,
            "benchmark_graphs" => ExperimentKind::BenchmarkGraphs,
            other => return invalid(format!("unknown experiment kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRule {
    Fixed(usize),
    /// `b = min(s, m)`.
    MinSparsity,
}

impl BlockRule {
    pub fn block_size(self, s: usize, m: usize) -> usize {
        match self {
            BlockRule::Fixed(b) => b.min(m),
            BlockRule::MinSparsity => s.min(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    /// Random-walk support from this node.
    RandomWalk { start: usize },
    Fixed(Support),
}

/// Tuning of `b` and `η` on separate validation instances before a
/// benchmark-graph run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub num_obs: usize,
    pub trials: usize,
}

pub const DEFAULT_VALIDATION_TRIALS: usize = 10;

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub graph: Graph,
    pub signal: Signal,
    pub sparsities: Vec<usize>,
    pub m_values: Vec<usize>,
    /// Swept in block-size and noise experiments, tuned over for benchmarks.
    pub block_sizes: Vec<usize>,
    /// Swept in learning-rate experiments, tuned over for benchmarks.
    pub etas: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub block_rule: BlockRule,
    pub eta: f64,
    pub noise: f64,
    pub trials: usize,
    pub trim: f64,
    pub seed: u64,
    pub max_epochs: usize,
    /// Number of epochs reported on error-vs-epoch curves.
    pub curve_epochs: usize,
    pub threshold: f64,
    /// Success threshold for noisy runs.
    pub noisy_threshold: f64,
    pub design_scale: DesignScale,
    pub iid_sampling: bool,
    pub execution: Execution,
    pub validation: Option<Validation>,
}

impl ExperimentSpec {
    /// Defaults for `kind` on a `rows × cols` grid with the walk starting at
    /// the center node.
    pub fn grid(kind: ExperimentKind, rows: usize, cols: usize) -> Result<Self> {
        let graph = grid_graph(rows, cols)?;
        let mut spec = Self {
            kind,
            graph,
            signal: Signal::RandomWalk { start: grid_center(rows, cols) },
            sparsities: vec![8],
            m_values: vec![180],
            block_sizes: vec![8],
            etas: vec![1.0],
            noise_levels: vec![0.0, 0.5],
            methods: vec![Method::GraphStoIht],
            block_rule: BlockRule::Fixed(8),
            eta: 1.0,
            noise: 0.0,
            trials: 50,
            trim: 0.05,
            seed: 0,
            max_epochs: DEFAULT_MAX_EPOCHS,
            curve_epochs: 30,
            threshold: 1e-6,
            noisy_threshold: 0.5,
            design_scale: DesignScale::default(),
            iid_sampling: false,
            execution: Execution::default(),
            validation: None,
        };
        match kind {
            ExperimentKind::RecoveryCurve | ExperimentKind::BenchmarkGraphs => {
                spec.sparsities = vec![8, 20, 28, 36];
                spec.m_values = (5..=250).step_by(5).collect();
                spec.methods = Method::ALL.to_vec();
                spec.block_rule = BlockRule::MinSparsity;
            }
            ExperimentKind::BlockSize => {
                spec.block_sizes = vec![1, 2, 4, 8, 16, 24, 32, 40, 48, 56, 64, 180];
            }
            ExperimentKind::LearningRate => {
                spec.m_values = vec![80];
                spec.etas = (1..=16).map(|k| k as f64 / 10.0).collect();
            }
            ExperimentKind::Noise => {
                spec.block_sizes = (2..=64).step_by(2).collect();
                spec.m_values = (5..=250).step_by(5).collect();
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return invalid("no solvers selected");
        }
        for (name, empty) in [
            ("sparsity", self.sparsities.is_empty()),
            ("m", self.m_values.is_empty()),
            ("block size", self.block_sizes.is_empty()),
            ("learning rate", self.etas.is_empty()),
            ("noise", self.noise_levels.is_empty()),
        ] {
            if empty {
                return invalid(format!("{name} grid is empty"));
            }
        }
        if self.m_values.contains(&0) || self.block_sizes.contains(&0) {
            return invalid("m and block sizes must be positive");
        }
        if let BlockRule::Fixed(0) = self.block_rule {
            return invalid("block size must be positive");
        }
        if self.etas.iter().chain([&self.eta]).any(|&e| !(e > 0.0)) {
            return invalid("learning rates must be positive");
        }
        if self.noise_levels.iter().chain([&self.noise]).any(|&e| !(e >= 0.0)) {
            return invalid("noise levels must be nonnegative");
        }
        if let Signal::Fixed(support) = &self.signal {
            support.check_bounds(self.graph.num_nodes())?;
            if support.is_empty() {
                return invalid("benchmark support is empty");
            }
        }
        trimmed_trials(&vec![0.0; self.trials], self.trim)?;
        Ok(())
    }

    fn sparsity_levels(&self) -> Vec<usize> {
        match &self.signal {
            Signal::Fixed(support) => vec![support.len()],
            Signal::RandomWalk { .. } => self.sparsities.clone(),
        }
    }

    fn threshold_for(&self, noise: f64) -> f64 {
        if noise > 0.0 {
            self.noisy_threshold
        } else {
            self.threshold
        }
    }
}

/// One solver run at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPoint {
    pub sparsity: usize,
    pub num_obs: usize,
    pub block_size: usize,
    pub eta: f64,
    pub noise: f64,
    pub method: Method,
    pub max_epochs: usize,
}

/// Generates trial `trial`'s instance for `point` and solves it.
pub fn run_trial(spec: &ExperimentSpec, point: &TrialPoint, trial: usize) -> Result<SolveTrace> {
    let mut rng = trial_rng(spec.seed, trial as u64);
    let inst = match &spec.signal {
        Signal::RandomWalk { start } => synth_instance(
            &SynthSpec {
                graph: &spec.graph,
                start: *start,
                sparsity: point.sparsity,
                num_obs: point.num_obs,
                noise_norm: point.noise,
                design_scale: spec.design_scale,
            },
            &mut rng,
        )?,
        Signal::Fixed(support) => synth_on_support(
            spec.graph.num_nodes(),
            support,
            point.num_obs,
            point.noise,
            spec.design_scale,
            &mut rng,
        )?,
    };
    let wgm = WgmParams::new(point.sparsity, 1, f64::INFINITY)?;
    let mut config = SolverConfig::new(point.method, spec.graph.num_nodes(), wgm, point.block_size)?;
    config.step = StepSize::Constant(point.eta);
    config.max_epochs = point.max_epochs;
    config.seed = rng.gen();
    config.iid_sampling = spec.iid_sampling;
    solve(&inst, &Loss::LeastSquares, &config, &spec.graph)
}

/// Runs every `(point, trial)` pair through the work pool. Failed trials
/// come back as `Err` in their slot.
fn run_grid(spec: &ExperimentSpec, points: &[TrialPoint]) -> Vec<Vec<Result<SolveTrace>>> {
    let trials = spec.trials;
    let flat = map_indexed(points.len() * trials, spec.execution, |job| {
        run_trial(spec, &points[job / trials], job % trials)
    });
    let mut out: Vec<Vec<Result<SolveTrace>>> = Vec::with_capacity(points.len());
    let mut it = flat.into_iter();
    for _ in points {
        out.push(it.by_ref().take(trials).collect());
    }
    out
}

fn final_errors(results: &[Result<SolveTrace>]) -> (Vec<f64>, usize) {
    let mut failures = 0;
    let errors = results
        .iter()
        .map(|r| match r.as_ref().ok().and_then(SolveTrace::final_error) {
            Some(e) => e,
            None => {
                failures += 1;
                f64::INFINITY
            }
        })
        .collect();
    (errors, failures)
}

/// Recovery probability over trimmed trials and the standard deviation of
/// the success indicator.
fn recovery_stats(errors: &[f64], trim: f64, threshold: f64) -> Result<(f64, f64)> {
    let kept = trimmed_trials(errors, trim)?;
    let hits: Vec<f64> = kept.iter().map(|&e| f64::from(u8::from(e <= threshold))).collect();
    Ok((probability_of_recovery(&kept, threshold), std_dev(&hits)))
}

/// Per-epoch error curve padded with its last value up to `epochs`.
fn padded_curve(trace: &SolveTrace, epochs: usize) -> Vec<f64> {
    let mut curve = trace.estimation_errors.clone();
    let last = curve.last().copied().unwrap_or(f64::INFINITY);
    curve.resize(epochs + 1, last);
    curve.truncate(epochs + 1);
    curve
}

pub fn run_experiment(spec: &ExperimentSpec, config_text: &str) -> Result<Report> {
    spec.validate()?;
    let started = Instant::now();
    let mut report = Report::new(spec.seed, config_text);
    report.note("kind", spec.kind.name());
    report.note("trials", spec.trials);
    report.note("design_scale", format!("{:?}", spec.design_scale));
    let failures = match spec.kind {
        ExperimentKind::RecoveryCurve | ExperimentKind::BenchmarkGraphs => {
            run_recovery_curve(spec, &mut report)?
        }
        ExperimentKind::BlockSize | ExperimentKind::LearningRate => run_curves(spec, &mut report)?,
        ExperimentKind::Noise => run_noise(spec, &mut report)?,
    };
    report.note("failed_trials", failures);
    report.sort();
    report.wall_time = started.elapsed();
    Ok(report)
}

/// Picks `(b, η)` with the smallest mean final error on validation
/// instances drawn from a separate seed; ties keep the earlier grid entry.
pub fn tune_on_validation(spec: &ExperimentSpec, v: Validation, sparsity: usize) -> Result<(usize, f64)> {
    let mut tuning = spec.clone();
    tuning.seed = spec.seed ^ 0x5eed_0f_7a11_da7e;
    tuning.trials = v.trials;
    let mut points = Vec::new();
    for &b in &spec.block_sizes {
        for &eta in &spec.etas {
            points.push(TrialPoint {
                sparsity,
                num_obs: v.num_obs,
                block_size: b.min(v.num_obs),
                eta,
                noise: spec.noise,
                method: Method::GraphStoIht,
                max_epochs: spec.max_epochs,
            });
        }
    }
    let results = run_grid(&tuning, &points);
    let mut best: Option<(f64, usize, f64)> = None;
    for (pt, res) in points.iter().zip(&results) {
        let score = mean(&final_errors(res).0);
        if best.map_or(true, |(s, _, _)| score < s) {
            best = Some((score, pt.block_size, pt.eta));
        }
    }
    let (_, b, eta) = best.expect("non-empty tuning grid");
    Ok((b, eta))
}

pub fn run_recovery_curve(spec: &ExperimentSpec, report: &mut Report) -> Result<usize> {
    let mut points = Vec::new();
    for s in spec.sparsity_levels() {
        let tuned = match (spec.kind, spec.validation) {
            (ExperimentKind::BenchmarkGraphs, Some(v)) => {
                let (b, eta) = tune_on_validation(spec, v, s)?;
                report.note(&format!("tuned_block_size_s{s}"), b);
                report.note(&format!("tuned_eta_s{s}"), eta);
                Some((b, eta))
            }
            _ => None,
        };
        for &m in &spec.m_values {
            for &method in &spec.methods {
                let (block_size, eta) = match tuned {
                    Some((b, eta)) => (b.min(m), eta),
                    None => (spec.block_rule.block_size(s, m), spec.eta),
                };
                points.push(TrialPoint {
                    sparsity: s,
                    num_obs: m,
                    block_size,
                    eta,
                    noise: spec.noise,
                    method,
                    max_epochs: spec.max_epochs,
                });
            }
        }
    }
    let results = run_grid(spec, &points);
    let mut failures = 0;
    let threshold = spec.threshold_for(spec.noise);
    for (pt, res) in points.iter().zip(&results) {
        let (errors, failed) = final_errors(res);
        failures += failed;
        let (prob, sd) = recovery_stats(&errors, spec.trim, threshold)?;
        report.rows.push(Row {
            experiment: format!("{}/s={}", spec.kind.name(), pt.sparsity),
            parameter: "m".into(),
            point: pt.num_obs as f64,
            epoch: None,
            solver: pt.method.name().into(),
            metric: "recovery_probability".into(),
            value: prob,
            stddev: sd,
        });
    }
    Ok(failures)
}

fn run_curves(spec: &ExperimentSpec, report: &mut Report) -> Result<usize> {
    let by_block = spec.kind == ExperimentKind::BlockSize;
    let mut points = Vec::new();
    for &s in &spec.sparsities {
        for &m in &spec.m_values {
            let (values, parameter): (Vec<f64>, _) = if by_block {
                (spec.block_sizes.iter().map(|&b| b as f64).collect(), "b")
            } else {
                (spec.etas.clone(), "eta")
            };
            for v in values {
                for &method in &spec.methods {
                    let (block_size, eta) = if by_block {
                        (v as usize, spec.eta)
                    } else {
                        (spec.block_rule.block_size(s, m), v)
                    };
                    if block_size > m {
                        return invalid(format!("block size {block_size} exceeds m = {m}"));
                    }
                    points.push((
                        parameter,
                        v,
                        TrialPoint {
                            sparsity: s,
                            num_obs: m,
                            block_size,
                            eta,
                            noise: spec.noise,
                            method,
                            max_epochs: spec.curve_epochs,
                        },
                    ));
                }
            }
        }
    }
    let trial_points: Vec<TrialPoint> = points.iter().map(|(_, _, p)| *p).collect();
    let results = run_grid(spec, &trial_points);
    let mut failures = 0;
    for ((parameter, v, pt), res) in points.iter().zip(&results) {
        let curves: Vec<Vec<f64>> = res
            .iter()
            .map(|r| match r {
                Ok(trace) => padded_curve(trace, spec.curve_epochs),
                Err(_) => {
                    failures += 1;
                    vec![f64::INFINITY; spec.curve_epochs + 1]
                }
            })
            .collect();
        for epoch in 0..=spec.curve_epochs {
            let column: Vec<f64> = curves.iter().map(|c| c[epoch]).collect();
            let kept = trimmed_trials(&column, spec.trim)?;
            report.rows.push(Row {
                experiment: format!("{}/m={}/s={}", spec.kind.name(), pt.num_obs, pt.sparsity),
                parameter: (*parameter).into(),
                point: *v,
                epoch: Some(epoch),
                solver: pt.method.name().into(),
                metric: "estimation_error".into(),
                value: mean(&kept),
                stddev: std_dev(&kept),
            });
        }
    }
    Ok(failures)
}

/// Smallest `m` (scanning upward) at which every trimmed trial succeeds,
/// for each block size and noise level. Scanning stops for a setting as
/// soon as it succeeds.
fn run_noise(spec: &ExperimentSpec, report: &mut Report) -> Result<usize> {
    struct Setting {
        sparsity: usize,
        block_size: usize,
        noise: f64,
        method: Method,
        found: Option<usize>,
    }
    let mut settings = Vec::new();
    for &s in &spec.sparsities {
        for &b in &spec.block_sizes {
            for &noise in &spec.noise_levels {
                for &method in &spec.methods {
                    settings.push(Setting { sparsity: s, block_size: b, noise, method, found: None });
                }
            }
        }
    }
    let mut m_grid = spec.m_values.clone();
    m_grid.sort_unstable();
    m_grid.dedup();
    let mut failures = 0;
    for &m in &m_grid {
        let pending: Vec<usize> = (0..settings.len())
            .filter(|&i| settings[i].found.is_none() && settings[i].block_size <= m)
            .collect();
        if pending.is_empty() {
            continue;
        }
        let points: Vec<TrialPoint> = pending
            .iter()
            .map(|&i| {
                let st = &settings[i];
                TrialPoint {
                    sparsity: st.sparsity,
                    num_obs: m,
                    block_size: st.block_size,
                    eta: spec.eta,
                    noise: st.noise,
                    method: st.method,
                    max_epochs: spec.max_epochs,
                }
            })
            .collect();
        let results = run_grid(spec, &points);
        for (&i, res) in pending.iter().zip(&results) {
            let (errors, failed) = final_errors(res);
            failures += failed;
            let (prob, _) = recovery_stats(&errors, spec.trim, spec.threshold_for(settings[i].noise))?;
            if prob == 1.0 {
                settings[i].found = Some(m);
            }
        }
    }
    for st in &settings {
        report.rows.push(Row {
            experiment: format!("noise/s={}/noise={}", st.sparsity, st.noise),
            parameter: "b".into(),
            point: st.block_size as f64,
            epoch: None,
            solver: st.method.name().into(),
            metric: "required_m".into(),
            value: st.found.map_or(f64::NAN, |m| m as f64),
            stddev: 0.0,
        });
    }
    Ok(failures)
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|n| Method::parse(n).ok_or_else(|| Error::InvalidArgument(format!("unknown solver {n:?}"))))
        .collect()
}

fn int_list(cfg: &Config, key: &str) -> Result<Option<Vec<usize>>> {
    cfg.raw(key).map(parse_range_list).transpose()
}

/// Builds a spec from configuration keys on top of the defaults for `kind`.
///
/// Keys: `rows`, `cols`, `graph`, `support`, `start`, `sparsity`, `m`,
/// `block_size` (a list, or `min` for `b = min(s, m)`), `eta`, `noise`,
/// `methods`, `trials`, `trim`, `seed`, `max_epochs`, `curve_epochs`,
/// `threshold`, `noisy_threshold`, `design_scale` (`std` or `var`),
/// `iid_sampling`, `sequential`, `validation_m`, `validation_trials`.
pub fn spec_from_config(kind: ExperimentKind, cfg: &Config) -> Result<ExperimentSpec> {
    let rows = cfg.get_or("rows", 16usize)?;
    let cols = cfg.get_or("cols", 16usize)?;
    let mut spec = ExperimentSpec::grid(kind, rows, cols)?;
    if let Some(path) = cfg.raw("graph") {
        spec.graph = Graph::read_edge_list(path)?;
        spec.signal = Signal::RandomWalk { start: 0 };
    }
    if let Some(path) = cfg.raw("support") {
        spec.signal = Signal::Fixed(read_support(path)?);
    } else if kind == ExperimentKind::BenchmarkGraphs {
        return invalid("benchmark_graphs needs a support file");
    }
    if let Some(start) = cfg.get::<usize>("start")? {
        spec.signal = Signal::RandomWalk { start };
    }
    if let Some(v) = int_list(cfg, "sparsity")? {
        spec.sparsities = v;
    }
    if let Some(v) = int_list(cfg, "m")? {
        spec.m_values = v;
    }
    match cfg.raw("block_size") {
        Some("min") => spec.block_rule = BlockRule::MinSparsity,
        Some(text) => {
            let v = parse_range_list(text)?;
            spec.block_rule = BlockRule::Fixed(v[0]);
            spec.block_sizes = v;
        }
        None => {}
    }
    if let Some(v) = cfg.list::<f64>("eta")? {
        spec.eta = v[0];
        spec.etas = v;
    }
    if let Some(v) = cfg.list::<f64>("noise")? {
        spec.noise = v[0];
        spec.noise_levels = v;
    }
    if let Some(v) = cfg.list::<String>("methods")? {
        spec.methods = parse_methods(&v)?;
    }
    spec.trials = cfg.get_or("trials", spec.trials)?;
    spec.trim = cfg.get_or("trim", spec.trim)?;
    spec.seed = cfg.get_or("seed", spec.seed)?;
    spec.max_epochs = cfg.get_or("max_epochs", spec.max_epochs)?;
    spec.curve_epochs = cfg.get_or("curve_epochs", spec.curve_epochs)?;
    spec.threshold = cfg.get_or("threshold", spec.threshold)?;
    spec.noisy_threshold = cfg.get_or("noisy_threshold", spec.noisy_threshold)?;
    spec.iid_sampling = cfg.get_or("iid_sampling", spec.iid_sampling)?;
    if cfg.get_or("sequential", false)? {
        spec.execution = Execution::Sequential;
    }
    match cfg.raw("design_scale") {
        None => {}
        Some("std") => spec.design_scale = DesignScale::StdInvSqrtM,
        Some("var") => spec.design_scale = DesignScale::VarInvSqrtM,
        Some(other) => return invalid(format!("design_scale must be std or var, got {other:?}")),
    }
    if let Some(m) = cfg.get::<usize>("validation_m")? {
        spec.validation = Some(Validation {
            num_obs: m,
            trials: cfg.get_or("validation_trials", DEFAULT_VALIDATION_TRIALS)?,
        });
    }
    spec.validate()?;
    Ok(spec)
}

/// Whitespace- or comma-separated node indices.
pub fn read_support(path: &str) -> Result<Support> {
    let text = std::fs::read_to_string(path)?;
    let mut nodes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            nodes.push(tok.parse().map_err(|e| Error::Parse {
                path: path.to_string(),
                line: i + 1,
                msg: format!("bad node index {tok:?}: {e}"),
            })?);
        }
    }
    Ok(Support::new(nodes))
}
