//! The IHT family: GraphStoIHT and its three ablations share one loop.
//!
//! Each iteration draws a block (or uses all rows), computes its gradient,
//! optionally passes it through the head projection, takes a step and maps
//! the result back onto the model with the tail projection (or plain top-s
//! thresholding).

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::graph::{Graph, Support, WgmParams};
use crate::loss::{lsq_value_grad, logistic_value_grad, BlockPartition, BlockSel, Instance, LogisticParams};
use crate::projection::{head_projection, tail_projection, top_s_projection, ProjectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionMode {
    Graph,
    TopS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Batching {
    Stochastic,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GraphStoIht,
    GraphIht,
    StoIht,
    Iht,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::GraphStoIht, Method::GraphIht, Method::StoIht, Method::Iht];

    pub fn modes(self) -> (ProjectionMode, Batching) {
        match self {
            Method::GraphStoIht => (ProjectionMode::Graph, Batching::Stochastic),
            Method::GraphIht => (ProjectionMode::Graph, Batching::Full),
            Method::StoIht => (ProjectionMode::TopS, Batching::Stochastic),
            Method::Iht => (ProjectionMode::TopS, Batching::Full),
        }
    }

    pub fn from_modes(projection: ProjectionMode, batching: Batching) -> Self {
        match (projection, batching) {
            (ProjectionMode::Graph, Batching::Stochastic) => Method::GraphStoIht,
            (ProjectionMode::Graph, Batching::Full) => Method::GraphIht,
            (ProjectionMode::TopS, Batching::Stochastic) => Method::StoIht,
            (ProjectionMode::TopS, Batching::Full) => Method::Iht,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::GraphStoIht => "graph-sto-iht",
            Method::GraphIht => "graph-iht",
            Method::StoIht => "sto-iht",
            Method::Iht => "iht",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub shrink: f64,
    pub slope: f64,
    pub initial: f64,
    pub max_halvings: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            slope: 1e-4,
            initial: 1.0,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    Armijo(ArmijoParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    LeastSquares,
    Logistic(LogisticParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub projection: ProjectionMode,
    pub batching: Batching,
    pub step: StepSize,
    pub block_size: usize,
    pub max_epochs: usize,
    pub residual_tol: f64,
    pub seed: u64,
    /// Draw blocks i.i.d. instead of cycling through a seeded permutation.
    pub iid_sampling: bool,
    pub wgm: WgmParams,
    pub head: ProjectionConfig,
    pub tail: ProjectionConfig,
    pub record_iterations: bool,
    pub record_supports: bool,
}

pub const DEFAULT_MAX_EPOCHS: usize = 500;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-7;
pub const LOGISTIC_MAX_EPOCHS: usize = 40;

impl SolverConfig {
    /// Defaults for `method` on a `p`-node graph with model `wgm`:
    /// constant step 1, 500 epochs, residual tolerance 1e-7.
    pub fn new(method: Method, p: usize, wgm: WgmParams, block_size: usize) -> Result<Self> {
        let (projection, batching) = method.modes();
        Ok(Self {
            projection,
            batching,
            step: StepSize::Constant(1.0),
            block_size,
            max_epochs: DEFAULT_MAX_EPOCHS,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            seed: 0,
            iid_sampling: false,
            wgm,
            head: ProjectionConfig::head(p, wgm)?,
            tail: ProjectionConfig::tail(wgm)?,
            record_iterations: false,
            record_supports: false,
        })
    }

    pub fn method(&self) -> Method {
        Method::from_modes(self.projection, self.batching)
    }

    fn partition(&self, m: usize) -> Result<BlockPartition> {
        match self.batching {
            Batching::Full => BlockPartition::with_blocks(m, 1),
            Batching::Stochastic => BlockPartition::with_block_size(m, self.block_size),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    EpochCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `‖x − x*‖` at the start and after every epoch (empty without truth).
    pub estimation_errors: Vec<f64>,
    /// `‖A x − y‖` at the start and after every epoch.
    pub residuals: Vec<f64>,
    /// Per-iteration estimation errors when requested.
    pub iteration_errors: Vec<f64>,
    /// Support of every iterate when requested.
    pub supports: Vec<Support>,
    pub final_x: Array1<f64>,
    pub epochs_run: usize,
    pub iterations_run: usize,
    pub termination: Termination,
}

impl SolveTrace {
    pub fn final_error(&self) -> Option<f64> {
        self.estimation_errors.last().copied()
    }
}

/// Backtracking search for the largest `η = η0 ρ^k` with
/// `f(x + η d) ≤ f(x) + c η ⟨∇f(x), d⟩`.
pub fn armijo_line_search(
    f: impl Fn(ArrayView1<f64>) -> f64,
    x: ArrayView1<f64>,
    grad: ArrayView1<f64>,
    direction: ArrayView1<f64>,
    params: &ArmijoParams,
) -> Result<f64> {
    if !(params.shrink > 0.0 && params.shrink < 1.0) {
        return invalid(format!("shrink factor must be in (0, 1), got {}", params.shrink));
    }
    if !(params.slope > 0.0 && params.slope < 1.0) {
        return invalid(format!("slope must be in (0, 1), got {}", params.slope));
    }
    if !(params.initial > 0.0) {
        return invalid(format!("initial step must be positive, got {}", params.initial));
    }
    let slope = grad.dot(&direction);
    if !(slope < 0.0) {
        return invalid(format!("not a descent direction: ⟨∇f, d⟩ = {slope}"));
    }
    let f0 = f(x);
    let mut eta = params.initial;
    for _ in 0..=params.max_halvings {
        let trial = &x + &(eta * &direction);
        if f(trial.view()) <= f0 + params.slope * eta * slope {
            return Ok(eta);
        }
        eta *= params.shrink;
    }
    Ok(params.initial * params.shrink.powi(params.max_halvings as i32))
}

struct BlockSchedule {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    iid: bool,
}

impl BlockSchedule {
    fn new(n: usize, seed: u64, iid: bool) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: n,
            iid,
        }
    }

    fn next(&mut self) -> usize {
        let n = self.order.len();
        if self.iid {
            return self.rng.gen_range(0..n);
        }
        if self.cursor == n {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}

fn loss_eval(
    loss: &Loss,
    inst: &Instance,
    part: &BlockPartition,
    sel: BlockSel,
    x: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    match loss {
        Loss::LeastSquares => lsq_value_grad(inst, part, sel, x),
        Loss::Logistic(params) => logistic_value_grad(inst, part, sel, x, params),
    }
}

fn distance(x: &Array1<f64>, truth: &Array1<f64>) -> f64 {
    let d = x - truth;
    d.dot(&d).sqrt()
}

/// Runs the configured IHT variant from `x⁰ = 0`.
pub fn solve(inst: &Instance, loss: &Loss, config: &SolverConfig, graph: &Graph) -> Result<SolveTrace> {
    let (m, p) = (inst.len(), inst.dim());
    if graph.num_nodes() != p {
        return invalid(format!("graph has {} nodes but p = {p}", graph.num_nodes()));
    }
    if config.block_size == 0 || config.block_size > m {
        return invalid(format!("block size {} must be in 1..={m}", config.block_size));
    }
    if config.max_epochs == 0 {
        return invalid("max_epochs must be positive");
    }
    config.wgm.validate_for(graph)?;
    if let Loss::Logistic(_) = loss {
        inst.check_labels()?;
    }
    let part = config.partition(m)?;
    let n = part.num_blocks();
    let mut schedule = BlockSchedule::new(n, config.seed, config.iid_sampling);
    let check_residual = matches!(loss, Loss::LeastSquares);

    let mut x = Array1::<f64>::zeros(p);
    let truth = inst.truth.as_ref();
    let mut trace = SolveTrace {
        estimation_errors: truth.map(|t| vec![distance(&x, t)]).unwrap_or_default(),
        residuals: vec![inst.residual_norm(x.view())],
        iteration_errors: Vec::new(),
        supports: Vec::new(),
        final_x: x.clone(),
        epochs_run: 0,
        iterations_run: 0,
        termination: Termination::EpochCap,
    };

    let total_iters = config.max_epochs * n;
    let mut converged = false;
    for t in 0..total_iters {
        let sel = match config.batching {
            Batching::Full => BlockSel::Full,
            Batching::Stochastic => BlockSel::Block(schedule.next()),
        };
        let (_, grad) = loss_eval(loss, inst, &part, sel, x.view())?;
        let direction = match config.projection {
            ProjectionMode::Graph => {
                let g = grad.as_slice().expect("contiguous gradient");
                Array1::from(head_projection(g, graph, &config.head)?.vector)
            }
            ProjectionMode::TopS => grad.clone(),
        };
        let eta = match config.step {
            StepSize::Constant(eta) => eta,
            StepSize::Armijo(params) => {
                if direction.iter().all(|&d| d == 0.0) {
                    params.initial
                } else {
                    let descent = -&direction;
                    armijo_line_search(
                        |z| loss_eval(loss, inst, &part, sel, z).map(|(v, _)| v).unwrap_or(f64::INFINITY),
                        x.view(),
                        grad.view(),
                        descent.view(),
                        &params,
                    )?
                }
            }
        };
        let stepped = &x - &(eta * &direction);
        let z = stepped.as_slice().expect("contiguous iterate");
        let projected = match config.projection {
            ProjectionMode::Graph => tail_projection(z, graph, &config.tail)?,
            ProjectionMode::TopS => top_s_projection(z, config.wgm.sparsity),
        };
        x = Array1::from(projected.vector);
        trace.iterations_run = t + 1;
        if config.record_supports {
            trace.supports.push(projected.support);
        }
        if config.record_iterations {
            if let Some(tr) = truth {
                trace.iteration_errors.push(distance(&x, tr));
            }
        }
        let residual = if check_residual || (t + 1) % n == 0 {
            Some(inst.residual_norm(x.view()))
        } else {
            None
        };
        if check_residual && residual.unwrap() <= config.residual_tol {
            converged = true;
        }
        if (t + 1) % n == 0 || converged {
            trace.epochs_run += 1;
            trace.residuals.push(residual.unwrap());
            if let Some(tr) = truth {
                trace.estimation_errors.push(distance(&x, tr));
            }
        }
        if converged {
            break;
        }
    }
    trace.termination = if converged {
        Termination::Converged
    } else {
        Termination::EpochCap
    };
    trace.final_x = x;
    Ok(trace)
}
