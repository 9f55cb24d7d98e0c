//! Block-partitioned losses.
//!
//! Rows of the design are split into `n` contiguous blocks `B_1..B_n`. Block
//! `i` contributes `f_i`, and the full objective is the plain average
//! `F = (1/n) Σ f_i`, so a uniformly drawn block gradient is an unbiased
//! estimate of `∇F`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct Instance {
    pub design: Array2<f64>,
    pub targets: Array1<f64>,
    pub truth: Option<Array1<f64>>,
    pub noise: Option<Array1<f64>>,
}

impl Instance {
    pub fn new(design: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return invalid("design matrix must be non-empty");
        }
        if design.nrows() != targets.len() {
            return invalid(format!(
                "design has {} rows but {} targets",
                design.nrows(),
                targets.len()
            ));
        }
        Ok(Self {
            design,
            targets,
            truth: None,
            noise: None,
        })
    }

    pub fn with_truth(mut self, truth: Array1<f64>) -> Result<Self> {
        if truth.len() != self.dim() {
            return invalid(format!("truth has length {} but p = {}", truth.len(), self.dim()));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: Array1<f64>) -> Result<Self> {
        if noise.len() != self.len() {
            return invalid(format!("noise has length {} but m = {}", noise.len(), self.len()));
        }
        self.noise = Some(noise);
        Ok(self)
    }

    /// Number of observations `m`.
    pub fn len(&self) -> usize {
        self.design.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.design.nrows() == 0
    }

    /// Number of coefficients `p`.
    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn check_labels(&self) -> Result<()> {
        match self.targets.iter().position(|&y| y != 1.0 && y != -1.0) {
            Some(i) => invalid(format!("label {} at row {i} is not ±1", self.targets[i])),
            None => Ok(()),
        }
    }

    /// `‖A x − y‖`.
    pub fn residual_norm(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.design.dot(&x) - &self.targets;
        r.dot(&r).sqrt()
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Instance {
        let design = self.design.select(ndarray::Axis(0), idx);
        let targets = self.targets.select(ndarray::Axis(0), idx);
        Instance {
            design,
            targets,
            truth: self.truth.clone(),
            noise: None,
        }
    }
}

/// Contiguous, near-equal blocks covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    bounds: Vec<(usize, usize)>,
    num_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSel {
    Block(usize),
    Full,
}

impl BlockPartition {
    pub fn with_blocks(m: usize, n: usize) -> Result<Self> {
        if n == 0 || n > m {
            return invalid(format!("cannot split {m} rows into {n} blocks"));
        }
        let base = m / n;
        let extra = m % n;
        let mut bounds = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let len = base + usize::from(i < extra);
            bounds.push((start, start + len));
            start += len;
        }
        Ok(Self {
            bounds,
            num_rows: m,
        })
    }

    /// `n = max(1, ⌊m / b⌋)` blocks, so every block holds at least `b` rows.
    pub fn with_block_size(m: usize, b: usize) -> Result<Self> {
        if b == 0 || b > m {
            return invalid(format!("block size {b} must be in 1..={m}"));
        }
        Self::with_blocks(m, (m / b).max(1))
    }

    pub fn num_blocks(&self) -> usize {
        self.bounds.len()
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        let (a, b) = self.bounds[block];
        a..b
    }

    pub fn block_len(&self, block: usize) -> usize {
        let (a, b) = self.bounds[block];
        b - a
    }

    fn check(&self, inst: &Instance, sel: BlockSel, x_len: usize) -> Result<()> {
        if inst.len() != self.num_rows {
            return invalid(format!(
                "partition covers {} rows but instance has {}",
                self.num_rows,
                inst.len()
            ));
        }
        if x_len != inst.dim() {
            return invalid(format!("x has length {x_len} but p = {}", inst.dim()));
        }
        if let BlockSel::Block(i) = sel {
            if i >= self.num_blocks() {
                return invalid(format!("block {i} out of range ({} blocks)", self.num_blocks()));
            }
        }
        Ok(())
    }
}

fn block_view<'a>(
    inst: &'a Instance,
    part: &BlockPartition,
    block: usize,
) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
    let r = part.range(block);
    (
        inst.design.slice(s![r.clone(), ..]),
        inst.targets.slice(s![r]),
    )
}

fn average_blocks(
    part: &BlockPartition,
    p: usize,
    mut eval: impl FnMut(usize) -> (f64, Array1<f64>),
) -> (f64, Array1<f64>) {
    let n = part.num_blocks() as f64;
    let mut value = 0.0;
    let mut grad = Array1::zeros(p);
    for i in 0..part.num_blocks() {
        let (v, g) = eval(i);
        value += v;
        grad += &g;
    }
    (value / n, grad / n)
}

fn lsq_block(inst: &Instance, part: &BlockPartition, block: usize, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let (a, y) = block_view(inst, part, block);
    let b = part.block_len(block) as f64;
    let r = a.dot(&x) - y;
    let value = r.dot(&r) / (2.0 * b);
    let grad = a.t().dot(&r) / b;
    (value, grad)
}

/// Least squares: `f_i = ‖A_i x − y_i‖² / (2 b_i)`.
pub fn lsq_value_grad(
    inst: &Instance,
    part: &BlockPartition,
    sel: BlockSel,
    x: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    part.check(inst, sel, x.len())?;
    Ok(match sel {
        BlockSel::Block(i) => lsq_block(inst, part, i, x),
        BlockSel::Full => average_blocks(part, inst.dim(), |i| lsq_block(inst, part, i, x)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub lambda: f64,
    pub nu: f64,
}

impl LogisticParams {
    pub fn new(lambda: f64, nu: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return invalid(format!("regularization must be nonnegative, got {lambda}"));
        }
        if !(nu >= 1.0) {
            return invalid(format!("slack ν must be at least 1, got {nu}"));
        }
        Ok(Self { lambda, nu })
    }
}

/// `log(1 + exp(z))` without overflow.
pub fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))` without overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_block(
    inst: &Instance,
    part: &BlockPartition,
    block: usize,
    x: ArrayView1<f64>,
    lambda: f64,
) -> (f64, Array1<f64>) {
    let (a, y) = block_view(inst, part, block);
    let b = part.block_len(block) as f64;
    let margins = a.dot(&x);
    let mut value = 0.0;
    let mut weights = Array1::zeros(y.len());
    for j in 0..y.len() {
        let ym = y[j] * margins[j];
        value += log1p_exp(-ym);
        // d/dx log(1 + exp(−y aᵀx)) = −y a σ(−y aᵀx)
        weights[j] = -y[j] * sigmoid(-ym);
    }
    let mut grad = a.t().dot(&weights) / b;
    grad.scaled_add(lambda, &x);
    (value / b + 0.5 * lambda * x.dot(&x), grad)
}

/// ℓ2-regularized logistic loss:
/// `f_i = (1/b_i) Σ_j log(1 + exp(−y_j a_jᵀx)) + (λ/2)‖x‖²`.
pub fn logistic_value_grad(
    inst: &Instance,
    part: &BlockPartition,
    sel: BlockSel,
    x: ArrayView1<f64>,
    params: &LogisticParams,
) -> Result<(f64, Array1<f64>)> {
    part.check(inst, sel, x.len())?;
    inst.check_labels()?;
    let lambda = params.lambda;
    Ok(match sel {
        BlockSel::Block(i) => logistic_block(inst, part, i, x, lambda),
        BlockSel::Full => average_blocks(part, inst.dim(), |i| {
            logistic_block(inst, part, i, x, lambda)
        }),
    })
}

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-9;

fn power_iteration(a: ArrayView2<f64>, start: Array1<f64>) -> f64 {
    let mut v = start;
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let w = a.t().dot(&a.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= POWER_TOL * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Largest eigenvalue of `A_iᵀ A_i` for one block.
pub fn theta_max(inst: &Instance, part: &BlockPartition, block: usize) -> Result<f64> {
    if block >= part.num_blocks() {
        return invalid(format!("block {block} out of range"));
    }
    let (a, _) = block_view(inst, part, block);
    let p = a.ncols();
    let ones = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    // A second start guards against the all-ones vector being orthogonal to
    // the leading eigenvector.
    let widest = (0..p)
        .max_by(|&i, &j| {
            let ci = a.column(i).dot(&a.column(i));
            let cj = a.column(j).dot(&a.column(j));
            ci.total_cmp(&cj).then(j.cmp(&i))
        })
        .unwrap_or(0);
    let mut basis = Array1::zeros(p);
    basis[widest] = 1.0;
    Ok(power_iteration(a, ones).max(power_iteration(a, basis)))
}
