//! Contraction-factor algebra for the stochastic graph IHT convergence bound.
//!
//! `κ < 1` is the condition for linear convergence up to an error floor.

use crate::error::{invalid, Result};
use crate::loss::LogisticParams;

/// Sufficient inverse condition number for `κ < 1` as `c_T → 1`.
pub const MU_THRESHOLD: f64 = 243.0 / 250.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionQuery {
    /// Restricted strong convexity constant.
    pub alpha: f64,
    /// Restricted strong smoothness constant.
    pub beta: f64,
    pub c_head: f64,
    pub c_tail: f64,
    pub eta: f64,
    /// Free parameter in `(0, 2/β)`.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionVariant {
    /// Full expression at the given `η`, `τ`, `c_H`.
    General,
    /// `η = 1/β`, optimal `τ`, `c_H → 1⁻`: `(1+c_T)(1+2√μ)√(1−μ)`.
    Limit,
    /// Batch variant in terms of `δ`.
    BatchTable,
    /// Stochastic variant in terms of `δ`.
    StochasticTable,
}

impl ContractionQuery {
    pub fn new(alpha: f64, beta: f64, c_head: f64, c_tail: f64, eta: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta) {
            return invalid(format!("need 0 < α ≤ β, got α={alpha}, β={beta}"));
        }
        if !(c_head > 0.0 && c_head <= 1.0) {
            return invalid(format!("head factor must be in (0, 1], got {c_head}"));
        }
        if !(c_tail >= 1.0) {
            return invalid(format!("tail factor must be at least 1, got {c_tail}"));
        }
        Ok(Self {
            alpha,
            beta,
            c_head,
            c_tail,
            eta,
            tau,
        })
    }

    /// Least-squares parameterization `α = 1 − δ`, `β = 1 + δ`, `η = 1/β`.
    pub fn from_delta(delta: f64, c_head: f64, c_tail: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("δ must be in (0, 1), got {delta}"));
        }
        let beta = 1.0 + delta;
        Self::new(1.0 - delta, beta, c_head, c_tail, 1.0 / beta, 1.0 / beta)
    }

    /// Inverse condition number `α / β`.
    pub fn mu(&self) -> f64 {
        self.alpha / self.beta
    }

    /// `δ` with `μ = (1 − δ) / (1 + δ)`.
    pub fn delta(&self) -> f64 {
        (self.beta - self.alpha) / (self.beta + self.alpha)
    }

    pub fn alpha0(&self) -> f64 {
        let (a, b, t) = (self.alpha, self.beta, self.tau);
        self.c_head * a * t - (a * b * t * t - 2.0 * a * t + 1.0).sqrt()
    }

    pub fn beta0(&self) -> f64 {
        (1.0 + self.c_head) * self.tau
    }

    /// `τ` maximizing `α0` for the current `c_H`.
    pub fn optimal_tau(&self) -> f64 {
        let (a, b, c) = (self.alpha, self.beta, self.c_head);
        (1.0 + c * ((b - a) / (b - c * c * a)).sqrt()) / b
    }
}

pub fn contraction_factor(q: &ContractionQuery, variant: ContractionVariant) -> Result<f64> {
    let lead = 1.0 + q.c_tail;
    match variant {
        ContractionVariant::General => {
            let upper = 2.0 / q.beta;
            for (name, v) in [("τ", q.tau), ("η", q.eta)] {
                if !(v > 0.0 && v < upper) {
                    return invalid(format!("{name} = {v} outside (0, {upper})"));
                }
            }
            let a0 = q.alpha0();
            if a0.abs() > 1.0 {
                return invalid(format!("α0 = {a0} outside [-1, 1]"));
            }
            let (a, b, e) = (q.alpha, q.beta, q.eta);
            let step = (a * b * e * e - 2.0 * a * e + 1.0).max(0.0).sqrt();
            Ok(lead * (step + (1.0 - a0 * a0).sqrt()))
        }
        ContractionVariant::Limit => Ok(limit_kappa(q.mu(), q.c_tail)),
        ContractionVariant::BatchTable => Ok(batch_kappa(q.delta(), q.c_tail)),
        ContractionVariant::StochasticTable => Ok(stochastic_kappa(q.delta(), q.c_tail)),
    }
}

pub fn limit_kappa(mu: f64, c_tail: f64) -> f64 {
    (1.0 + c_tail) * (1.0 + 2.0 * mu.sqrt()) * (1.0 - mu).max(0.0).sqrt()
}

pub fn batch_kappa(delta: f64, c_tail: f64) -> f64 {
    (1.0 + c_tail) * (delta.sqrt() + 2.0 * (1.0 - delta).sqrt()) * delta.sqrt()
}

pub fn stochastic_kappa(delta: f64, c_tail: f64) -> f64 {
    let d1 = 1.0 + delta;
    (1.0 + c_tail) * ((2.0 / d1).sqrt() + 2.0 * (2.0 * (1.0 - delta)).sqrt() / d1) * delta.sqrt()
}

/// Strong-convexity-to-smoothness ratio of the block logistic loss and
/// whether it clears [`MU_THRESHOLD`].
pub fn logistic_condition(
    params: &LogisticParams,
    theta_max: f64,
    m: usize,
    n: usize,
) -> Result<(f64, bool)> {
    if m == 0 {
        return invalid("m must be positive");
    }
    let smooth = n as f64 * (1.0 + params.nu) * theta_max / (4.0 * m as f64);
    let denom = params.lambda + smooth;
    if denom == 0.0 {
        return invalid("λ and the smoothness term are both zero");
    }
    let mu = params.lambda / denom;
    Ok((mu, mu >= MU_THRESHOLD))
}
