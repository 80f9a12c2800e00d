//! Independent references used to validate the main modules.

mod fdcheck;
mod sinkhorn;
pub mod suites;

pub use fdcheck::{central_difference, fd_gradient_check, relative_error, FdEntry, FdReport};
pub use sinkhorn::{
    kl_divergence, relative_entropy, sinkhorn_solve, SinkhornResult, TransportPlan,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};

use crate::measures::CostFunction;
use crate::Result;

/// Closed-form quantities for `μ = δ_θ` against ν uniform on `{y₁, y₂}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReference {
    /// `½ (c(θ, y₁) + c(θ, y₂))`, for every `λ ≥ 0`.
    pub value: f64,
    /// `(c(θ, y₁), c(θ, y₂))`.
    pub psi: [f64; 2],
    /// `½ (∇_x c(θ, y₁) + ∇_x c(θ, y₂))`.
    pub grad: Vec<f64>,
}

/// With a single source atom the only coupling is `δ_θ ⊗ ν`, so the entropic
/// term vanishes and the value is independent of `λ`.
pub fn counterexample_reference(
    theta: &[f64],
    y1: &[f64],
    y2: &[f64],
    cost: &CostFunction,
    _lambda: f64,
) -> Result<CounterexampleReference> {
    let c1 = cost.value(theta, y1)?;
    let c2 = cost.value(theta, y2)?;
    let g1 = cost.grad_x(theta, y1)?.grad;
    let g2 = cost.grad_x(theta, y2)?.grad;
    Ok(CounterexampleReference {
        value: 0.5 * (c1 + c2),
        psi: [c1, c2],
        grad: g1.iter().zip(&g2).map(|(a, b)| 0.5 * (a + b)).collect(),
    })
}
