//! Estimation of Kantorovich potentials for the semi-dual problem.

use serde::{Deserialize, Serialize};

use crate::generators::{Generator, ParamVector};
use crate::measures::{CostFunction, DiscreteMeasure, LatentSampler, Point};
use crate::semidual::{DualPotential, SemiDual};
use crate::{Error, Result};

/// Step size schedule for potential ascent; `k` counts from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c0", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant(f64),
    InverseSqrt(f64),
}

impl StepSchedule {
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            Self::Constant(c0) => c0,
            Self::InverseSqrt(c0) => c0 / ((k + 1) as f64).sqrt(),
        }
    }

    fn c0(&self) -> f64 {
        match *self {
            Self::Constant(c0) | Self::InverseSqrt(c0) => c0,
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::InverseSqrt(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub n_steps: usize,
    pub batch_size: usize,
    pub schedule: StepSchedule,
    /// Return the running (Polyak) average of the iterates.
    pub averaging: bool,
    /// Used by the trainer: start each estimate from the previous potential.
    pub warm_start: bool,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            n_steps: 200,
            batch_size: 100,
            schedule: StepSchedule::default(),
            averaging: true,
            warm_start: true,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("ascent batch size must be >= 1".into()));
        }
        let c0 = self.schedule.c0();
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ascent step constant must be > 0, got {c0}"
            )));
        }
        Ok(())
    }
}

/// Stochastic gradient ascent on the semi-dual objective with batches drawn
/// by `batch(step)`.
///
/// With `λ > 0` each step follows [`SemiDual::psi_ascent_direction`]; with
/// `λ = 0` it follows the hard supergradient [`SemiDual::hard_ascent_direction`].
/// `n_steps = 0` returns `psi0` unchanged.
pub fn solve_dual_sga_with<F>(
    psi0: &DualPotential,
    problem: &SemiDual<'_>,
    cfg: &AscentConfig,
    mut batch: F,
) -> Result<DualPotential>
where
    F: FnMut(usize) -> Result<Vec<Point>>,
{
    cfg.validate()?;
    let mut psi = psi0.clone();
    let mut avg = psi0.clone();
    for step in 0..cfg.n_steps {
        let xs = batch(step)?;
        let dir = if problem.is_hard() {
            problem.hard_ascent_direction(&psi, &xs)?
        } else {
            problem.psi_ascent_direction(&psi, &xs)?
        };
        let eta = cfg.schedule.step(step);
        for (p, d) in psi.values_mut().iter_mut().zip(&dir) {
            *p += eta * d;
        }
        if !psi.is_finite() {
            return Err(Error::NonFinite {
                what: "dual potential",
                step,
            });
        }
        if cfg.averaging {
            let w = 1.0 / (step + 1) as f64;
            for (a, p) in avg.values_mut().iter_mut().zip(psi.as_slice()) {
                *a += w * (p - *a);
            }
        }
    }
    Ok(if cfg.averaging && cfg.n_steps > 0 {
        avg
    } else {
        psi
    })
}

/// Potential ascent for the push-forward of `latent` through `gen(θ, ·)`,
/// drawing batch `j` from latent stream `stream_base + j`.
#[allow(clippy::too_many_arguments)]
pub fn solve_dual_sga(
    psi0: &DualPotential,
    gen: &Generator,
    theta: &ParamVector,
    latent: &LatentSampler,
    problem: &SemiDual<'_>,
    cfg: &AscentConfig,
    stream_base: u64,
) -> Result<DualPotential> {
    solve_dual_sga_with(psi0, problem, cfg, |step| {
        latent
            .sample(cfg.batch_size, stream_base.wrapping_add(step as u64))
            .iter()
            .map(|z| gen.forward(theta, z))
            .collect()
    })
}

/// Outcome of [`solve_dual_fullbatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct FullBatchSolution {
    pub psi: DualPotential,
    pub converged: bool,
    pub steps: usize,
    pub marginal_violation: f64,
}

/// Deterministic gradient ascent on a frozen batch until the marginal
/// violation drops to `1e-8` or `n_steps` is exhausted.
///
/// The objective's Hessian in ψ is bounded by `1/λ`, so `step ≤ λ` is a safe
/// choice.
pub fn solve_dual_fullbatch(
    psi0: &DualPotential,
    generated: &[Point],
    problem: &SemiDual<'_>,
    n_steps: usize,
    step: f64,
) -> Result<FullBatchSolution> {
    const TARGET: f64 = 1e-8;
    const DIVERGENCE_WINDOW: usize = 100;
    if problem.is_hard() {
        return Err(Error::InvalidArgument(
            "full-batch ascent requires lambda > 0".into(),
        ));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
    }
    let mut psi = psi0.clone();
    let mut obj = problem.objective(&psi, generated)?;
    let mut decreasing = 0;
    for k in 0..n_steps {
        let dir = problem.psi_ascent_direction(&psi, generated)?;
        let violation: f64 = dir.iter().map(|d| d.abs()).sum();
        if violation <= TARGET {
            return Ok(FullBatchSolution {
                psi,
                converged: true,
                steps: k,
                marginal_violation: violation,
            });
        }
        for (p, d) in psi.values_mut().iter_mut().zip(&dir) {
            *p += step * d;
        }
        if !psi.is_finite() {
            return Err(Error::NonFinite {
                what: "dual potential",
                step: k,
            });
        }
        let next = problem.objective(&psi, generated)?;
        if next < obj {
            decreasing += 1;
            if decreasing >= DIVERGENCE_WINDOW {
                return Err(Error::Divergence {
                    step: k,
                    window: DIVERGENCE_WINDOW,
                });
            }
        } else {
            decreasing = 0;
        }
        obj = next;
    }
    let violation = marginal_violation(&psi, generated, problem)?;
    Ok(FullBatchSolution {
        psi,
        converged: violation <= TARGET,
        steps: n_steps,
        marginal_violation: violation,
    })
}

/// Exact potential when the generated measure is the single atom `δ_x`:
/// `ψ_i = c(x, y_i)`, up to an additive constant. Valid for every `λ ≥ 0`.
pub fn closed_form_potential_single_atom(
    x: &[f64],
    nu: &DiscreteMeasure,
    cost: &CostFunction,
) -> Result<DualPotential> {
    let values = nu
        .support()
        .iter()
        .map(|y| cost.value(x, y))
        .collect::<Result<Vec<f64>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "dual potential",
            step: 0,
        });
    }
    DualPotential::new(values)
}

/// `‖w − mean_k η(x_k)‖₁`, zero exactly at a stationary point of the batch
/// objective; always in `[0, 2]`.
pub fn marginal_violation(
    psi: &DualPotential,
    generated: &[Point],
    problem: &SemiDual<'_>,
) -> Result<f64> {
    Ok(problem
        .psi_ascent_direction(psi, generated)?
        .iter()
        .map(|d| d.abs())
        .sum())
}

/// Hard-assignment analogue of [`marginal_violation`] for `λ = 0`.
pub fn hard_marginal_violation(
    psi: &DualPotential,
    generated: &[Point],
    problem: &SemiDual<'_>,
) -> Result<f64> {
    Ok(problem
        .hard_ascent_direction(psi, generated)?
        .iter()
        .map(|d| d.abs())
        .sum())
}
