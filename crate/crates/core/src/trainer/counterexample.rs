//! The two-atom toy problem: ν uniform on y₁ = (0,0), y₂ = (0,1), a
//! translation generator and a Dirac latent at the origin, so μ_θ = δ_θ and
//! the optimal parameter is θ* = (0, 0.5).

use super::{
    dual_solver, OptimizerKind, PsiMode, ThetaRecord, TrainConfig, Trainer, TrajectoryRecord,
};
use crate::generators::{Generator, ParamVector};
use crate::measures::{CostFunction, DiscreteMeasure, LatentSampler, Point};
use crate::semidual::SemiDual;
use crate::Result;

pub const Y1: [f64; 2] = [0.0, 0.0];
pub const Y2: [f64; 2] = [0.0, 1.0];
pub const THETA_STAR: [f64; 2] = [0.0, 0.5];

pub fn target() -> DiscreteMeasure {
    DiscreteMeasure::uniform(vec![Point::zeros(2), Point::from_slice(&Y2).expect("finite")])
        .expect("two valid atoms")
}

/// Trainer configuration for the toy run: plain steps of size `tau`, one
/// record per step, no wall clock. `psi_mode = Sga` uses a single-sample
/// ascent of `psi_steps` steps per outer step.
pub fn config(lambda: f64, tau: f64, steps: usize, psi_mode: PsiMode) -> TrainConfig {
    TrainConfig {
        lambda,
        cost: CostFunction::SquaredEuclidean,
        batch_size: 1,
        outer_steps: steps.max(1),
        psi_steps: 200,
        lr: tau,
        optimizer: OptimizerKind::Plain,
        psi_mode,
        log_every: 1,
        record_wall_clock: false,
        ..TrainConfig::default()
    }
}

/// Runs `steps` outer iterations from `theta0`. The returned trajectory starts
/// with a step-0 row holding θ⁰, so it has `steps + 1` rows.
pub fn run(
    lambda: f64,
    tau: f64,
    steps: usize,
    theta0: [f64; 2],
    psi_mode: PsiMode,
) -> Result<Vec<TrajectoryRecord>> {
    let nu = target();
    let cfg = config(lambda, tau, steps, psi_mode);
    let problem = SemiDual::new(&nu, cfg.cost, lambda)?;
    let x0 = [Point::from_slice(&theta0)?];
    let psi0 = dual_solver::closed_form_potential_single_atom(&x0[0], &nu, &cfg.cost)?;
    let violation0 = if problem.is_hard() {
        dual_solver::hard_marginal_violation(&psi0, &x0, &problem)?
    } else {
        dual_solver::marginal_violation(&psi0, &x0, &problem)?
    };
    let mut records = vec![TrajectoryRecord {
        step: 0,
        objective: problem.objective(&psi0, &x0)?,
        marginal_violation: violation0,
        theta: ThetaRecord::Full(theta0.to_vec()),
        ms: 0,
    }];
    if steps == 0 {
        return Ok(records);
    }
    let latent = LatentSampler::dirac(Point::zeros(2))?;
    let mut trainer = Trainer::new(
        cfg,
        &nu,
        Generator::translation(2),
        latent,
        Some(ParamVector::new(theta0.to_vec())),
    )?;
    trainer.run()?;
    records.extend(trainer.into_run().trajectory);
    Ok(records)
}

/// θ coordinates of each record; panics on norm-only records, which the toy
/// problem never produces.
pub fn thetas(records: &[TrajectoryRecord]) -> Vec<[f64; 2]> {
    records
        .iter()
        .map(|r| match &r.theta {
            ThetaRecord::Full(t) => [t[0], t[1]],
            ThetaRecord::Norm(_) => panic!("toy trajectory stores full theta"),
        })
        .collect()
}

pub fn distance_to_optimum(theta: [f64; 2]) -> f64 {
    (theta[0] - THETA_STAR[0]).hypot(theta[1] - THETA_STAR[1])
}
