//! Alternating potential ascent / generator descent on the semi-discrete
//! entropic transport cost.
//!
//! Each outer step `k`:
//! 1. estimates ψ^k (stochastic ascent warm-started from ψ^{k−1}, or the
//!    closed form when ζ is a Dirac mass);
//! 2. draws `K` fresh latents;
//! 3. moves θ against `mean_k (∂_θ g)^T Σ_i η_i ∇_x c(g_θ(z_k), y_i)`.
//!
//! Every random draw comes from a latent stream keyed by `(k, j)`, so a run is
//! a pure function of its configuration and resumes bit-exactly from a
//! checkpoint.

mod checkpoint;
pub mod counterexample;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dual_solver::{self, AscentConfig, StepSchedule};
use crate::generators::{AdamState, Generator, ParamVector};
use crate::measures::{CostFunction, DiscreteMeasure, LatentSampler, Point};
use crate::semidual::{DualPotential, SemiDual};
use crate::{Error, Result};

/// θ snapshots are stored in full up to this many parameters, else as a norm.
pub const FULL_THETA_MAX: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    /// `θ ← θ − lr · q`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// Stochastic ascent; at `λ = 0` it follows the hard supergradient.
    #[default]
    Sga,
    /// Closed-form potential of a single generated atom (Dirac latent only).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    #[default]
    InverseSqrt,
}

/// Training configuration. Serialized as a flat JSON object; unknown keys are
/// rejected and missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub cost: CostFunction,
    /// `K`: latent batch size for both the ψ ascent and the θ update.
    pub batch_size: usize,
    /// `N`: outer iterations.
    pub outer_steps: usize,
    /// `N_ψ`: ascent steps per outer iteration.
    pub psi_steps: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub psi_mode: PsiMode,
    pub psi_schedule: ScheduleKind,
    pub psi_step: f64,
    pub averaging: bool,
    pub warm_start: bool,
    pub seed: u64,
    pub log_every: usize,
    /// Checkpoint cadence in outer steps; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    /// When false every record's `ms` is 0, making trajectories byte-stable.
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            cost: CostFunction::SquaredEuclidean,
            batch_size: 100,
            outer_steps: 4000,
            psi_steps: 200,
            lr: 1e-4,
            optimizer: OptimizerKind::Adam,
            psi_mode: PsiMode::Sga,
            psi_schedule: ScheduleKind::InverseSqrt,
            psi_step: 1.0,
            averaging: true,
            warm_start: true,
            seed: 0,
            log_every: 10,
            checkpoint_every: 0,
            record_wall_clock: true,
        }
    }
}

impl TrainConfig {
    pub fn ascent_config(&self) -> AscentConfig {
        AscentConfig {
            n_steps: self.psi_steps,
            batch_size: self.batch_size,
            schedule: match self.psi_schedule {
                ScheduleKind::Constant => StepSchedule::Constant(self.psi_step),
                ScheduleKind::InverseSqrt => StepSchedule::InverseSqrt(self.psi_step),
            },
            averaging: self.averaging,
            warm_start: self.warm_start,
        }
    }

    /// Checks the configuration on its own; compatibility with a generator and
    /// latent is checked by [`Trainer::new`].
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.outer_steps == 0 {
            return bad("outer_steps must be >= 1".into());
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad(format!("lr must be >= 0, got {}", self.lr));
        }
        if self.log_every == 0 {
            return bad("log_every must be >= 1".into());
        }
        if self.psi_mode == PsiMode::Sga {
            self.ascent_config().validate()?;
        }
        Ok(())
    }
}

/// θ as stored in a trajectory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRecord {
    Full(Vec<f64>),
    Norm(f64),
}

impl ThetaRecord {
    fn of(theta: &ParamVector) -> Self {
        if theta.len() <= FULL_THETA_MAX {
            Self::Full(theta.as_slice().to_vec())
        } else {
            Self::Norm(theta.norm())
        }
    }
}

/// One logged outer step. `objective` and `marginal_violation` are measured
/// on that step's θ-update batch at (ψ^k, θ^k); `theta` is θ^{k+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub objective: f64,
    pub marginal_violation: f64,
    pub theta: ThetaRecord,
    pub ms: u64,
}

/// Mutable training state; everything needed to resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Outer steps completed.
    pub step: usize,
    pub theta: ParamVector,
    pub psi: DualPotential,
    pub adam: Option<AdamState>,
    pub trajectory: Vec<TrajectoryRecord>,
    pub elapsed_ms: u64,
}

/// A finished (or interrupted) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub generator: Generator,
    pub latent: LatentSampler,
    pub trajectory: Vec<TrajectoryRecord>,
    pub theta: ParamVector,
    pub psi: DualPotential,
}

impl TrainRun {
    pub fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.trajectory)
    }
}

/// Renders `step,objective,marginal_violation,theta…,ms` with 17 significant
/// digits per real.
pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::from("step,objective,marginal_violation,");
    match records.first().map(|r| &r.theta) {
        Some(ThetaRecord::Full(t)) => {
            for k in 0..t.len() {
                out.push_str(&format!("theta{k},"));
            }
        }
        Some(ThetaRecord::Norm(_)) => out.push_str("theta_norm,"),
        None => out.push_str("theta,"),
    }
    out.push_str("ms\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},",
            r.step,
            fmt_real(r.objective),
            fmt_real(r.marginal_violation)
        ));
        match &r.theta {
            ThetaRecord::Full(t) => {
                for v in t {
                    out.push_str(&fmt_real(*v));
                    out.push(',');
                }
            }
            ThetaRecord::Norm(n) => {
                out.push_str(&fmt_real(*n));
                out.push(',');
            }
        }
        out.push_str(&format!("{}\n", r.ms));
    }
    out
}

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Stream key of ascent batch `inner` within outer step `outer`.
fn psi_stream(outer: usize) -> u64 {
    (outer as u64) << 32
}

/// Stream key of the θ-update batch of outer step `outer`.
fn theta_stream(outer: usize) -> u64 {
    ((outer as u64) << 32) | 0xFFFF_FFFF
}

/// `mean_k (∂_θ g(θ, z_k))^T Σ_i η_i(x_k) ∇_x c(x_k, y_i)`, `x_k = g(θ, z_k)`.
pub fn generator_gradient_estimate(
    gen: &Generator,
    theta: &ParamVector,
    psi: &DualPotential,
    z_batch: &[Point],
    problem: &SemiDual<'_>,
) -> Result<ParamVector> {
    if problem.is_hard() {
        return Err(Error::InvalidArgument(
            "generator_gradient_estimate requires lambda > 0".into(),
        ));
    }
    let nu = problem.target();
    let cost = problem.cost();
    accumulate_vjp(gen, theta, z_batch, |x, v| {
        let eta = problem.eta_weights(psi, x)?;
        let mut g = vec![0.0; x.len()];
        for (y, e) in nu.support().iter().zip(&eta) {
            if *e == 0.0 {
                continue;
            }
            cost.grad_x_into(x, y, &mut g);
            for (vk, gk) in v.iter_mut().zip(&g) {
                *vk += e * gk;
            }
        }
        Ok(())
    })
}

/// `λ = 0` analogue: the backpropagated hard transform, `∇_x c(x_k, y_{i*})`
/// with `i*` the c-transform's (smallest) minimizing index.
pub fn hard_generator_gradient_estimate(
    gen: &Generator,
    theta: &ParamVector,
    psi: &DualPotential,
    z_batch: &[Point],
    problem: &SemiDual<'_>,
) -> Result<ParamVector> {
    let nu = problem.target();
    let cost = problem.cost();
    accumulate_vjp(gen, theta, z_batch, |x, v| {
        let (_, i) = problem.c_transform(psi, x);
        cost.grad_x_into(x, &nu.support()[i], v);
        Ok(())
    })
}

fn accumulate_vjp<F>(
    gen: &Generator,
    theta: &ParamVector,
    z_batch: &[Point],
    mut upstream: F,
) -> Result<ParamVector>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    if z_batch.is_empty() {
        return Err(Error::InvalidArgument("empty latent batch".into()));
    }
    let scale = 1.0 / z_batch.len() as f64;
    let mut out = vec![0.0; gen.num_params()];
    let mut v = vec![0.0; gen.output_dim()];
    for (index, z) in z_batch.iter().enumerate() {
        let x = gen.forward(theta, z).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFiniteSample { what, index },
            other => other,
        })?;
        v.fill(0.0);
        upstream(&x, &mut v)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteSample {
                what: "cost gradient",
                index,
            });
        }
        gen.vjp_accumulate(theta, z, &v, scale, &mut out)?;
        if out.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteSample {
                what: "generator gradient",
                index,
            });
        }
    }
    Ok(ParamVector::new(out))
}

/// Drives the training loop over a borrowed target measure.
pub struct Trainer<'a> {
    config: TrainConfig,
    nu: &'a DiscreteMeasure,
    generator: Generator,
    latent: LatentSampler,
    state: TrainState,
}

impl<'a> Trainer<'a> {
    /// `theta0 = None` initializes θ from the generator's seeded scheme. The
    /// latent sampler's seed is replaced by `config.seed`.
    pub fn new(
        config: TrainConfig,
        nu: &'a DiscreteMeasure,
        generator: Generator,
        latent: LatentSampler,
        theta0: Option<ParamVector>,
    ) -> Result<Self> {
        let theta = theta0.unwrap_or_else(|| generator.init_params(config.seed));
        let adam = match config.optimizer {
            OptimizerKind::Adam => Some(AdamState::new(theta.len(), config.lr)),
            OptimizerKind::Plain => None,
        };
        let state = TrainState {
            step: 0,
            psi: DualPotential::zeros(nu.len()),
            theta,
            adam,
            trajectory: Vec::new(),
            elapsed_ms: 0,
        };
        let latent = latent.with_seed(config.seed);
        Self::check(&config, nu, &generator, &latent, &state)?;
        Ok(Self {
            config,
            nu,
            generator,
            latent,
            state,
        })
    }

    fn check(
        config: &TrainConfig,
        nu: &DiscreteMeasure,
        generator: &Generator,
        latent: &LatentSampler,
        state: &TrainState,
    ) -> Result<()> {
        config.validate()?;
        generator.validate()?;
        let dirac = latent.dirac_point().is_some();
        if config.lambda == 0.0 && !dirac {
            return Err(Error::InvalidArgument(
                "lambda = 0 is only supported for a Dirac latent (single generated atom)".into(),
            ));
        }
        if config.psi_mode == PsiMode::Exact && !dirac {
            return Err(Error::InvalidArgument(
                "psi_mode = exact requires a Dirac latent".into(),
            ));
        }
        if generator.latent_dim() != latent.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.latent_dim(),
                got: latent.dim(),
            });
        }
        if generator.output_dim() != nu.dim() {
            return Err(Error::DimensionMismatch {
                expected: nu.dim(),
                got: generator.output_dim(),
            });
        }
        if state.theta.len() != generator.num_params() {
            return Err(Error::DimensionMismatch {
                expected: generator.num_params(),
                got: state.theta.len(),
            });
        }
        if state.psi.len() != nu.len() {
            return Err(Error::DimensionMismatch {
                expected: nu.len(),
                got: state.psi.len(),
            });
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn latent(&self) -> &LatentSampler {
        &self.latent
    }

    pub fn problem(&self) -> Result<SemiDual<'a>> {
        SemiDual::new(self.nu, self.config.cost, self.config.lambda)
    }

    /// Raises the outer-step budget, e.g. when resuming a shorter run.
    pub fn set_outer_steps(&mut self, n: usize) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.outer_steps = n;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    /// Potential estimate ψ^k for the current θ.
    fn estimate_psi(&self, problem: &SemiDual<'_>) -> Result<DualPotential> {
        let k = self.state.step;
        match self.config.psi_mode {
            PsiMode::Exact => {
                let z = self.latent.dirac_point().expect("checked at construction");
                let x = self.generator.forward(&self.state.theta, z)?;
                dual_solver::closed_form_potential_single_atom(&x, self.nu, &self.config.cost)
            }
            PsiMode::Sga => {
                let start = if self.config.warm_start {
                    self.state.psi.clone()
                } else {
                    DualPotential::zeros(self.nu.len())
                };
                dual_solver::solve_dual_sga(
                    &start,
                    &self.generator,
                    &self.state.theta,
                    &self.latent,
                    problem,
                    &self.config.ascent_config(),
                    psi_stream(k),
                )
            }
        }
        .map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { what, step: k },
            other => other,
        })
    }

    /// Runs one outer step. On error the state is left at the last good step.
    pub fn step(&mut self) -> Result<()> {
        let started = Instant::now();
        let k = self.state.step;
        let problem = self.problem()?;
        let psi = self.estimate_psi(&problem)?;

        let zs = self.latent.sample(self.config.batch_size, theta_stream(k));
        let with_step = |e: Error| match e {
            Error::NonFiniteSample { what, .. } | Error::NonFinite { what, .. } => {
                Error::NonFinite { what, step: k }
            }
            other => other,
        };
        let grad = if problem.is_hard() {
            hard_generator_gradient_estimate(&self.generator, &self.state.theta, &psi, &zs, &problem)
        } else {
            generator_gradient_estimate(&self.generator, &self.state.theta, &psi, &zs, &problem)
        }
        .map_err(with_step)?;

        let done = k + 1;
        let log_now = done % self.config.log_every == 0 || done == self.config.outer_steps;
        let metrics = if log_now {
            let xs = zs
                .iter()
                .map(|z| self.generator.forward(&self.state.theta, z))
                .collect::<Result<Vec<_>>>()
                .map_err(with_step)?;
            let objective = problem.objective(&psi, &xs)?;
            let violation = if problem.is_hard() {
                dual_solver::hard_marginal_violation(&psi, &xs, &problem)?
            } else {
                dual_solver::marginal_violation(&psi, &xs, &problem)?
            };
            Some((objective, violation))
        } else {
            None
        };

        let mut theta = self.state.theta.clone();
        let mut adam = self.state.adam.clone();
        match adam.as_mut() {
            Some(a) => a.step(&mut theta, &grad).map_err(with_step)?,
            None => {
                for (t, g) in theta.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *t -= self.config.lr * g;
                }
            }
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite {
                what: "parameters",
                step: k,
            });
        }

        let elapsed = if self.config.record_wall_clock {
            self.state.elapsed_ms + started.elapsed().as_millis() as u64
        } else {
            0
        };
        if let Some((objective, marginal_violation)) = metrics {
            self.state.trajectory.push(TrajectoryRecord {
                step: done,
                objective,
                marginal_violation,
                theta: ThetaRecord::of(&theta),
                ms: elapsed,
            });
        }
        self.state.theta = theta;
        self.state.psi = psi;
        self.state.adam = adam;
        self.state.elapsed_ms = elapsed;
        self.state.step = done;
        Ok(())
    }

    /// Steps until `config.outer_steps`, calling `after_step` after each one.
    pub fn run_with<F>(&mut self, mut after_step: F) -> Result<()>
    where
        F: FnMut(&Self) -> Result<()>,
    {
        while self.state.step < self.config.outer_steps {
            self.step()?;
            after_step(self)?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| Ok(()))
    }

    /// Like [`run`](Self::run), writing `checkpoint_<step>.json` into `dir` at
    /// the configured cadence and `checkpoint_abort.json` (the last good
    /// state) before returning a numeric error.
    pub fn run_with_checkpoints(&mut self, dir: &Path) -> Result<()> {
        let every = self.config.checkpoint_every;
        let result = self.run_with(|t| {
            if every > 0 && t.state.step % every == 0 {
                t.checkpoint()
                    .save(dir.join(format!("checkpoint_{:08}.json", t.state.step)))?;
            }
            Ok(())
        });
        if let Err(e @ (Error::NonFinite { .. } | Error::NonFiniteSample { .. })) = &result {
            self.checkpoint().save(dir.join("checkpoint_abort.json"))?;
            return Err(Error::NonFinite {
                what: match e {
                    Error::NonFinite { what, .. } | Error::NonFiniteSample { what, .. } => what,
                    _ => unreachable!(),
                },
                step: self.state.step,
            });
        }
        result
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.config.clone(),
            self.generator.clone(),
            self.latent.clone(),
            self.state.clone(),
        )
    }

    pub fn from_checkpoint(ckpt: Checkpoint, nu: &'a DiscreteMeasure) -> Result<Self> {
        Self::check(&ckpt.config, nu, &ckpt.generator, &ckpt.latent, &ckpt.state)?;
        Ok(Self {
            config: ckpt.config,
            nu,
            generator: ckpt.generator,
            latent: ckpt.latent,
            state: ckpt.state,
        })
    }

    pub fn into_run(self) -> TrainRun {
        TrainRun {
            config: self.config,
            generator: self.generator,
            latent: self.latent,
            trajectory: self.state.trajectory,
            theta: self.state.theta,
            psi: self.state.psi,
        }
    }
}

/// Runs a full training job.
pub fn train(
    config: TrainConfig,
    nu: &DiscreteMeasure,
    generator: Generator,
    latent: LatentSampler,
    theta0: Option<ParamVector>,
) -> Result<TrainRun> {
    let mut t = Trainer::new(config, nu, generator, latent, theta0)?;
    t.run()?;
    Ok(t.into_run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQ: CostFunction = CostFunction::SquaredEuclidean;

    fn pt(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::uniform(vec![pt(&[0.0, 0.0]), pt(&[0.0, 1.0])]).unwrap()
    }

    fn dirac2() -> LatentSampler {
        LatentSampler::dirac(Point::zeros(2)).unwrap()
    }

    #[test]
    fn gradient_example_at_origin() {
        let nu = two_atoms();
        let gen = Generator::translation(2);
        let theta = ParamVector::new(vec![0.0, 0.0]);
        let psi = dual_solver::closed_form_potential_single_atom(&[0.0, 0.0], &nu, &SQ).unwrap();
        for lambda in [0.01, 0.1, 1.0] {
            let p = SemiDual::new(&nu, SQ, lambda).unwrap();
            let g = generator_gradient_estimate(&gen, &theta, &psi, &[Point::zeros(2)], &p)
                .unwrap();
            assert_eq!(g.as_slice(), &[0.0, -1.0]);
        }
    }

    #[test]
    fn single_atom_target_is_pure_attraction() {
        let nu = DiscreteMeasure::uniform(vec![pt(&[1.0, 2.0])]).unwrap();
        let gen = Generator::affine(2, 2);
        let theta = gen.init_params(4);
        let zs = LatentSampler::standard_gaussian(2, 1).unwrap().sample(8, 0);
        let p = SemiDual::new(&nu, SQ, 0.3).unwrap();
        let got = generator_gradient_estimate(&gen, &theta, &DualPotential::new(vec![7.0]).unwrap(), &zs, &p)
            .unwrap();
        let mut expected = vec![0.0; gen.num_params()];
        for z in &zs {
            let x = gen.forward(&theta, z).unwrap();
            let v = SQ.grad_x(&x, &[1.0, 2.0]).unwrap().grad;
            gen.vjp_accumulate(&theta, z, &v, 1.0 / 8.0, &mut expected).unwrap();
        }
        for (a, b) in got.as_slice().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn inner_sum_matches_transform_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ys: Vec<Point> = (0..6)
            .map(|_| pt(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        let nu = DiscreteMeasure::uniform(ys).unwrap();
        let psi = DualPotential::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let gen = Generator::translation(2);
        let p = SemiDual::new(&nu, SQ, 0.2).unwrap();
        for _ in 0..20 {
            let theta = ParamVector::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let q = generator_gradient_estimate(&gen, &theta, &psi, &[Point::zeros(2)], &p).unwrap();
            let direct = p.grad_psi_c_lambda(&psi, theta.as_slice()).unwrap();
            for (a, b) in q.as_slice().iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn no_op_run() {
        let nu = two_atoms();
        let cfg = TrainConfig {
            outer_steps: 1,
            psi_steps: 0,
            lr: 0.0,
            ..TrainConfig::default()
        };
        let theta0 = ParamVector::new(vec![0.7, -0.2]);
        let run = train(cfg, &nu, Generator::translation(2), dirac2(), Some(theta0.clone())).unwrap();
        assert_eq!(run.theta, theta0);
        assert_eq!(run.trajectory.len(), 1);
    }

    #[test]
    fn trajectory_length_follows_cadence() {
        let nu = two_atoms();
        let cfg = TrainConfig {
            outer_steps: 95,
            psi_steps: 5,
            batch_size: 4,
            log_every: 10,
            ..TrainConfig::default()
        };
        let latent = LatentSampler::standard_gaussian(2, 0).unwrap();
        let run = train(cfg, &nu, Generator::translation(2), latent, None).unwrap();
        assert_eq!(run.trajectory.len(), 10);
        assert_eq!(run.trajectory.last().unwrap().step, 95);
        assert!(run.trajectory.windows(2).all(|w| w[0].ms <= w[1].ms));
    }

    #[test]
    fn rejects_invalid_setups() {
        let nu = two_atoms();
        let gauss = LatentSampler::standard_gaussian(2, 0).unwrap();
        let hard = TrainConfig {
            lambda: 0.0,
            ..TrainConfig::default()
        };
        assert!(Trainer::new(hard, &nu, Generator::translation(2), gauss.clone(), None).is_err());
        let exact = TrainConfig {
            psi_mode: PsiMode::Exact,
            ..TrainConfig::default()
        };
        assert!(Trainer::new(exact, &nu, Generator::translation(2), gauss.clone(), None).is_err());
        let cfg = TrainConfig::default();
        assert!(Trainer::new(cfg.clone(), &nu, Generator::translation(3), gauss.clone(), None).is_err());
        assert!(Trainer::new(cfg.clone(), &nu, Generator::affine(3, 2), gauss.clone(), None).is_err());
        let zero_batch = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(Trainer::new(zero_batch, &nu, Generator::translation(2), gauss, None).is_err());
    }

    #[test]
    fn deterministic_runs_are_bit_identical() {
        let nu = DiscreteMeasure::uniform(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.5, 1.0])])
            .unwrap();
        let cfg = TrainConfig {
            outer_steps: 30,
            psi_steps: 10,
            batch_size: 8,
            lr: 1e-2,
            log_every: 3,
            record_wall_clock: false,
            ..TrainConfig::default()
        };
        let gen = Generator::mlp(vec![2, 5, 2], Default::default()).unwrap();
        let latent = LatentSampler::standard_gaussian(2, 0).unwrap();
        let a = train(cfg.clone(), &nu, gen.clone(), latent.clone(), None).unwrap();
        let b = train(cfg, &nu, gen, latent, None).unwrap();
        assert_eq!(a.trajectory_csv(), b.trajectory_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_parameters_abort_with_step_and_keep_last_state() {
        let nu = two_atoms();
        let cfg = TrainConfig {
            lambda: 0.1,
            outer_steps: 50,
            psi_mode: PsiMode::Exact,
            optimizer: OptimizerKind::Plain,
            lr: 1e200,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(cfg, &nu, Generator::translation(2), dirac2(), Some(ParamVector::new(vec![1.0, 1.0])))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = t.run_with_checkpoints(dir.path()).unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert_eq!(step, t.state().step),
            other => panic!("unexpected {other:?}"),
        }
        assert!(t.state().theta.is_finite());
        let ckpt = Checkpoint::load(dir.path().join("checkpoint_abort.json")).unwrap();
        assert_eq!(ckpt.state, *t.state());
    }

    #[test]
    fn trajectory_csv_format() {
        let recs = vec![TrajectoryRecord {
            step: 10,
            objective: 0.5,
            marginal_violation: 0.0,
            theta: ThetaRecord::Full(vec![0.0, 0.5]),
            ms: 3,
        }];
        let csv = trajectory_csv(&recs);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "step,objective,marginal_violation,theta0,theta1,ms");
        assert_eq!(
            lines.next().unwrap(),
            "10,5.0000000000000000e-1,0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,3"
        );
    }

    #[test]
    fn large_theta_is_logged_as_norm() {
        let theta = ParamVector::new(vec![1.0; 17]);
        assert_eq!(ThetaRecord::of(&theta), ThetaRecord::Norm(17f64.sqrt()));
    }
}
