//! Named validation suites comparing the main modules against the oracle.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    counterexample_reference, fd_gradient_check, kl_divergence, relative_entropy,
    relative_error, sinkhorn_solve, FdEntry, FdReport, TransportPlan, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::dual_solver::{closed_form_potential_single_atom, solve_dual_fullbatch};
use crate::generators::{Activation, Generator, ParamVector};
use crate::measures::{CostFunction, DiscreteMeasure, LatentSampler, Point};
use crate::semidual::{DualPotential, SemiDual};
use crate::trainer::{counterexample, generator_gradient_estimate};
use crate::{Error, Result};

const SQ: CostFunction = CostFunction::SquaredEuclidean;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ClosedForms,
    Gradients,
    Duality,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-forms" => Ok(Self::ClosedForms),
            "gradients" => Ok(Self::Gradients),
            "duality" => Ok(Self::Duality),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?} (expected closed-forms, gradients, duality or all)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClosedForms => "closed-forms",
            Self::Gradients => "gradients",
            Self::Duality => "duality",
            Self::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    /// Space-separated `key=value` pairs.
    pub detail: String,
}

impl CheckResult {
    fn new(suite: &'static str, name: &str, passed: bool, detail: String) -> Self {
        Self {
            suite,
            name: name.to_string(),
            passed,
            detail,
        }
    }

    /// Error `err` against tolerance `tol`.
    fn within(suite: &'static str, name: &str, err: f64, tol: f64) -> Self {
        Self::new(suite, name, err <= tol, format!("max_err={err:e} tol={tol:e}"))
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite={} check={} {} pass={}",
            self.suite, self.name, self.detail, self.passed
        )
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckResult>> {
    Ok(match suite {
        Suite::ClosedForms => closed_forms(seed)?,
        Suite::Gradients => gradients(seed)?,
        Suite::Duality => duality(seed)?,
        Suite::All => {
            let mut all = closed_forms(seed)?;
            all.extend(gradients(seed)?);
            all.extend(duality(seed)?);
            all
        }
    })
}

fn pt(c: &[f64]) -> Point {
    Point::from_slice(c).expect("finite coordinates")
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Point {
    pt(&(0..dim)
        .map(|_| rng.random_range(-half_width..half_width))
        .collect::<Vec<_>>())
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, dim: usize, half_width: f64) -> DiscreteMeasure {
    let support = (0..n).map(|_| random_point(rng, dim, half_width)).collect();
    let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::normalized(support, &masses).expect("positive masses")
}

// ---------------------------------------------------------------- closed forms

const CF: &str = "closed-forms";

pub fn closed_forms(seed: u64) -> Result<Vec<CheckResult>> {
    let nu = counterexample::target();
    let (y1, y2) = (&counterexample::Y1, &counterexample::Y2);
    let mut out = Vec::new();

    let mut err: f64 = 0.0;
    for lambda in [0.0, 0.1] {
        let sd = SemiDual::new(&nu, SQ, lambda)?;
        let psi = closed_form_potential_single_atom(&[0.0, 0.0], &nu, &SQ)?;
        let v = sd.objective(&psi, &[Point::zeros(2)])?;
        err = err.max((v - 0.5).abs());
    }
    out.push(CheckResult::new(
        CF,
        "counterexample_value_at_origin",
        err <= 1e-15,
        format!("expected=0.5 max_err={err:e}"),
    ));

    let r0 = counterexample_reference(&[0.0, 0.0], y1, y2, &SQ, 0.0)?;
    let rs = counterexample_reference(&counterexample::THETA_STAR, y1, y2, &SQ, 0.1)?;
    let ry = counterexample_reference(y1, y1, y2, &SQ, 0.1)?;
    let ok = r0.value == 0.5
        && r0.psi == [0.0, 1.0]
        && r0.grad == [0.0, -1.0]
        && rs.grad == [0.0, 0.0]
        && ry.value == 0.5 * SQ.value(y1, y2)?;
    out.push(CheckResult::new(
        CF,
        "counterexample_reference_examples",
        ok,
        format!("value={} grad_at_optimum={:?}", r0.value, rs.grad),
    ));

    let (sd_err, sk_err) = closed_form_agreement(100, seed)?;
    out.push(CheckResult::within(CF, "semidual_at_closed_form_potential", sd_err, 1e-9));
    out.push(CheckResult::within(CF, "sinkhorn_at_random_theta", sk_err, 1e-8));

    let mut err: f64 = 0.0;
    for lambda in [0.05, 0.1, 1.0] {
        let mu = DiscreteMeasure::uniform(vec![pt(&[0.3, -0.4])])?;
        let r = sinkhorn_solve(&mu, &nu, &SQ, lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let reference = counterexample_reference(&[0.3, -0.4], y1, y2, &SQ, lambda)?;
        err = err.max((r.primal_value - reference.value).abs());
    }
    out.push(CheckResult::within(CF, "sinkhorn_single_atom", err, 1e-8));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = random_measure(&mut rng, 4, 2, 1.0);
    let nu5 = random_measure(&mut rng, 5, 2, 1.0);
    let kl_prod = kl_divergence(&TransportPlan::product(&mu, &nu5), &mu, &nu5);
    out.push(CheckResult::within(CF, "kl_of_product_is_zero", kl_prod.abs(), 1e-12));

    let n = 5;
    let u = DiscreteMeasure::uniform((0..n).map(|k| pt(&[k as f64, 0.0])).collect())?;
    let diag = TransportPlan::from_rows(
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 / n as f64 } else { 0.0 }).collect())
            .collect(),
    )?;
    let kl_diag = kl_divergence(&diag, &u, &u);
    out.push(CheckResult::within(
        CF,
        "kl_of_diagonal_is_log_n",
        (kl_diag - (n as f64).ln()).abs(),
        1e-12,
    ));

    let mut err: f64 = 0.0;
    let mut min_kl = f64::INFINITY;
    for lambda in [0.05, 0.5] {
        let r = sinkhorn_solve(&mu, &nu5, &SQ, lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let kl = kl_divergence(&r.plan, &mu, &nu5);
        min_kl = min_kl.min(kl);
        err = err.max((relative_entropy(&r.plan, &mu, &nu5) - kl).abs());
    }
    out.push(CheckResult::new(
        CF,
        "relative_entropy_equals_kl",
        err <= 1e-12 && min_kl >= -1e-12,
        format!("max_err={err:e} min_kl={min_kl:e} tol=1e-12"),
    ));

    let sd = SemiDual::new(&nu, SQ, 0.1)?;
    let x = [pt(&[0.4, 0.9])];
    let sol = solve_dual_fullbatch(&DualPotential::zeros(2), &x, &sd, 1_000_000, 0.1)?;
    let c1 = SQ.value(&x[0], y1)?;
    let c2 = SQ.value(&x[0], y2)?;
    let p = sol.psi.as_slice();
    let rel_err = ((p[0] - p[1]) - (c1 - c2)).abs();
    out.push(CheckResult::new(
        CF,
        "dual_optimality_relation",
        sol.converged && rel_err <= 1e-8,
        format!("converged={} steps={} max_err={rel_err:e} tol=1e-8", sol.converged, sol.steps),
    ));
    Ok(out)
}

/// For `n_theta` random θ: worst deviation of the semi-dual objective at the
/// closed-form potential from `½(c(θ,y₁)+c(θ,y₂))` (λ ∈ {0, 0.1}), and of the
/// Sinkhorn value from the same (λ = 0.1).
pub fn closed_form_agreement(n_theta: usize, seed: u64) -> Result<(f64, f64)> {
    let nu = counterexample::target();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC10_5ED);
    let mut sd_err: f64 = 0.0;
    let mut sk_err: f64 = 0.0;
    for _ in 0..n_theta {
        let theta = random_point(&mut rng, 2, 2.0);
        let reference =
            counterexample_reference(&theta, &counterexample::Y1, &counterexample::Y2, &SQ, 0.0)?;
        let psi = closed_form_potential_single_atom(&theta, &nu, &SQ)?;
        for lambda in [0.0, 0.1] {
            let sd = SemiDual::new(&nu, SQ, lambda)?;
            let v = sd.objective(&psi, std::slice::from_ref(&theta))?;
            sd_err = sd_err.max((v - reference.value).abs());
        }
        let mu = DiscreteMeasure::uniform(vec![theta])?;
        let r = sinkhorn_solve(&mu, &nu, &SQ, 0.1, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        sk_err = sk_err.max((r.primal_value - reference.value).abs());
    }
    Ok((sd_err, sk_err))
}

// ------------------------------------------------------------------- gradients

const GR: &str = "gradients";

pub fn gradients(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6AD);

    for cost in [SQ, CostFunction::power_norm(3.0)?, CostFunction::power_norm(1.5)?] {
        let mut entries = Vec::new();
        for _ in 0..50 {
            let x = random_point(&mut rng, 3, 1.0);
            let y = random_point(&mut rng, 3, 1.0);
            let f = |p: &[f64]| cost.eval(p, &y);
            let g = |p: &[f64]| cost.grad_x(p, &y).expect("dims").grad;
            entries.extend(fd_gradient_check("", f, g, &[x.into_vec()], 1e-5, 1e-6).entries);
        }
        let report = merged(&format!("cost_grad_{cost}"), 1e-5, 1e-6, entries);
        out.push(from_report(GR, &report));
    }

    for kind in ["translation", "affine", "mlp_tanh"] {
        let report = generator_gradient_fd(kind, 20, seed)?;
        out.push(from_report(GR, &report));
    }

    let err = counterexample_envelope_error(20, seed)?;
    out.push(CheckResult::within(GR, "counterexample_envelope", err, 1e-6));

    let doubled = fd_gradient_check(
        "doubled_quadratic",
        |x: &[f64]| x[0] * x[0] + 3.0 * x[1] * x[1],
        |x: &[f64]| vec![4.0 * x[0], 12.0 * x[1]],
        &[vec![0.5, -1.0], vec![1.0, 2.0]],
        1e-4,
        1e-6,
    );
    out.push(CheckResult::new(
        GR,
        "harness_flags_wrong_gradient",
        !doubled.passed(),
        format!("reported_max_rel_err={:e}", doubled.max_rel_err()),
    ));
    Ok(out)
}

fn merged(label: &str, h: f64, tol: f64, entries: Vec<FdEntry>) -> FdReport {
    FdReport {
        label: label.to_string(),
        h,
        tol,
        entries,
    }
}

fn from_report(suite: &'static str, r: &FdReport) -> CheckResult {
    CheckResult::new(
        suite,
        &r.label,
        r.passed(),
        format!(
            "points={} max_rel_err={:e} worst_index={} tol={:e}",
            r.entries.len(),
            r.max_rel_err(),
            r.worst().map_or(0, |(i, _)| i),
            r.tol
        ),
    )
}

/// Finite-difference check of the generator gradient against the frozen-ψ
/// semi-dual objective, one random configuration per point. `kind` is one of
/// `translation`, `affine`, `mlp_tanh`.
pub fn generator_gradient_fd(kind: &str, configs: usize, seed: u64) -> Result<FdReport> {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xFD ^ kind.len() as u64);
    let mut entries = Vec::with_capacity(configs);
    for c in 0..configs {
        let d = rng.random_range(1..=3usize);
        let gen = match kind {
            "translation" => Generator::translation(d),
            "affine" => Generator::affine(rng.random_range(1..=3), d),
            "mlp_tanh" => Generator::mlp(
                vec![rng.random_range(1..=3), rng.random_range(2..=5), d],
                Activation::Tanh,
            )?,
            other => return Err(Error::InvalidArgument(format!("unknown generator kind {other}"))),
        };
        let n = rng.random_range(2..=6);
        let nu = random_measure(&mut rng, n, d, 1.0);
        let lambda = rng.random_range(0.05..1.0);
        let psi = DualPotential::new((0..nu.len()).map(|_| rng.random_range(-0.5..0.5)).collect())?;
        let theta = gen.init_params(rng.random());
        let zs = LatentSampler::standard_gaussian(gen.latent_dim(), seed)?.sample(8, c as u64);
        let sd = SemiDual::new(&nu, SQ, lambda)?;
        let f = |t: &[f64]| {
            let t = ParamVector::new(t.to_vec());
            let xs: Vec<Point> = zs
                .iter()
                .map(|z| gen.forward(&t, z).expect("finite forward"))
                .collect();
            sd.objective(&psi, &xs).expect("valid batch")
        };
        let g = |t: &[f64]| {
            generator_gradient_estimate(&gen, &ParamVector::new(t.to_vec()), &psi, &zs, &sd)
                .expect("finite gradient")
                .into_vec()
        };
        entries.extend(fd_gradient_check("", f, g, &[theta.into_vec()], H, TOL).entries);
    }
    Ok(merged(&format!("generator_gradient_{kind}"), H, TOL, entries))
}

/// Worst relative error between the generator gradient at a fully converged
/// potential and `½(∇c(θ,y₁)+∇c(θ,y₂))` on the two-atom problem.
pub fn counterexample_envelope_error(n_theta: usize, seed: u64) -> Result<f64> {
    let nu = counterexample::target();
    let gen = Generator::translation(2);
    let lambda = 0.1;
    let sd = SemiDual::new(&nu, SQ, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE7E);
    let mut worst: f64 = 0.0;
    for _ in 0..n_theta {
        let theta = random_point(&mut rng, 2, 1.5);
        let sol = solve_dual_fullbatch(
            &DualPotential::zeros(2),
            std::slice::from_ref(&theta),
            &sd,
            1_000_000,
            lambda,
        )?;
        if !sol.converged {
            return Ok(f64::INFINITY);
        }
        let q = generator_gradient_estimate(
            &gen,
            &ParamVector::new(theta.as_slice().to_vec()),
            &sol.psi,
            &[Point::zeros(2)],
            &sd,
        )?;
        let reference =
            counterexample_reference(&theta, &counterexample::Y1, &counterexample::Y2, &SQ, lambda)?;
        worst = worst.max(relative_error(q.as_slice(), &reference.grad));
    }
    Ok(worst)
}

// --------------------------------------------------------------------- duality

const DU: &str = "duality";

pub fn duality(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let (primal_vs_semidual, module_err) = strong_duality(20, seed)?;
    out.push(CheckResult::within(DU, "primal_equals_semidual", primal_vs_semidual, 1e-6));
    out.push(CheckResult::within(DU, "module_semidual_equals_primal", module_err, 1e-6));

    let support: Vec<Point> = (0..4).map(|k| pt(&[k as f64 * 0.5, (k % 2) as f64])).collect();
    let mu = DiscreteMeasure::uniform(support)?;
    let lambda = 1e-3;
    let r = sinkhorn_solve(&mu, &mu, &SQ, lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let bound = lambda * 4f64.ln() + 1e-6;
    out.push(CheckResult::new(
        DU,
        "identical_measures_bound",
        r.converged && r.primal_value <= bound,
        format!("value={:e} bound={bound:e}", r.primal_value),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E);
    let mu = random_measure(&mut rng, 4, 2, 1.0);
    let nu = random_measure(&mut rng, 6, 2, 1.0);
    let perm = [3, 5, 0, 2, 1, 4];
    let nu_p = DiscreteMeasure::new(
        perm.iter().map(|&j| nu.support()[j].clone()).collect(),
        perm.iter().map(|&j| nu.weights()[j]).collect(),
    )?;
    let a = sinkhorn_solve(&mu, &nu, &SQ, 0.2, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let b = sinkhorn_solve(&mu, &nu_p, &SQ, 0.2, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    out.push(CheckResult::within(
        DU,
        "permutation_invariance",
        (a.primal_value - b.primal_value).abs(),
        1e-8,
    ));

    let slack = lipschitz_slack(50, seed)?;
    out.push(CheckResult::new(
        DU,
        "lipschitz_in_theta",
        slack <= 1e-6,
        format!("max_violation={slack:e} tol=1e-6"),
    ));
    Ok(out)
}

/// On `n` random instances (m, n ≤ 10, λ alternating 0.05 / 0.5): worst
/// relative gap between the Sinkhorn primal value and (a) its own semi-dual
/// value, (b) this crate's semi-dual objective at the returned potential.
pub fn strong_duality(instances: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD0A1);
    let mut own: f64 = 0.0;
    let mut module: f64 = 0.0;
    for k in 0..instances {
        let lambda = if k % 2 == 0 { 0.05 } else { 0.5 };
        let dim = rng.random_range(1..=3);
        let (m, n) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let mu = random_measure(&mut rng, m, dim, 1.5);
        let nu = random_measure(&mut rng, n, dim, 1.5);
        let r = sinkhorn_solve(&mu, &nu, &SQ, lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        if !r.converged {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        let scale = r.primal_value.abs().max(1e-300);
        own = own.max((r.primal_value - r.semidual_value).abs() / scale);
        let sd = SemiDual::new(&nu, SQ, lambda)?;
        let v = sd.objective_weighted(&r.psi, &mu)?;
        module = module.max((r.primal_value - v).abs() / scale);
    }
    Ok((own, module))
}

/// Largest `|W(θ₁) − W(θ₂)| − κ E‖g_{θ₁}(Z) − g_{θ₂}(Z)‖` over `pairs` random
/// parameter pairs, with W the entropic cost of a frozen 8-sample push-forward
/// of a translation generator and κ the cost's Lipschitz bound on the box
/// enclosing every point involved. Non-positive means the bound holds.
pub fn lipschitz_slack(pairs: usize, seed: u64) -> Result<f64> {
    let lambda = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11F);
    let nu = random_measure(&mut rng, 5, 2, 1.0);
    let gen = Generator::translation(2);
    let zs = LatentSampler::standard_gaussian(2, seed)?.sample(8, 0);
    let push = |theta: &ParamVector| -> Result<Vec<Point>> {
        zs.iter().map(|z| gen.forward(theta, z)).collect()
    };
    let w = |xs: &[Point]| -> Result<f64> {
        let mu = DiscreteMeasure::uniform(xs.to_vec())?;
        Ok(sinkhorn_solve(&mu, &nu, &SQ, lambda, 1e-12, DEFAULT_MAX_ITER)?.primal_value)
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let t1 = ParamVector::new(random_point(&mut rng, 2, 1.0).into_vec());
        let t2 = ParamVector::new(random_point(&mut rng, 2, 1.0).into_vec());
        let (x1, x2) = (push(&t1)?, push(&t2)?);
        let all: Vec<&Point> = x1.iter().chain(&x2).chain(nu.support()).collect();
        let diameter = (0..2)
            .map(|k| {
                let lo = all.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let hi = all.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo) * (hi - lo)
            })
            .sum::<f64>()
            .sqrt();
        let kappa = SQ.lipschitz_bound(diameter);
        let mean_shift = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| euclidean_distance(a, b))
            .sum::<f64>()
            / x1.len() as f64;
        let gap = (w(&x1)? - w(&x2)?).abs();
        worst = worst.max(gap - kappa * mean_shift);
    }
    Ok(worst)
}

fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in ["closed-forms", "gradients", "duality", "all"] {
            assert_eq!(s.parse::<Suite>().unwrap().to_string(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn closed_forms_pass() {
        for c in closed_forms(0).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn gradients_pass() {
        for c in gradients(0).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn duality_passes() {
        for c in duality(0).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn check_lines_are_key_value() {
        let c = CheckResult::within("s", "n", 0.5, 1.0);
        assert_eq!(c.to_string(), "suite=s check=n max_err=5e-1 tol=1e0 pass=true");
    }
}
