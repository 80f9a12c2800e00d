//! Semi-dual formulation of (entropic) optimal transport to a discrete target.
//!
//! For a target `ν = Σ_i w_i δ_{y_i}` and a potential `ψ ∈ R^n`:
//!
//! - hard c-transform: `ψ^c(x) = min_i [c(x, y_i) − ψ_i]`
//! - entropic transform: `ψ^{c,λ}(x) = −λ log Σ_i w_i exp((ψ_i − c(x, y_i)) / λ)`
//! - soft assignments: `η_i(x) ∝ w_i exp((ψ_i − c(x, y_i)) / λ)`
//! - objective: `F(ψ) = mean_k ψ^{c,λ}(x_k) + Σ_i w_i ψ_i` over generated points `x_k`
//!
//! The soft quantities are evaluated with a max-shifted log-sum-exp so they stay
//! finite for small `λ`. Atoms with zero weight never enter the minimum or the sum.

use serde::{Deserialize, Serialize};

use crate::measures::{CostFunction, DiscreteMeasure, Point};
use crate::{Error, Result};

/// Dual potential `ψ ∈ R^n`, indexed like the target's support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualPotential(Vec<f64>);

impl DualPotential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dual potential has non-finite entries".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `ψ + C·1`.
    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    /// Gauge-fixed copy with zero mean; potentials are only defined up to an
    /// additive constant.
    pub fn mean_centered(&self) -> Self {
        let m = self.0.iter().sum::<f64>() / self.0.len().max(1) as f64;
        self.shifted(-m)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Regularization strength `λ ≥ 0`; zero selects the hard transform.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Regularization(f64);

impl Regularization {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_hard(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for Regularization {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Regularization> for f64 {
    fn from(r: Regularization) -> f64 {
        r.0
    }
}

/// A semi-discrete transport problem against a fixed target measure.
#[derive(Debug, Clone, Copy)]
pub struct SemiDual<'a> {
    nu: &'a DiscreteMeasure,
    cost: CostFunction,
    lambda: Regularization,
}

impl<'a> SemiDual<'a> {
    pub fn new(nu: &'a DiscreteMeasure, cost: CostFunction, lambda: f64) -> Result<Self> {
        Ok(Self {
            nu,
            cost,
            lambda: Regularization::new(lambda)?,
        })
    }

    pub fn target(&self) -> &'a DiscreteMeasure {
        self.nu
    }

    pub fn cost(&self) -> CostFunction {
        self.cost
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.value()
    }

    pub fn is_hard(&self) -> bool {
        self.lambda.is_hard()
    }

    fn soft_lambda(&self, op: &str) -> Result<f64> {
        if self.lambda.is_hard() {
            return Err(Error::InvalidArgument(format!(
                "{op} requires lambda > 0; use the hard c-transform for lambda = 0"
            )));
        }
        Ok(self.lambda.value())
    }

    fn check(&self, psi: &DualPotential, x: &[f64]) {
        assert_eq!(
            psi.len(),
            self.nu.len(),
            "dual potential length must match the target support"
        );
        assert_eq!(x.len(), self.nu.dim(), "point dimension must match the target");
    }

    /// Hard c-transform `min_i [c(x, y_i) − ψ_i]` with its minimizing index.
    /// Ties go to the smallest index.
    pub fn c_transform(&self, psi: &DualPotential, x: &[f64]) -> (f64, usize) {
        self.check(psi, x);
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (i, (y, w)) in self.nu.support().iter().zip(self.nu.weights()).enumerate() {
            if *w <= 0.0 {
                continue;
            }
            let v = self.cost.eval(x, y) - psi.0[i];
            if v < best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }

    /// Entropic c,λ-transform.
    pub fn c_lambda_transform(&self, psi: &DualPotential, x: &[f64]) -> Result<f64> {
        let lambda = self.soft_lambda("c_lambda_transform")?;
        self.check(psi, x);
        let mut scratch = vec![0.0; self.nu.len()];
        Ok(-lambda * self.log_partition(psi, x, lambda, &mut scratch))
    }

    /// Soft assignment weights `η(x)` on the target atoms.
    pub fn eta_weights(&self, psi: &DualPotential, x: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.soft_lambda("eta_weights")?;
        self.check(psi, x);
        let mut eta = vec![0.0; self.nu.len()];
        self.eta_into(psi, x, lambda, &mut eta);
        Ok(eta)
    }

    /// `∇_x ψ^{c,λ}(x) = Σ_i η_i(x) ∇_x c(x, y_i)`.
    pub fn grad_psi_c_lambda(&self, psi: &DualPotential, x: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.soft_lambda("grad_psi_c_lambda")?;
        self.check(psi, x);
        let mut eta = vec![0.0; self.nu.len()];
        self.eta_into(psi, x, lambda, &mut eta);
        let mut out = vec![0.0; x.len()];
        let mut g = vec![0.0; x.len()];
        for (y, e) in self.nu.support().iter().zip(&eta) {
            if *e == 0.0 {
                continue;
            }
            self.cost.grad_x_into(x, y, &mut g);
            for (o, gk) in out.iter_mut().zip(&g) {
                *o += e * gk;
            }
        }
        Ok(out)
    }

    /// `ψ^c(x)` for `λ = 0`, `ψ^{c,λ}(x)` otherwise.
    pub fn transform(&self, psi: &DualPotential, x: &[f64]) -> f64 {
        if self.lambda.is_hard() {
            self.c_transform(psi, x).0
        } else {
            self.check(psi, x);
            let lambda = self.lambda.value();
            let mut scratch = vec![0.0; self.nu.len()];
            -lambda * self.log_partition(psi, x, lambda, &mut scratch)
        }
    }

    /// Semi-dual objective estimated on a batch of generated points (uniform
    /// weights). Accepts `λ = 0`.
    pub fn objective(&self, psi: &DualPotential, generated: &[Point]) -> Result<f64> {
        if generated.is_empty() {
            return Err(Error::InvalidArgument("empty generated batch".into()));
        }
        let mean_transform = generated
            .iter()
            .map(|x| self.transform(psi, x))
            .sum::<f64>()
            / generated.len() as f64;
        Ok(mean_transform + self.potential_mean(psi))
    }

    /// Semi-dual objective for a weighted discrete source measure.
    pub fn objective_weighted(&self, psi: &DualPotential, mu: &DiscreteMeasure) -> Result<f64> {
        if mu.dim() != self.nu.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.nu.dim(),
                got: mu.dim(),
            });
        }
        let t: f64 = mu
            .support()
            .iter()
            .zip(mu.weights())
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * self.transform(psi, x))
            .sum();
        Ok(t + self.potential_mean(psi))
    }

    /// `Σ_i w_i ψ_i`.
    pub fn potential_mean(&self, psi: &DualPotential) -> f64 {
        psi.0.iter().zip(self.nu.weights()).map(|(p, w)| p * w).sum()
    }

    /// Gradient of the batch objective in `ψ`: `w_i − mean_k η_i(x_k)`.
    pub fn psi_ascent_direction(
        &self,
        psi: &DualPotential,
        generated: &[Point],
    ) -> Result<Vec<f64>> {
        let lambda = self.soft_lambda("psi_ascent_direction")?;
        if generated.is_empty() {
            return Err(Error::InvalidArgument("empty generated batch".into()));
        }
        let n = self.nu.len();
        let mut mean_eta = vec![0.0; n];
        let mut eta = vec![0.0; n];
        for x in generated {
            self.check(psi, x);
            self.eta_into(psi, x, lambda, &mut eta);
            for (m, e) in mean_eta.iter_mut().zip(&eta) {
                *m += e;
            }
        }
        let k = generated.len() as f64;
        Ok(self
            .nu
            .weights()
            .iter()
            .zip(&mean_eta)
            .map(|(w, m)| w - m / k)
            .collect())
    }

    /// Supergradient of the hard (`λ = 0`) batch objective: `w_i` minus the
    /// fraction of batch points whose c-transform selects atom `i`.
    pub fn hard_ascent_direction(&self, psi: &DualPotential, generated: &[Point]) -> Result<Vec<f64>> {
        if generated.is_empty() {
            return Err(Error::InvalidArgument("empty generated batch".into()));
        }
        let mut counts = vec![0usize; self.nu.len()];
        for x in generated {
            counts[self.c_transform(psi, x).1] += 1;
        }
        let k = generated.len() as f64;
        Ok(self
            .nu
            .weights()
            .iter()
            .zip(&counts)
            .map(|(w, c)| w - *c as f64 / k)
            .collect())
    }

    /// `log Σ_i w_i exp((ψ_i − c(x, y_i)) / λ)`; `scratch` receives the
    /// shifted exponents' exponentials.
    pub(crate) fn log_partition(
        &self,
        psi: &DualPotential,
        x: &[f64],
        lambda: f64,
        scratch: &mut [f64],
    ) -> f64 {
        let max = self.exponents_into(psi, x, lambda, scratch);
        let mut sum = 0.0;
        for a in scratch.iter_mut() {
            *a = (*a - max).exp();
            sum += *a;
        }
        max + sum.ln()
    }

    /// Writes `η(x)` into `out`.
    pub(crate) fn eta_into(&self, psi: &DualPotential, x: &[f64], lambda: f64, out: &mut [f64]) {
        let max = self.exponents_into(psi, x, lambda, out);
        let mut sum = 0.0;
        for a in out.iter_mut() {
            *a = (*a - max).exp();
            sum += *a;
        }
        for a in out.iter_mut() {
            *a /= sum;
        }
    }

    /// Exponents `log w_i + (ψ_i − c(x, y_i)) / λ` (−∞ for empty atoms);
    /// returns their maximum.
    fn exponents_into(&self, psi: &DualPotential, x: &[f64], lambda: f64, out: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (i, (y, w)) in self.nu.support().iter().zip(self.nu.weights()).enumerate() {
            out[i] = if *w > 0.0 {
                w.ln() + (psi.0[i] - self.cost.eval(x, y)) / lambda
            } else {
                f64::NEG_INFINITY
            };
            if out[i] > max {
                max = out[i];
            }
        }
        max
    }
}
