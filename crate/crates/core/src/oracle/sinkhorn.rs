use crate::measures::{CostFunction, DiscreteMeasure};
use crate::semidual::DualPotential;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Dense coupling matrix, row `i` is the mass leaving μ-atom `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransportPlan {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("plan must be a non-empty rectangle".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("plan entries must be finite and >= 0".into()));
        }
        Ok(Self { rows: m, cols: n, data })
    }

    /// `μ ⊗ ν`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let data = mu
            .weights()
            .iter()
            .flat_map(|a| nu.weights().iter().map(move |b| a * b))
            .collect();
        Self {
            rows: mu.len(),
            cols: nu.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    /// Largest absolute deviation of either marginal from the given weights.
    pub fn marginal_violation(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let dev = |sums: Vec<f64>, w: &[f64]| {
            sums.iter()
                .zip(w)
                .map(|(s, w)| (s - w).abs())
                .fold(0.0, f64::max)
        };
        dev(self.row_sums(), mu.weights()).max(dev(self.col_sums(), nu.weights()))
    }

    /// `Σ_ij π_ij c(x_i, y_j)`.
    pub fn transport_cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostFunction) -> f64 {
        let mut total = 0.0;
        for (i, x) in mu.support().iter().enumerate() {
            for (j, y) in nu.support().iter().enumerate() {
                let p = self.get(i, j);
                if p > 0.0 {
                    total += p * cost.eval(x, y);
                }
            }
        }
        total
    }
}

/// `KL(π | μ⊗ν) = Σ π log(π / (μ_i ν_j))` with `0 log 0 = 0`. Mass outside the
/// support of `μ⊗ν` gives `+∞`.
pub fn kl_divergence(plan: &TransportPlan, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut total = 0.0;
    for (i, a) in mu.weights().iter().enumerate() {
        for (j, b) in nu.weights().iter().enumerate() {
            let p = plan.get(i, j);
            if p == 0.0 {
                continue;
            }
            let q = a * b;
            if q == 0.0 {
                return f64::INFINITY;
            }
            total += p * (p / q).ln();
        }
    }
    total
}

/// Relative entropy in its `Σ π (log(π / μ⊗ν) − 1) + 1` form, evaluated
/// literally. Equals [`kl_divergence`] when π has unit mass.
pub fn relative_entropy(plan: &TransportPlan, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut total = 0.0;
    for (i, a) in mu.weights().iter().enumerate() {
        for (j, b) in nu.weights().iter().enumerate() {
            let p = plan.get(i, j);
            if p == 0.0 {
                continue;
            }
            let q = a * b;
            if q == 0.0 {
                return f64::INFINITY;
            }
            total += p * ((p / q).ln() - 1.0);
        }
    }
    total + 1.0
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub plan: TransportPlan,
    /// Potential on μ's atoms.
    pub phi: Vec<f64>,
    /// Potential on ν's atoms.
    pub psi: DualPotential,
    /// `Σ π c + λ KL(π | μ⊗ν)`.
    pub primal_value: f64,
    /// `Σ_i μ_i ψ^{c,λ}(x_i) + Σ_j ν_j ψ_j` at the returned ψ.
    pub semidual_value: f64,
    pub marginal_violation: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn for entropic transport between two discrete measures.
/// Stops once both marginals are within `tol` (max-norm).
pub fn sinkhorn_solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("sinkhorn needs lambda > 0, got {lambda}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: nu.dim(),
            got: mu.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let (m, n) = (mu.len(), nu.len());
    let c: Vec<f64> = mu
        .support()
        .iter()
        .flat_map(|x| nu.support().iter().map(move |y| cost.eval(x, y)))
        .collect();
    let log_a: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();

    // f_i = −λ log Σ_j b_j exp((g_j − C_ij)/λ), and symmetrically for g.
    let row_update = |g: &[f64], f: &mut [f64]| {
        for (i, fi) in f.iter_mut().enumerate() {
            let terms = (0..n).map(|j| log_b[j] + (g[j] - c[i * n + j]) / lambda);
            *fi = -lambda * log_sum_exp(terms);
        }
    };
    let col_update = |f: &[f64], g: &mut [f64]| {
        for (j, gj) in g.iter_mut().enumerate() {
            let terms = (0..m).map(|i| log_a[i] + (f[i] - c[i * n + j]) / lambda);
            *gj = -lambda * log_sum_exp(terms);
        }
    };
    let plan_of = |f: &[f64], g: &[f64]| {
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let e = log_a[i] + log_b[j] + (f[i] + g[j] - c[i * n + j]) / lambda;
                data[i * n + j] = e.exp();
            }
        }
        TransportPlan { rows: m, cols: n, data }
    };

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        col_update(&f, &mut g);
        row_update(&g, &mut f);
        iterations += 1;
        // Rows are exact after the row update; check the columns.
        let plan = plan_of(&f, &g);
        violation = plan.marginal_violation(mu, nu);
        if !violation.is_finite() {
            return Err(Error::NonFinite {
                what: "sinkhorn potentials",
                step: iterations,
            });
        }
        if violation <= tol {
            converged = true;
            break;
        }
    }
    // Replace -inf on zero-weight atoms so the potentials stay finite.
    for (gj, w) in g.iter_mut().zip(nu.weights()) {
        if *w == 0.0 || !gj.is_finite() {
            *gj = 0.0;
        }
    }
    for (fi, w) in f.iter_mut().zip(mu.weights()) {
        if *w == 0.0 || !fi.is_finite() {
            *fi = 0.0;
        }
    }
    let plan = plan_of(&f, &g);
    let primal_value = plan.transport_cost(mu, nu, cost) + lambda * kl_divergence(&plan, mu, nu);
    let mut f_tilde = vec![0.0; m];
    row_update(&g, &mut f_tilde);
    let semidual_value = mu
        .weights()
        .iter()
        .zip(&f_tilde)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, f)| a * f)
        .sum::<f64>()
        + nu.weights().iter().zip(&g).map(|(b, g)| b * g).sum::<f64>();
    Ok(SinkhornResult {
        plan,
        phi: f,
        psi: DualPotential::new(g)?,
        primal_value,
        semidual_value,
        marginal_violation: violation,
        converged,
        iterations,
    })
}
