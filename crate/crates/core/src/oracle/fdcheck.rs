use std::fmt;

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, defined as 0 when both vectors vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences `(f(θ + h e_k) − f(θ − h e_k)) / 2h`.
pub fn central_difference<F>(f: &F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|k| {
            probe[k] = point[k] + h;
            let up = f(&probe);
            probe[k] = point[k] - h;
            let down = f(&probe);
            probe[k] = point[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdEntry {
    pub point: Vec<f64>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub label: String,
    pub h: f64,
    pub tol: f64,
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn worst(&self) -> Option<(usize, &FdEntry)> {
        self.entries
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.rel_err.total_cmp(&b.1.rel_err))
    }

    pub fn max_rel_err(&self) -> f64 {
        self.worst().map_or(0.0, |(_, e)| e.rel_err)
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.rel_err <= self.tol)
    }

    /// Machine-readable `key=value` summary on one line.
    pub fn key_values(&self) -> String {
        let worst = self.worst().map_or(0, |(i, _)| i);
        format!(
            "check={} points={} h={:e} tol={:e} max_rel_err={:e} worst_index={} pass={}",
            self.label,
            self.entries.len(),
            self.h,
            self.tol,
            self.max_rel_err(),
            worst,
            self.passed()
        )
    }
}

impl fmt::Display for FdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} over {} points (h = {:e}, tol = {:e})",
            self.label,
            if self.passed() { "PASS" } else { "FAIL" },
            self.entries.len(),
            self.h,
            self.tol
        )?;
        if let Some((i, e)) = self.worst() {
            writeln!(f, "  worst point #{i}: rel. err {:e}", e.rel_err)?;
            writeln!(f, "    at       {:?}", e.point)?;
            writeln!(f, "    analytic {:?}", e.analytic)?;
            writeln!(f, "    numeric  {:?}", e.numeric)?;
        }
        write!(f, "{}", self.key_values())
    }
}

/// Compares `grad` against central differences of `f` at every point. Both
/// closures must be deterministic (reuse the same random draws for all
/// evaluations).
pub fn fd_gradient_check<F, G>(
    label: &str,
    f: F,
    grad: G,
    points: &[Vec<f64>],
    h: f64,
    tol: f64,
) -> FdReport
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let entries = points
        .iter()
        .map(|p| {
            let analytic = grad(p);
            let numeric = central_difference(&f, p, h);
            FdEntry {
                rel_err: relative_error(&analytic, &numeric),
                point: p.clone(),
                analytic,
                numeric,
            }
        })
        .collect();
    FdReport {
        label: label.to_string(),
        h,
        tol,
        entries,
    }
}
