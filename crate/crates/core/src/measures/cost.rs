use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ground cost `c(x, y)`.
///
/// `PowerNorm { p }` is `‖x − y‖^p` with `p ≥ 1`; `SquaredEuclidean` is the
/// `p = 2` case with a dedicated kernel and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CostFunction {
    #[default]
    SquaredEuclidean,
    PowerNorm { p: f64 },
}

/// Gradient of the cost in its first argument.
///
/// `at_kink` is set when the cost is not differentiable at the query
/// (`PowerNorm { p: 1 }` with `x = y`); the gradient is then reported as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub grad: Vec<f64>,
    pub at_kink: bool,
}

impl CostFunction {
    pub fn power_norm(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "power-norm exponent must be >= 1, got {p}"
            )));
        }
        Ok(Self::PowerNorm { p })
    }

    /// `c(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        Ok(self.eval(x, y))
    }

    /// `∇_x c(x, y)`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<CostGradient> {
        check_dims(x, y)?;
        let mut grad = vec![0.0; x.len()];
        let at_kink = self.grad_x_into(x, y, &mut grad);
        Ok(CostGradient { grad, at_kink })
    }

    /// Unchecked evaluation for inner loops; dimensions must agree.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let sq = squared_distance(x, y);
        match *self {
            Self::SquaredEuclidean => sq,
            Self::PowerNorm { p } => {
                if p == 2.0 {
                    sq
                } else {
                    sq.sqrt().powf(p)
                }
            }
        }
    }

    /// Writes `∇_x c(x, y)` into `out` and returns whether `x` sits on a kink.
    #[inline]
    pub(crate) fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        debug_assert_eq!(x.len(), y.len());
        debug_assert_eq!(x.len(), out.len());
        let scale = match *self {
            Self::SquaredEuclidean => 2.0,
            Self::PowerNorm { p } if p == 2.0 => 2.0,
            Self::PowerNorm { p } => {
                let r = squared_distance(x, y).sqrt();
                if r == 0.0 {
                    out.fill(0.0);
                    return p == 1.0;
                }
                p * r.powf(p - 2.0)
            }
        };
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = scale * (a - b);
        }
        false
    }

    /// Lipschitz constant of `x ↦ c(x, y)` over a set of diameter `diameter`.
    pub fn lipschitz_bound(&self, diameter: f64) -> f64 {
        match *self {
            Self::SquaredEuclidean => 2.0 * diameter,
            Self::PowerNorm { p } => p * diameter.powf(p - 1.0),
        }
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SquaredEuclidean => f.write_str("sqeuclidean"),
            Self::PowerNorm { p } => write!(f, "power:{p}"),
        }
    }
}

impl FromStr for CostFunction {
    type Err = Error;

    /// Accepts `sqeuclidean` or `power:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sqeuclidean" | "squared_euclidean" => Ok(Self::SquaredEuclidean),
            other => match other.strip_prefix("power:") {
                Some(p) => {
                    let p: f64 = p.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad power-norm exponent {p:?}"))
                    })?;
                    Self::power_norm(p)
                }
                None => Err(Error::InvalidArgument(format!(
                    "unknown cost {other:?} (expected sqeuclidean or power:<p>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for CostFunction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CostFunction> for String {
    fn from(c: CostFunction) -> Self {
        c.to_string()
    }
}
