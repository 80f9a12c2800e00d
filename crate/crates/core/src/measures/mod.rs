//! Points, discrete measures, ground costs, latent samplers and datasets.

mod cost;
mod dataset;
mod latent;

pub use cost::{CostFunction, CostGradient};
pub use dataset::{
    load_dataset, parse_csv, parse_idx_images, parse_idx_labels, read_idx_images, DatasetFormat,
    IdxImages, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use latent::{LatentKind, LatentSampler};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A point of a finite-dimensional feature space with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "point coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Self(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Compensated (Neumaier) summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A finitely supported probability measure `Σ_i w_i δ_{y_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<Point>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Builds a measure from explicit weights, which must be nonnegative and
    /// sum to one within [`WEIGHT_SUM_TOL`].
    pub fn new(support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let dim = Self::check_support(&support)?;
        if weights.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weight {i} is negative or not finite ({})",
                weights[i]
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            support,
            weights,
            dim,
        })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(support: Vec<Point>) -> Result<Self> {
        let n = support.len().max(1);
        let weights = vec![1.0 / n as f64; support.len()];
        Self::new(support, weights)
    }

    /// Rescales nonnegative raw masses to a probability vector.
    pub fn normalized(support: Vec<Point>, masses: &[f64]) -> Result<Self> {
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidWeights(
                "masses must be finite and nonnegative".into(),
            ));
        }
        let total = compensated_sum(masses.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidWeights("total mass must be positive".into()));
        }
        let weights = masses.iter().map(|m| m / total).collect();
        Self::new(support, weights)
    }

    fn check_support(support: &[Point]) -> Result<usize> {
        let first = support.first().ok_or_else(|| {
            Error::InvalidArgument("a discrete measure needs at least one atom".into())
        })?;
        let dim = first.dim();
        for p in support {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(dim)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| *w == w0)
    }

    /// Weighted barycenter `Σ_i w_i y_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.support.iter().zip(&self.weights) {
            for (mk, pk) in m.iter_mut().zip(p.iter()) {
                *mk += w * pk;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn uniform_weights_sum_to_one() {
        for n in [1usize, 3, 7, 10, 1000, 60000] {
            let support = (0..n).map(|i| pt(&[i as f64])).collect();
            let m = DiscreteMeasure::uniform(support).unwrap();
            let s = compensated_sum(m.weights().iter().copied());
            assert!((s - 1.0).abs() <= WEIGHT_SUM_TOL);
        }
    }

    #[test]
    fn rejects_bad_weights_and_dims() {
        let s = vec![pt(&[0.0]), pt(&[1.0])];
        assert!(DiscreteMeasure::new(s.clone(), vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(s.clone(), vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMeasure::new(s, vec![1.0]).is_err());
        assert!(DiscreteMeasure::uniform(vec![pt(&[0.0]), pt(&[0.0, 1.0])]).is_err());
        assert!(DiscreteMeasure::uniform(vec![]).is_err());
    }

    #[test]
    fn normalized_and_mean() {
        let m = DiscreteMeasure::normalized(vec![pt(&[0.0, 0.0]), pt(&[0.0, 1.0])], &[1.0, 3.0])
            .unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert_eq!(m.mean(), vec![0.0, 0.75]);
    }
}
