use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Point;
use crate::{Error, Result};

/// Shape of the latent distribution ζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentKind {
    Dirac { point: Point },
    /// Independent coordinates `N(mean_k, std_k²)`.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Uniform on the box `[lo_k, hi_k]`.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

/// Seeded latent sampler.
///
/// Every batch is drawn from its own ChaCha stream selected by
/// `(seed, stream_key)`, so batches are reproducible bit for bit and can be
/// generated in any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSampler {
    pub kind: LatentKind,
    pub seed: u64,
}

impl LatentSampler {
    pub fn new(kind: LatentKind, seed: u64) -> Result<Self> {
        match &kind {
            LatentKind::Dirac { .. } => {}
            LatentKind::Gaussian { mean, std } => {
                if mean.len() != std.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        got: std.len(),
                    });
                }
                if mean.iter().chain(std).any(|v| !v.is_finite()) || std.iter().any(|s| *s < 0.0)
                {
                    return Err(Error::InvalidArgument(
                        "gaussian latent needs finite mean and nonnegative std".into(),
                    ));
                }
            }
            LatentKind::Uniform { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
                    return Err(Error::InvalidArgument(
                        "uniform latent needs finite bounds with lo <= hi".into(),
                    ));
                }
            }
        }
        if kind_dim(&kind) == 0 {
            return Err(Error::InvalidArgument(
                "latent dimension must be positive".into(),
            ));
        }
        Ok(Self { kind, seed })
    }

    pub fn dirac(point: Point) -> Result<Self> {
        Self::new(LatentKind::Dirac { point }, 0)
    }

    pub fn standard_gaussian(dim: usize, seed: u64) -> Result<Self> {
        Self::new(
            LatentKind::Gaussian {
                mean: vec![0.0; dim],
                std: vec![1.0; dim],
            },
            seed,
        )
    }

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Result<Self> {
        Self::new(LatentKind::Uniform { lo, hi }, seed)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        kind_dim(&self.kind)
    }

    pub fn dirac_point(&self) -> Option<&Point> {
        match &self.kind {
            LatentKind::Dirac { point } => Some(point),
            _ => None,
        }
    }

    /// Draws `count` latent points from the stream `stream_key`.
    pub fn sample(&self, count: usize, stream_key: u64) -> Vec<Point> {
        if let LatentKind::Dirac { point } = &self.kind {
            return vec![point.clone(); count];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_key);
        (0..count)
            .map(|_| {
                let coords = match &self.kind {
                    LatentKind::Gaussian { mean, std } => mean
                        .iter()
                        .zip(std)
                        .map(|(m, s)| {
                            let e: f64 = rng.sample(StandardNormal);
                            m + s * e
                        })
                        .collect(),
                    LatentKind::Uniform { lo, hi } => lo
                        .iter()
                        .zip(hi)
                        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                        .collect(),
                    LatentKind::Dirac { .. } => unreachable!(),
                };
                Point(coords)
            })
            .collect()
    }
}

fn kind_dim(kind: &LatentKind) -> usize {
    match kind {
        LatentKind::Dirac { point } => point.dim(),
        LatentKind::Gaussian { mean, .. } => mean.len(),
        LatentKind::Uniform { lo, .. } => lo.len(),
    }
}
