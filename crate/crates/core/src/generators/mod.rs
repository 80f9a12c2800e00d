//! Parametric generators `g(θ, z)` with exact parameter VJPs, and Adam.

mod adam;

pub use adam::AdamState;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measures::Point;
use crate::{Error, Result};

/// Flat parameter vector θ; its layout is defined by the [`Generator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Tanh => x.tanh(),
            Self::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Self::Relu => x.max(0.0),
        }
    }

    /// Derivative at pre-activation `x`; relu uses 0 at the kink.
    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "softplus" => Ok(Self::Softplus),
            "relu" => Ok(Self::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

/// Generator architecture.
///
/// - `Translation`: `g(θ, z) = z + θ`, θ ∈ R^d.
/// - `Affine`: `g(θ, z) = A z + b`, θ = (A row-major, b).
/// - `Mlp`: fully connected layers through `widths = [d_z, h_1, …, d_x]`;
///   hidden layers use `activation`, the output layer is linear. θ stores each
///   layer's weight matrix (row-major, `out × in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Translation {
        dim: usize,
    },
    Affine {
        latent_dim: usize,
        output_dim: usize,
    },
    Mlp {
        widths: Vec<usize>,
        activation: Activation,
    },
}

impl Generator {
    pub fn translation(dim: usize) -> Self {
        Self::Translation { dim }
    }

    pub fn affine(latent_dim: usize, output_dim: usize) -> Self {
        Self::Affine {
            latent_dim,
            output_dim,
        }
    }

    pub fn mlp(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "mlp widths must list at least input and output sizes, all positive; got {widths:?}"
            )));
        }
        Ok(Self::Mlp { widths, activation })
    }

    /// Rejects shapes that deserialization lets through: zero sizes and MLPs
    /// with fewer than two widths.
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Translation { dim } => *dim > 0,
            Self::Affine {
                latent_dim,
                output_dim,
            } => *latent_dim > 0 && *output_dim > 0,
            Self::Mlp { widths, .. } => widths.len() >= 2 && !widths.contains(&0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid generator shape {self:?}")))
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Self::Translation { dim } => *dim,
            Self::Affine { latent_dim, .. } => *latent_dim,
            Self::Mlp { widths, .. } => widths[0],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::Translation { dim } => *dim,
            Self::Affine { output_dim, .. } => *output_dim,
            Self::Mlp { widths, .. } => *widths.last().unwrap(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Self::Translation { dim } => *dim,
            Self::Affine {
                latent_dim,
                output_dim,
            } => output_dim * latent_dim + output_dim,
            Self::Mlp { widths, .. } => widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum(),
        }
    }

    /// Seeded initialization: translation at the origin; weight matrices
    /// uniform in `±1/√fan_in`; biases zero.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(self.num_params());
        let mut dense = |fan_in: usize, fan_out: usize, theta: &mut Vec<f64>| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            theta.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            theta.extend(std::iter::repeat_n(0.0, fan_out));
        };
        match self {
            Self::Translation { dim } => theta.resize(*dim, 0.0),
            Self::Affine {
                latent_dim,
                output_dim,
            } => dense(*latent_dim, *output_dim, &mut theta),
            Self::Mlp { widths, .. } => {
                for w in widths.windows(2) {
                    dense(w[0], w[1], &mut theta);
                }
            }
        }
        ParamVector(theta)
    }

    fn check(&self, theta: &ParamVector, z: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: theta.len(),
            });
        }
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `g(θ, z)`.
    pub fn forward(&self, theta: &ParamVector, z: &[f64]) -> Result<Point> {
        self.check(theta, z)?;
        let out = match self {
            Self::Translation { .. } => z.iter().zip(&theta.0).map(|(a, b)| a + b).collect(),
            Self::Affine {
                latent_dim,
                output_dim,
            } => {
                let (a, b) = theta.0.split_at(latent_dim * output_dim);
                let mut out = b.to_vec();
                dense_forward(a, z, &mut out);
                out
            }
            Self::Mlp { widths, activation } => {
                let mut tape = MlpTape::default();
                mlp_forward(widths, *activation, &theta.0, z, &mut tape);
                tape.output
            }
        };
        Point::new(out).map_err(|_| Error::NonFinite {
            what: "generator output",
            step: 0,
        })
    }

    /// `(∂_θ g(θ, z))^T v`.
    pub fn vjp(&self, theta: &ParamVector, z: &[f64], v: &[f64]) -> Result<ParamVector> {
        let mut out = vec![0.0; self.num_params()];
        self.vjp_accumulate(theta, z, v, 1.0, &mut out)?;
        Ok(ParamVector(out))
    }

    /// Adds `scale · (∂_θ g(θ, z))^T v` to `out`. Returns `true` when a relu
    /// pre-activation sat exactly on its kink (subgradient 0 was used).
    pub fn vjp_accumulate(
        &self,
        theta: &ParamVector,
        z: &[f64],
        v: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<bool> {
        self.check(theta, z)?;
        if v.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: v.len(),
            });
        }
        if out.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: out.len(),
            });
        }
        match self {
            Self::Translation { .. } => {
                for (o, vk) in out.iter_mut().zip(v) {
                    *o += scale * vk;
                }
                Ok(false)
            }
            Self::Affine {
                latent_dim,
                output_dim,
            } => {
                let (ga, gb) = out.split_at_mut(latent_dim * output_dim);
                dense_vjp_params(z, v, scale, ga, gb);
                Ok(false)
            }
            Self::Mlp { widths, activation } => {
                let mut tape = MlpTape::default();
                mlp_forward(widths, *activation, &theta.0, z, &mut tape);
                Ok(mlp_backward(widths, *activation, &theta.0, &tape, v, scale, out))
            }
        }
    }

    /// Upper bound on the Lipschitz constant of `z ↦ g(θ, z)`: product of the
    /// layers' Frobenius norms (activations are 1-Lipschitz).
    pub fn latent_lipschitz_bound(&self, theta: &ParamVector) -> f64 {
        match self {
            Self::Translation { .. } => 1.0,
            Self::Affine {
                latent_dim,
                output_dim,
            } => frobenius(&theta.0[..latent_dim * output_dim]),
            Self::Mlp { widths, .. } => {
                let mut offset = 0;
                let mut bound = 1.0;
                for w in widths.windows(2) {
                    bound *= frobenius(&theta.0[offset..offset + w[0] * w[1]]);
                    offset += w[0] * w[1] + w[1];
                }
                bound
            }
        }
    }
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `out += A x` with `A` row-major `out.len() × x.len()`.
fn dense_forward(a: &[f64], x: &[f64], out: &mut [f64]) {
    for (row, o) in a.chunks_exact(x.len()).zip(out.iter_mut()) {
        *o += row.iter().zip(x).map(|(r, xk)| r * xk).sum::<f64>();
    }
}

/// Parameter gradients of `y = A x + b` given upstream `v`.
fn dense_vjp_params(x: &[f64], v: &[f64], scale: f64, ga: &mut [f64], gb: &mut [f64]) {
    for ((row, vi), bi) in ga.chunks_exact_mut(x.len()).zip(v).zip(gb.iter_mut()) {
        let s = scale * vi;
        *bi += s;
        for (r, xk) in row.iter_mut().zip(x) {
            *r += s * xk;
        }
    }
}

#[derive(Default)]
struct MlpTape {
    /// Input of each layer (z, then hidden activations).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn mlp_forward(widths: &[usize], act: Activation, theta: &[f64], z: &[f64], tape: &mut MlpTape) {
    let n_layers = widths.len() - 1;
    let mut offset = 0;
    let mut h = z.to_vec();
    for (l, w) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let a = &theta[offset..offset + fan_in * fan_out];
        let b = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut y = b.to_vec();
        dense_forward(a, &h, &mut y);
        tape.inputs.push(h);
        if l + 1 < n_layers {
            h = y.iter().map(|v| act.apply(*v)).collect();
            tape.pre.push(y);
        } else {
            h = y;
        }
    }
    tape.output = h;
}

fn mlp_backward(
    widths: &[usize],
    act: Activation,
    theta: &[f64],
    tape: &MlpTape,
    v: &[f64],
    scale: f64,
    out: &mut [f64],
) -> bool {
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut offset = 0;
    for w in widths.windows(2) {
        offsets.push(offset);
        offset += w[0] * w[1] + w[1];
    }
    let mut at_kink = false;
    let mut delta = v.to_vec();
    for l in (0..widths.len() - 1).rev() {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let off = offsets[l];
        let (ga, rest) = out[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
        dense_vjp_params(&tape.inputs[l], &delta, scale, ga, rest);
        if l == 0 {
            break;
        }
        let a = &theta[off..off + fan_in * fan_out];
        let mut up = vec![0.0; fan_in];
        for (row, d) in a.chunks_exact(fan_in).zip(&delta) {
            for (u, r) in up.iter_mut().zip(row) {
                *u += r * d;
            }
        }
        for (u, p) in up.iter_mut().zip(&tape.pre[l - 1]) {
            if act == Activation::Relu && *p == 0.0 {
                at_kink = true;
            }
            *u *= act.derivative(*p);
        }
        delta = up;
    }
    at_kink
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    /// Central differences of `θ ↦ ⟨g(θ, z), v⟩`.
    fn fd_vjp(g: &Generator, theta: &[f64], z: &[f64], v: &[f64], h: f64) -> Vec<f64> {
        let inner = |t: &[f64]| -> f64 {
            let x = g.forward(&ParamVector(t.to_vec()), z).unwrap();
            x.iter().zip(v).map(|(a, b)| a * b).sum()
        };
        (0..theta.len())
            .map(|k| {
                let mut tp = theta.to_vec();
                let mut tm = theta.to_vec();
                tp[k] += h;
                tm[k] -= h;
                (inner(&tp) - inner(&tm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    #[test]
    fn forward_examples() {
        let t = Generator::translation(2);
        let x = t.forward(&ParamVector(vec![0.0, 0.5]), &[0.0, 0.0]).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.5]);

        let a = Generator::affine(2, 2);
        let ident = ParamVector(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.forward(&ident, &[3.0, -4.0]).unwrap().as_slice(), &[3.0, -4.0]);

        let m = Generator::mlp(vec![3, 5, 2], Activation::Tanh).unwrap();
        let zero = ParamVector::zeros(m.num_params());
        assert_eq!(m.forward(&zero, &[1.0, -2.0, 0.3]).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_errors() {
        let t = Generator::translation(2);
        assert!(t.forward(&ParamVector(vec![0.0]), &[0.0, 0.0]).is_err());
        assert!(t.forward(&ParamVector(vec![0.0, 0.0]), &[0.0]).is_err());
        assert!(t.vjp(&ParamVector(vec![0.0, 0.0]), &[0.0, 0.0], &[1.0]).is_err());
        assert!(Generator::mlp(vec![3], Activation::Tanh).is_err());
        assert!(Generator::mlp(vec![3, 0, 2], Activation::Tanh).is_err());
    }

    #[test]
    fn param_counts() {
        assert_eq!(Generator::translation(3).num_params(), 3);
        assert_eq!(Generator::affine(4, 2).num_params(), 10);
        let m = Generator::mlp(vec![2, 4, 2], Activation::Tanh).unwrap();
        assert_eq!(m.num_params(), 2 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(m.init_params(3).len(), m.num_params());
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let m = Generator::mlp(vec![16, 8, 2], Activation::Tanh).unwrap();
        assert_eq!(m.init_params(1), m.init_params(1));
        assert_ne!(m.init_params(1), m.init_params(2));
        let theta = m.init_params(1);
        assert!(theta.as_slice()[..128].iter().all(|w| w.abs() <= 0.25));
    }

    #[test]
    fn translation_vjp_is_identity() {
        let t = Generator::translation(2);
        let g = t.vjp(&ParamVector(vec![0.3, 0.1]), &[5.0, 6.0], &[0.0, -1.0]).unwrap();
        assert_eq!(g.as_slice(), &[0.0, -1.0]);
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let gens = [
            (Generator::translation(3), 1e-6),
            (Generator::affine(3, 2), 1e-6),
            (Generator::mlp(vec![2, 4, 2], Activation::Tanh).unwrap(), 1e-5),
            (Generator::mlp(vec![3, 6, 5, 2], Activation::Softplus).unwrap(), 1e-5),
            (Generator::mlp(vec![2, 7, 3], Activation::Relu).unwrap(), 1e-5),
        ];
        for (g, tol) in gens {
            for _ in 0..50 {
                let theta = random_vec(&mut rng, g.num_params(), 1.0);
                let z = random_vec(&mut rng, g.latent_dim(), 1.5);
                let v = random_vec(&mut rng, g.output_dim(), 1.0);
                let exact = g.vjp(&ParamVector(theta.clone()), &z, &v).unwrap();
                let fd = fd_vjp(&g, &theta, &z, &v, 1e-6);
                let e = rel_err(exact.as_slice(), &fd);
                assert!(e <= tol, "{g:?}: rel err {e}");
            }
        }
    }

    #[test]
    fn relu_kink_is_flagged() {
        let g = Generator::mlp(vec![1, 1, 1], Activation::Relu).unwrap();
        // hidden pre-activation = 1·0 + 0 = 0
        let theta = ParamVector(vec![1.0, 0.0, 1.0, 0.0]);
        let mut out = vec![0.0; 4];
        assert!(g.vjp_accumulate(&theta, &[0.0], &[1.0], 1.0, &mut out).unwrap());
        let mut out = vec![0.0; 4];
        assert!(!g.vjp_accumulate(&theta, &[1.0], &[1.0], 1.0, &mut out).unwrap());
    }

    #[test]
    fn mlp_is_lipschitz_in_latent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Generator::mlp(vec![3, 8, 8, 2], Activation::Tanh).unwrap();
        for seed in 0..10 {
            let theta = g.init_params(seed);
            let bound = g.latent_lipschitz_bound(&theta);
            for _ in 0..20 {
                let z1 = random_vec(&mut rng, 3, 2.0);
                let z2 = random_vec(&mut rng, 3, 2.0);
                let x1 = g.forward(&theta, &z1).unwrap();
                let x2 = g.forward(&theta, &z2).unwrap();
                let dx = x1
                    .iter().zip(x2.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let dz = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(dx <= bound * dz + 1e-12);
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(Activation::Softplus.apply(-1000.0), 0.0);
        assert_eq!(Activation::Softplus.apply(1000.0), 1000.0);
        assert!((Activation::Softplus.derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deserialized_shapes_are_validated() {
        let bad: Generator = serde_json::from_str(r#"{"kind":"mlp","widths":[3],"activation":"tanh"}"#).unwrap();
        assert!(bad.validate().is_err());
        let bad: Generator = serde_json::from_str(r#"{"kind":"translation","dim":0}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(Generator::affine(2, 3).validate().is_ok());
    }
}
