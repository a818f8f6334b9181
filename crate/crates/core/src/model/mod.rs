//! Compact STFT-mask enhancement network.
//!
//! Per batch item the network normalizes the mixture, takes its STFT, feeds
//! log-magnitude frames with `±context` neighbours through a ReLU MLP, and
//! emits one sigmoid mask per source. Masked spectrograms are inverted,
//! rescaled by the input standard deviation and projected so the sources sum
//! to the original mixture.

mod checkpoint;
mod net;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::ParamTensors;
use crate::scalar::Scalar;
use crate::signal::StftConfig;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_with_state, save_checkpoint, save_checkpoint_with_state, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use net::{backward, forward, forward_with_mode, infer, ForwardTape, MaskMode};

/// Floor inside the log-magnitude features.
pub const LOG_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArch {
    /// Output slots: 2 (speech, noise) or 3 (speech, noise, noise).
    #[serde(default = "default_sources")]
    pub num_sources: usize,
    /// Number of ReLU layers.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Depth reached by the last growth stage; [`grow_depth`] never exceeds it.
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Neighbouring frames on each side fed alongside the current frame.
    #[serde(default = "default_context")]
    pub context: usize,
    #[serde(default)]
    pub stft: StftConfig,
}

fn default_sources() -> usize {
    2
}
fn default_depth() -> usize {
    2
}
fn default_max_depth() -> usize {
    8
}
fn default_hidden() -> usize {
    128
}
fn default_context() -> usize {
    1
}

impl Default for ModelArch {
    fn default() -> Self {
        Self {
            num_sources: default_sources(),
            depth: default_depth(),
            max_depth: default_max_depth(),
            hidden: default_hidden(),
            context: default_context(),
            stft: StftConfig::default(),
        }
    }
}

impl ModelArch {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.num_sources) {
            return Err(Error::InvalidConfig(format!(
                "num_sources must be 2 or 3, got {}",
                self.num_sources
            )));
        }
        if self.depth == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("depth and hidden must be positive".into()));
        }
        if self.max_depth < self.depth {
            return Err(Error::InvalidConfig(format!(
                "max_depth {} below depth {}",
                self.max_depth, self.depth
            )));
        }
        self.stft.validate()
    }

    pub fn num_bins(&self) -> usize {
        self.stft.num_bins()
    }

    pub fn input_dim(&self) -> usize {
        self.num_bins() * (2 * self.context + 1)
    }

    pub fn output_dim(&self) -> usize {
        self.num_sources * self.num_bins()
    }

    /// `(fan_in, fan_out)` of every affine layer, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.input_dim(), self.hidden)];
        shapes.extend((1..self.depth).map(|_| (self.hidden, self.hidden)));
        shapes.push((self.hidden, self.output_dim()));
        shapes
    }
}

/// Next stage of the depth-growth schedule: depth doubles, capped at
/// `max_depth`.
pub fn grow_depth(arch: &ModelArch) -> ModelArch {
    ModelArch {
        depth: (arch.depth * 2).min(arch.max_depth),
        ..*arch
    }
}

/// Affine layer `x -> x W + b` with `W` stored `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            weight: self.weight.mapv(|v| U::of(v.as_f64())),
            bias: self.bias.mapv(|v| U::of(v.as_f64())),
        }
    }
}

fn layer_tensors<T>(layers: &[Dense<T>]) -> Vec<&[T]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

fn layer_tensors_mut<T>(layers: &mut [Dense<T>]) -> Vec<&mut [T]> {
    layers
        .iter_mut()
        .flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
        .collect()
}

/// All learnable tensors of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskNetParams<T> {
    pub arch: ModelArch,
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> MaskNetParams<T> {
    pub fn zeros(arch: ModelArch) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            layers: arch
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
        })
    }

    pub fn cast<U: Scalar>(&self) -> MaskNetParams<U> {
        MaskNetParams {
            arch: self.arch,
            layers: self.layers.iter().map(Dense::cast).collect(),
        }
    }

    /// Tensor names in checkpoint manifest order.
    pub fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("layers.{i}.weight"), format!("layers.{i}.bias")])
            .collect()
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.shape().to_vec(), l.bias.shape().to_vec()])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensor_shapes() == other.tensor_shapes()
    }
}

impl<T> ParamTensors<T> for MaskNetParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        layer_tensors(&self.layers)
    }
    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        layer_tensors_mut(&mut self.layers)
    }
}

/// Gradients of a scalar loss, shape-congruent with [`MaskNetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(params: &MaskNetParams<T>) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.zip_mut_with(&b.weight, |x, y| *x = *x + *y);
            a.bias.zip_mut_with(&b.bias, |x, y| *x = *x + *y);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| *v == T::zero()))
    }
}

impl<T> ParamTensors<T> for GradientSet<T> {
    fn tensors(&self) -> Vec<&[T]> {
        layer_tensors(&self.layers)
    }
    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        layer_tensors_mut(&mut self.layers)
    }
}

/// Glorot-uniform weights and zero biases, deterministic in `seed`.
pub fn init_params<T: Scalar>(arch: &ModelArch, seed: u64) -> Result<MaskNetParams<T>> {
    let mut params = MaskNetParams::zeros(*arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut params.layers {
        let (fan_in, fan_out) = layer.weight.dim();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        layer.weight.mapv_inplace(|_| T::of(rng.random_range(-limit..limit)));
    }
    Ok(params)
}
