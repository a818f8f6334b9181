use ndarray::{Array2, Array3, ArrayView1, Axis};
use num_complex::Complex;
use rayon::prelude::*;

use super::{Dense, GradientSet, MaskNetParams, ModelArch, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{mixture_consistency, normalize_samples, SignalBatch, Spectrogram, StftPlan};

/// How masks are produced. `Unit` forces every mask to one, a diagnostic that
/// bypasses the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    Learned,
    Unit,
}

struct ItemTape<T> {
    features: Array2<T>,
    /// Post-ReLU activations, one per hidden layer.
    hidden: Vec<Array2<T>>,
    /// `N x (M * F)` sigmoid outputs.
    masks: Array2<T>,
    spec: Array2<Complex<T>>,
    std: f64,
}

/// Activations cached by [`forward`] for [`backward`].
pub struct ForwardTape<T> {
    arch: ModelArch,
    len: usize,
    mode: MaskMode,
    items: Vec<ItemTape<T>>,
}

impl<T> ForwardTape<T> {
    pub fn batch_size(&self) -> usize {
        self.items.len()
    }

    /// Mask values of item `b`, laid out `frames x (sources * bins)`.
    pub fn masks(&self, b: usize) -> &Array2<T> {
        &self.items[b].masks
    }
}

fn features<T: Scalar>(spec: &Array2<Complex<T>>, context: usize) -> Array2<T> {
    let (f, n) = spec.dim();
    let floor = T::of(LOG_FLOOR);
    let logmag = spec.mapv(|c| (c.norm() + floor).ln());
    let width = 2 * context + 1;
    let mut out = Array2::zeros((n, f * width));
    for frame in 0..n {
        for c in 0..width {
            let src = (frame + c).saturating_sub(context).min(n - 1);
            out.row_mut(frame)
                .slice_mut(ndarray::s![c * f..(c + 1) * f])
                .assign(&logmag.column(src));
        }
    }
    out
}

fn affine<T: Scalar>(x: &Array2<T>, layer: &Dense<T>) -> Array2<T> {
    x.dot(&layer.weight) + &layer.bias
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn check_input<T: Scalar>(params: &MaskNetParams<T>, batch: &SignalBatch) -> Result<()> {
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters"));
    }
    let min = params.arch.stft.min_len();
    if batch.len() < min {
        return Err(Error::InvalidSignal(format!(
            "input of {} samples shorter than the {min} the STFT needs",
            batch.len()
        )));
    }
    Ok(())
}

fn run_item<T: Scalar>(
    params: &MaskNetParams<T>,
    plan: &StftPlan<T>,
    row: ArrayView1<f64>,
    mode: MaskMode,
) -> Result<(Array2<f64>, ItemTape<T>)> {
    let arch = &params.arch;
    let len = row.len();
    let (normed, stats) = normalize_samples(&row.to_vec());
    let normed: Vec<T> = normed.into_iter().map(T::of).collect();
    let spec = plan.stft(&normed)?.bins;
    let (f, n) = spec.dim();

    let feats = features(&spec, arch.context);
    let mut hidden = Vec::with_capacity(arch.depth);
    let mut act = feats.clone();
    for layer in &params.layers[..arch.depth] {
        act = affine(&act, layer).mapv(|v| v.max(T::zero()));
        hidden.push(act.clone());
    }
    let masks = match mode {
        MaskMode::Learned => affine(&act, &params.layers[arch.depth]).mapv(sigmoid),
        MaskMode::Unit => Array2::from_elem((n, arch.output_dim()), T::one()),
    };

    let mut estimates = Array2::zeros((arch.num_sources, len));
    let mut masked = Spectrogram {
        bins: spec.clone(),
        fft_size: arch.stft.fft_size,
        hop: arch.stft.hop,
    };
    for src in 0..arch.num_sources {
        for frame in 0..n {
            for bin in 0..f {
                masked.bins[[bin, frame]] = spec[[bin, frame]] * masks[[frame, src * f + bin]];
            }
        }
        let wave = plan.istft(&masked, len)?;
        for (dst, v) in estimates.row_mut(src).iter_mut().zip(wave) {
            *dst = v.as_f64() * stats.std;
        }
    }
    Ok((
        estimates,
        ItemTape {
            features: feats,
            hidden,
            masks,
            spec,
            std: stats.std,
        },
    ))
}

/// Runs the network on a batch, returning `M x B x T` estimates that sum to
/// the input mixtures, and the tape needed by [`backward`].
pub fn forward<T: Scalar>(params: &MaskNetParams<T>, batch: &SignalBatch) -> Result<(Array3<f64>, ForwardTape<T>)> {
    forward_with_mode(params, batch, MaskMode::Learned)
}

pub fn forward_with_mode<T: Scalar>(
    params: &MaskNetParams<T>,
    batch: &SignalBatch,
    mode: MaskMode,
) -> Result<(Array3<f64>, ForwardTape<T>)> {
    check_input(params, batch)?;
    let plan = StftPlan::<T>::new(params.arch.stft)?;
    let data = batch.data();
    let results = (0..batch.batch_size())
        .into_par_iter()
        .map(|b| run_item(params, &plan, data.row(b), mode))
        .collect::<Result<Vec<_>>>()?;
    let (m, bsz, t) = (params.arch.num_sources, batch.batch_size(), batch.len());
    let mut raw = Array3::zeros((m, bsz, t));
    let mut items = Vec::with_capacity(bsz);
    for (b, (est, tape)) in results.into_iter().enumerate() {
        raw.index_axis_mut(Axis(1), b).assign(&est);
        items.push(tape);
    }
    let estimates = mixture_consistency(&raw, data.view())?;
    Ok((
        estimates,
        ForwardTape {
            arch: params.arch,
            len: t,
            mode,
            items,
        },
    ))
}

/// Inference-only forward pass; nothing is kept for a backward pass.
pub fn infer<T: Scalar>(params: &MaskNetParams<T>, batch: &SignalBatch) -> Result<Array3<f64>> {
    check_input(params, batch)?;
    let plan = StftPlan::<T>::new(params.arch.stft)?;
    let data = batch.data();
    let results = (0..batch.batch_size())
        .into_par_iter()
        .map(|b| run_item(params, &plan, data.row(b), MaskMode::Learned).map(|(est, _)| est))
        .collect::<Result<Vec<_>>>()?;
    let mut raw = Array3::zeros((params.arch.num_sources, batch.batch_size(), batch.len()));
    for (b, est) in results.into_iter().enumerate() {
        raw.index_axis_mut(Axis(1), b).assign(&est);
    }
    mixture_consistency(&raw, data.view())
}

fn item_backward<T: Scalar>(
    params: &MaskNetParams<T>,
    plan: &StftPlan<T>,
    tape: &ItemTape<T>,
    grad: ndarray::ArrayView2<f64>,
    mode: MaskMode,
) -> Result<GradientSet<T>> {
    let arch = &params.arch;
    let m = arch.num_sources;
    let (f, n) = tape.spec.dim();
    let mut out = GradientSet::zeros_like(params);
    if mode == MaskMode::Unit {
        return Ok(out);
    }

    // mixture consistency: out_i = est_i + (mix - sum_j est_j) / M
    let mean = grad.mean_axis(Axis(0)).expect("M >= 2");
    let mut dlogits = Array2::<T>::zeros((n, m * f));
    for src in 0..m {
        let g: Vec<T> = grad
            .row(src)
            .iter()
            .zip(mean.iter())
            .map(|(g, mu)| T::of((g - mu) * tape.std))
            .collect();
        let dspec = plan.istft_adjoint(&g, n)?;
        for frame in 0..n {
            for bin in 0..f {
                let x = tape.spec[[bin, frame]];
                let d = dspec[[bin, frame]];
                let dmask = d.re * x.re + d.im * x.im;
                let mask = tape.masks[[frame, src * f + bin]];
                dlogits[[frame, src * f + bin]] = dmask * mask * (T::one() - mask);
            }
        }
    }

    let depth = arch.depth;
    let mut delta = dlogits;
    for l in (0..=depth).rev() {
        let input = if l == 0 { &tape.features } else { &tape.hidden[l - 1] };
        out.layers[l].weight = input.t().dot(&delta);
        out.layers[l].bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&params.layers[l].weight.t());
            upstream.zip_mut_with(&tape.hidden[l - 1], |d, h| {
                if *h <= T::zero() {
                    *d = T::zero();
                }
            });
            delta = upstream;
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// loss gradient on the `M x B x T` estimates returned by [`forward`].
pub fn backward<T: Scalar>(
    params: &MaskNetParams<T>,
    tape: &ForwardTape<T>,
    grad: &Array3<f64>,
) -> Result<GradientSet<T>> {
    if tape.arch != params.arch {
        return Err(Error::ShapeMismatch(
            "tape was recorded with a different architecture".into(),
        ));
    }
    let expected = (params.arch.num_sources, tape.items.len(), tape.len);
    if grad.dim() != expected {
        return Err(Error::ShapeMismatch(format!(
            "gradient {:?} vs estimates {:?}",
            grad.dim(),
            expected
        )));
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    let plan = StftPlan::<T>::new(params.arch.stft)?;
    let parts = tape
        .items
        .par_iter()
        .enumerate()
        .map(|(b, item)| item_backward(params, &plan, item, grad.index_axis(Axis(1), b), tape.mode))
        .collect::<Result<Vec<_>>>()?;
    let mut total = GradientSet::zeros_like(params);
    for part in &parts {
        total.add_assign(part);
    }
    Ok(total)
}
