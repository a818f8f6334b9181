use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann window.
    #[default]
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    #[serde(default = "default_fft_size")]
    pub fft_size: usize,
    #[serde(default = "default_hop")]
    pub hop: usize,
    #[serde(default)]
    pub window: Window,
}

fn default_fft_size() -> usize {
    512
}

fn default_hop() -> usize {
    128
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: default_fft_size(),
            hop: default_hop(),
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        let cfg = Self {
            fft_size,
            hop,
            window: Window::Hann,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A periodic Hann window overlap-adds to a constant whenever the hop
    /// divides the frame length at least twice.
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 4 || !self.fft_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "fft_size must be even and >= 4, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || !self.fft_size.is_multiple_of(self.hop) || self.fft_size / self.hop < 2 {
            return Err(Error::InvalidConfig(format!(
                "hop {} must divide fft_size {} with at least 2x overlap",
                self.hop, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn padding(&self) -> usize {
        self.fft_size / 2
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        1 + (len + 2 * self.padding() - self.fft_size) / self.hop
    }

    pub fn min_len(&self) -> usize {
        self.padding() + 1
    }
}

/// One-sided complex STFT, `F x N` (bins by frames).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub bins: Array2<Complex<T>>,
    pub fft_size: usize,
    pub hop: usize,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn num_bins(&self) -> usize {
        self.bins.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.bins.ncols()
    }
}

/// Cached FFT plans and window for one [`StftConfig`].
pub struct StftPlan<T: Scalar> {
    cfg: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> StftPlan<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.fft_size;
        let window = (0..k)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                T::of(0.5 - 0.5 * phase.cos())
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window,
            forward: planner.plan_fft_forward(k),
            inverse: planner.plan_fft_inverse(k),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    fn padded(&self, x: &[T]) -> Result<Vec<T>> {
        let p = self.cfg.padding();
        let t = x.len();
        if t < self.cfg.min_len() {
            return Err(Error::InvalidSignal(format!(
                "signal of {t} samples is too short for reflection padding of {p}"
            )));
        }
        let last = (t - 1) as isize;
        Ok((0..t + 2 * p)
            .map(|j| {
                let i = j as isize - p as isize;
                let i = if i < 0 {
                    -i
                } else if i > last {
                    2 * last - i
                } else {
                    i
                };
                x[i as usize]
            })
            .collect())
    }

    pub fn stft(&self, x: &[T]) -> Result<Spectrogram<T>> {
        let k = self.cfg.fft_size;
        let hop = self.cfg.hop;
        let f = self.cfg.num_bins();
        let xp = self.padded(x)?;
        let n = self.cfg.num_frames(x.len());
        let mut bins = Array2::from_elem((f, n), Complex::new(T::zero(), T::zero()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); k];
        for frame in 0..n {
            let start = frame * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(xp[start + i] * self.window[i], T::zero());
            }
            self.forward.process(&mut buf);
            for (bin, v) in buf[..f].iter().enumerate() {
                bins[[bin, frame]] = *v;
            }
        }
        Ok(Spectrogram { bins, fft_size: k, hop })
    }

    /// Sum of squared synthesis windows over the padded signal.
    fn window_norm(&self, frames: usize) -> Vec<T> {
        let k = self.cfg.fft_size;
        let mut norm = vec![T::zero(); (frames - 1) * self.cfg.hop + k];
        for frame in 0..frames {
            let start = frame * self.cfg.hop;
            for (i, w) in self.window.iter().enumerate() {
                norm[start + i] = norm[start + i] + *w * *w;
            }
        }
        norm
    }

    fn check_span(&self, frames: usize, out_len: usize) -> Result<Vec<T>> {
        if frames == 0 {
            return Err(Error::InvalidSignal("spectrogram has no frames".into()));
        }
        let p = self.cfg.padding();
        let span = (frames - 1) * self.cfg.hop + self.cfg.fft_size;
        if out_len == 0 || p + out_len > span {
            return Err(Error::InvalidSignal(format!(
                "output length {out_len} exceeds reconstructable span of {frames} frames"
            )));
        }
        let norm = self.window_norm(frames);
        let tiny = T::of(1e-10);
        if norm[p..p + out_len].iter().any(|v| *v <= tiny) {
            return Err(Error::InvalidSignal(format!(
                "output length {out_len} reaches samples not covered by any window"
            )));
        }
        Ok(norm)
    }

    /// Weighted overlap-add inverse. Exact inverse of [`StftPlan::stft`] on the
    /// original span.
    pub fn istft(&self, spec: &Spectrogram<T>, out_len: usize) -> Result<Vec<T>> {
        let k = self.cfg.fft_size;
        let hop = self.cfg.hop;
        let f = self.cfg.num_bins();
        if spec.fft_size != k || spec.hop != hop || spec.num_bins() != f {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram ({} bins, fft {}, hop {}) does not match config (fft {k}, hop {hop})",
                spec.num_bins(),
                spec.fft_size,
                spec.hop
            )));
        }
        let frames = spec.num_frames();
        let norm = self.check_span(frames, out_len)?;
        let p = self.cfg.padding();
        let inv_k = T::one() / T::of(k as f64);
        let mut out = vec![T::zero(); norm.len()];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); k];
        for frame in 0..frames {
            buf[0] = Complex::new(spec.bins[[0, frame]].re, T::zero());
            buf[k / 2] = Complex::new(spec.bins[[k / 2, frame]].re, T::zero());
            for bin in 1..k / 2 {
                let v = spec.bins[[bin, frame]];
                buf[bin] = v;
                buf[k - bin] = v.conj();
            }
            self.inverse.process(&mut buf);
            let start = frame * hop;
            for (i, v) in buf.iter().enumerate() {
                out[start + i] = out[start + i] + self.window[i] * v.re * inv_k;
            }
        }
        Ok((p..p + out_len).map(|j| out[j] / norm[j]).collect())
    }

    /// Adjoint of [`StftPlan::istft`]: maps a gradient on the output waveform
    /// to gradients on the real and imaginary parts of every bin (packed as
    /// `re + i*im`).
    pub fn istft_adjoint(&self, grad: &[T], frames: usize) -> Result<Array2<Complex<T>>> {
        let k = self.cfg.fft_size;
        let hop = self.cfg.hop;
        let f = self.cfg.num_bins();
        let norm = self.check_span(frames, grad.len())?;
        let p = self.cfg.padding();
        let mut gp = vec![T::zero(); norm.len()];
        for (i, g) in grad.iter().enumerate() {
            gp[p + i] = *g / norm[p + i];
        }
        let inv_k = T::one() / T::of(k as f64);
        let two_inv_k = inv_k + inv_k;
        let mut out = Array2::from_elem((f, frames), Complex::new(T::zero(), T::zero()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); k];
        for frame in 0..frames {
            let start = frame * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(self.window[i] * gp[start + i], T::zero());
            }
            self.forward.process(&mut buf);
            out[[0, frame]] = Complex::new(buf[0].re * inv_k, T::zero());
            out[[k / 2, frame]] = Complex::new(buf[k / 2].re * inv_k, T::zero());
            for bin in 1..k / 2 {
                out[[bin, frame]] = buf[bin] * two_inv_k;
            }
        }
        Ok(out)
    }
}

/// Analysis transform of `x` (reflection padded by `fft_size / 2`).
pub fn stft(x: &[f64], cfg: &StftConfig) -> Result<Spectrogram<f64>> {
    StftPlan::new(*cfg)?.stft(x)
}

pub fn istft(spec: &Spectrogram<f64>, cfg: &StftConfig, out_len: usize) -> Result<Vec<f64>> {
    StftPlan::new(*cfg)?.istft(spec, out_len)
}
