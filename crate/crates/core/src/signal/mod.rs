//! Time-domain and time-frequency primitives.
//!
//! Everything in here is a pure function over immutable inputs. Waveforms are
//! kept in `f64`; the network may run its spectral pipeline in `f32`.

mod stft;
pub mod wav;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

pub use stft::{istft, stft, Spectrogram, StftConfig, StftPlan};

/// Lower bound applied to the standard deviation in [`normalize`].
pub const STD_FLOOR: f64 = 1e-8;

/// Mono time-domain audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("empty waveform".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

/// A `B x T` batch of equal-length waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    data: Array2<f64>,
    sample_rate_hz: u32,
}

impl SignalBatch {
    pub fn new(data: Array2<f64>, sample_rate_hz: u32) -> Result<Self> {
        let (b, t) = data.dim();
        if b == 0 || t == 0 {
            return Err(Error::ShapeMismatch(format!("empty batch {b}x{t}")));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("signal batch"));
        }
        Ok(Self { data, sample_rate_hz })
    }

    pub fn from_waveforms(rows: &[&Waveform]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
        let t = first.len();
        let sr = first.sample_rate_hz();
        let mut data = Array2::zeros((rows.len(), t));
        for (mut row, w) in data.outer_iter_mut().zip(rows) {
            if w.len() != t {
                return Err(Error::LengthMismatch(t, w.len()));
            }
            if w.sample_rate_hz() != sr {
                return Err(Error::SampleRateMismatch(sr, w.sample_rate_hz()));
            }
            row.assign(&ndarray::ArrayView1::from(w.samples()));
        }
        Self::new(data, sr)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn batch_size(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, b: usize) -> Waveform {
        Waveform {
            samples: self.data.row(b).to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Mean and (population) standard deviation removed by [`normalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Statistics used by [`normalize_samples`].
pub fn norm_stats(x: &[f64]) -> NormStats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    NormStats {
        mean,
        std: var.sqrt().max(STD_FLOOR),
    }
}

pub fn normalize_samples(x: &[f64]) -> (Vec<f64>, NormStats) {
    let stats = norm_stats(x);
    let y = x.iter().map(|v| (v - stats.mean) / stats.std).collect();
    (y, stats)
}

/// Zero-mean, unit-variance copy of `x` plus the statistics that undo it.
pub fn normalize(x: &Waveform) -> (Waveform, NormStats) {
    let (samples, stats) = normalize_samples(&x.samples);
    (
        Waveform {
            samples,
            sample_rate_hz: x.sample_rate_hz,
        },
        stats,
    )
}

pub fn denormalize(y: &Waveform, stats: NormStats) -> Waveform {
    Waveform {
        samples: y.samples.iter().map(|v| v * stats.std + stats.mean).collect(),
        sample_rate_hz: y.sample_rate_hz,
    }
}

fn check_pair(s: &Waveform, n: &Waveform) -> Result<()> {
    if s.len() != n.len() {
        return Err(Error::LengthMismatch(s.len(), n.len()));
    }
    if s.sample_rate_hz != n.sample_rate_hz {
        return Err(Error::SampleRateMismatch(s.sample_rate_hz, n.sample_rate_hz));
    }
    Ok(())
}

/// Rescales `n` so that the speech-to-noise power ratio equals `snr_db`, and
/// returns the mixture together with the rescaled noise.
pub fn mix_at_snr(s: &Waveform, n: &Waveform, snr_db: f64) -> Result<(Waveform, Waveform)> {
    check_pair(s, n)?;
    let es = s.energy();
    let en = n.energy();
    if es <= 0.0 || en <= 0.0 {
        return Err(Error::DegenerateSource);
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = n.samples.iter().map(|v| v * gain).collect();
    let mixture = s.samples.iter().zip(&scaled).map(|(a, b)| a + b).collect();
    Ok((
        Waveform {
            samples: mixture,
            sample_rate_hz: s.sample_rate_hz,
        },
        Waveform {
            samples: scaled,
            sample_rate_hz: s.sample_rate_hz,
        },
    ))
}

/// Sums speech and noise without touching their power ratio.
pub fn mix_plain(s: &Waveform, n: &Waveform) -> Result<Waveform> {
    check_pair(s, n)?;
    Ok(Waveform {
        samples: s.samples.iter().zip(&n.samples).map(|(a, b)| a + b).collect(),
        sample_rate_hz: s.sample_rate_hz,
    })
}

/// Projects `M x B x T` source estimates so that, per batch item, they sum to
/// the mixture. The residual is split evenly across the `M` sources.
pub fn mixture_consistency(estimates: &Array3<f64>, mixture: ArrayView2<f64>) -> Result<Array3<f64>> {
    let (m, b, t) = estimates.dim();
    if m < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 sources, got {m}")));
    }
    if mixture.dim() != (b, t) {
        return Err(Error::ShapeMismatch(format!(
            "estimates {m}x{b}x{t} vs mixture {:?}",
            mixture.dim()
        )));
    }
    let residual = (&mixture - &estimates.sum_axis(Axis(0))) / m as f64;
    let mut out = estimates.clone();
    for mut slot in out.outer_iter_mut() {
        slot += &residual;
    }
    Ok(out)
}
