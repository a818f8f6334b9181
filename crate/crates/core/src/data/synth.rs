//! Seed-deterministic two-domain corpus generator.
//!
//! Speech is a harmonic stack with a wandering pitch and syllable-rate
//! amplitude envelope. Domain A noise is low-passed white noise; domain B is
//! band-passed, slowly modulated noise with impulsive clicks.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusItem, CorpusKind};
use crate::error::{Error, Result};
use crate::metrics::si_sdr;
use crate::seed::rng_for;
use crate::signal::{energy, mix_at_snr, Waveform};

const PEAK: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseDomain {
    #[serde(rename = "a", alias = "A")]
    A,
    #[serde(rename = "b", alias = "B")]
    B,
}

impl NoiseDomain {
    pub fn tag(self) -> &'static str {
        match self {
            NoiseDomain::A => "a",
            NoiseDomain::B => "b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SnrMode {
    /// Sources are summed as generated.
    #[default]
    Natural,
    Fixed {
        db: f64,
    },
    Uniform {
        lo_db: f64,
        hi_db: f64,
    },
}

impl SnrMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SnrMode::Natural => Ok(()),
            SnrMode::Fixed { db } if db.is_finite() => Ok(()),
            SnrMode::Uniform { lo_db, hi_db } if lo_db.is_finite() && hi_db.is_finite() && lo_db <= hi_db => Ok(()),
            _ => Err(Error::InvalidConfig(format!("invalid snr mode {self:?}"))),
        }
    }

    /// Target SNR for one mixture, `None` for natural mixing.
    pub fn draw(&self, rng: &mut impl Rng) -> Option<f64> {
        match *self {
            SnrMode::Natural => None,
            SnrMode::Fixed { db } => Some(db),
            SnrMode::Uniform { lo_db, hi_db } if lo_db == hi_db => Some(lo_db),
            SnrMode::Uniform { lo_db, hi_db } => Some(rng.random_range(lo_db..=hi_db)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_items: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    pub domain: NoiseDomain,
    #[serde(default)]
    pub snr: SnrMode,
}

fn default_duration() -> f64 {
    1.0
}

fn default_rate() -> u32 {
    8000
}

impl SynthSpec {
    pub fn new(n_items: usize, domain: NoiseDomain) -> Self {
        Self {
            n_items,
            duration_s: default_duration(),
            sample_rate_hz: default_rate(),
            domain,
            snr: SnrMode::Natural,
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::InvalidConfig("n_items must be positive".into()));
        }
        // Domain B needs its 3 kHz band edge below Nyquist.
        if self.sample_rate_hz < 6400 {
            return Err(Error::InvalidConfig(format!(
                "sample_rate_hz {} below the 6400 Hz minimum",
                self.sample_rate_hz
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.num_samples() < 64 {
            return Err(Error::InvalidConfig("duration_s must give at least 64 samples".into()));
        }
        self.snr.validate()
    }
}

fn peak_normalize(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Zero-phase filter keeping frequencies in `[lo_hz, hi_hz]`.
fn band_limit(x: &[f64], rate: f64, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        if f < lo_hz || f > hi_hz {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn speech(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let f0 = rng.random_range(100.0..300.0);
    let partials = rng.random_range(3..=8usize);
    let vibrato_hz = rng.random_range(1.0..3.0);
    let vibrato_phase = rng.random_range(0.0..2.0 * PI);
    let am_hz = rng.random_range(2.0..8.0);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let phases: Vec<f64> = (0..partials).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let nyquist = rate / 2.0;

    let mut out = vec![0.0; n];
    let mut theta = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / rate;
        let f = f0 * (1.0 + 0.05 * (2.0 * PI * vibrato_hz * t + vibrato_phase).sin());
        theta += 2.0 * PI * f / rate;
        let mut v = 0.0;
        for (k, ph) in phases.iter().enumerate() {
            let order = (k + 1) as f64;
            if order * f0 * 1.05 < nyquist {
                v += (order * theta + ph).sin() / order;
            }
        }
        let env = 0.5 * (1.0 - (2.0 * PI * am_hz * t + am_phase).cos());
        *o = v * env;
    }
    peak_normalize(&mut out);
    out
}

fn noise_a(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let cutoff = rng.random_range(500.0..1500.0);
    let raw = white(rng, n);
    let mut out = band_limit(&raw, rate, 0.0, cutoff);
    peak_normalize(&mut out);
    out
}

fn noise_b(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let raw = white(rng, n);
    let mut out = band_limit(&raw, rate, 1000.0, 3000.0);
    peak_normalize(&mut out);
    let mod_hz = rng.random_range(1.0..6.0);
    let mod_phase = rng.random_range(0.0..2.0 * PI);
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / rate;
        *v *= 1.0 + 0.8 * (2.0 * PI * mod_hz * t + mod_phase).sin();
    }
    // Poisson click train: exponential inter-arrival times.
    let rate_per_s = rng.random_range(3.0..10.0);
    let decay = 0.001 * rate;
    let click_len = (5.0 * decay) as usize;
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate_per_s;
        let start = (t * rate) as usize;
        if start >= n {
            break;
        }
        let amp = rng.random_range(0.8..2.0);
        for k in 0..click_len.min(n - start) {
            out[start + k] += amp * rng.random_range(-1.0..1.0) * (-(k as f64) / decay).exp();
        }
    }
    peak_normalize(&mut out);
    out
}

/// Power-weighted mean frequency of `x` in Hz.
pub fn spectral_centroid(x: &[f64], sample_rate_hz: u32) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let p = c.norm_sqr();
        num += p * k as f64 * sample_rate_hz as f64 / n as f64;
        den += p;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn generate_item(spec: &SynthSpec, seed: u64, index: usize) -> Result<CorpusItem> {
    let mut rng = rng_for(seed, index as u64);
    let n = spec.num_samples();
    let rate = spec.sample_rate_hz as f64;
    let s = speech(&mut rng, n, rate);
    let noise = match spec.domain {
        NoiseDomain::A => noise_a(&mut rng, n, rate),
        NoiseDomain::B => noise_b(&mut rng, n, rate),
    };
    let target = spec.snr.draw(&mut rng);
    let sw = Waveform::new(s, spec.sample_rate_hz)?;
    let nw = Waveform::new(noise, spec.sample_rate_hz)?;
    let n_scaled = match target {
        None => nw,
        Some(db) => mix_at_snr(&sw, &nw, db)?.1,
    };
    let mut s = sw.into_samples();
    let mut noise = n_scaled.into_samples();
    let peak = s.iter().zip(&noise).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
    let g = PEAK / peak;
    s.iter_mut().for_each(|v| *v *= g);
    noise.iter_mut().for_each(|v| *v *= g);
    let m: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a + b).collect();

    let snr_db = 10.0 * (energy(&s) / energy(&noise)).log10();
    let input = si_sdr(&m, &s)?;
    Ok(CorpusItem {
        speech: Some(Waveform::new(s, spec.sample_rate_hz)?),
        noise: Some(Waveform::new(noise, spec.sample_rate_hz)?),
        mixture: Waveform::new(m, spec.sample_rate_hz)?,
        snr_db: Some(snr_db),
        input_si_sdr_db: Some(input),
    })
}

/// Paired corpus of `spec.n_items` items. Item `i` depends only on
/// `(spec, seed, i)`.
pub fn generate_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let items = (0..spec.n_items)
        .into_par_iter()
        .map(|i| generate_item(spec, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(CorpusKind::Paired, spec.domain.tag(), items)
}
