//! Corpora: a synthetic two-domain generator, WAV ingestion, splits for each
//! supervision regime and deterministic batch sampling.

mod io;
mod sampler;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;

pub use io::{load_manifest, load_wav_dir, write_corpus, Manifest, ManifestItem, WavRole};
pub use sampler::{Batch, BatchSampler, MixMode};
pub use split::{split_for_regime, RegimeSplit, SplitConfig, SplitRegime};
pub use synth::{generate_corpus, spectral_centroid, NoiseDomain, SnrMode, SynthSpec};

/// Tolerance for `mixture == speech + noise` on paired items.
pub const PAIRED_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// Speech, noise and their mixture.
    Paired,
    /// Isolated noise recordings; `mixture` holds the recording itself.
    NoiseOnly,
    /// Noisy recordings without isolated sources.
    MixtureOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub speech: Option<Waveform>,
    pub noise: Option<Waveform>,
    pub mixture: Waveform,
    /// Speech-to-noise energy ratio used when mixing, if known.
    pub snr_db: Option<f64>,
    /// SI-SDR of the unprocessed mixture against the clean speech.
    pub input_si_sdr_db: Option<f64>,
}

impl CorpusItem {
    pub fn paired(speech: Waveform, noise: Waveform, mixture: Waveform) -> Self {
        Self {
            speech: Some(speech),
            noise: Some(noise),
            mixture,
            snr_db: None,
            input_si_sdr_db: None,
        }
    }

    pub fn mixture_only(mixture: Waveform) -> Self {
        Self {
            speech: None,
            noise: None,
            mixture,
            snr_db: None,
            input_si_sdr_db: None,
        }
    }

    pub fn noise_only(noise: Waveform) -> Self {
        Self {
            speech: None,
            noise: Some(noise.clone()),
            mixture: noise,
            snr_db: None,
            input_si_sdr_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    kind: CorpusKind,
    domain_tag: String,
    items: Vec<CorpusItem>,
}

impl Corpus {
    /// Validates the role invariants of `kind` and a common sample rate.
    pub fn new(kind: CorpusKind, domain_tag: impl Into<String>, items: Vec<CorpusItem>) -> Result<Self> {
        let mut rate = None;
        for (i, item) in items.iter().enumerate() {
            let r = item.mixture.sample_rate_hz();
            match rate {
                None => rate = Some(r),
                Some(r0) if r0 != r => return Err(Error::SampleRateMismatch(r0, r)),
                _ => {}
            }
            match kind {
                CorpusKind::Paired => {
                    let (Some(s), Some(n)) = (&item.speech, &item.noise) else {
                        return Err(Error::MissingRole(format!(
                            "item {i} of a paired corpus lacks speech or noise"
                        )));
                    };
                    let m = item.mixture.samples();
                    if s.len() != m.len() || n.len() != m.len() {
                        return Err(Error::LengthMismatch(s.len().max(n.len()), m.len()));
                    }
                    let worst = m
                        .iter()
                        .zip(s.samples())
                        .zip(n.samples())
                        .fold(0.0f64, |acc, ((m, s), n)| acc.max((m - s - n).abs()));
                    if worst > PAIRED_TOLERANCE {
                        return Err(Error::InvalidSignal(format!(
                            "item {i}: mixture differs from speech + noise by {worst:e}"
                        )));
                    }
                }
                CorpusKind::NoiseOnly => {
                    if item.speech.is_some() || item.noise.is_none() {
                        return Err(Error::MissingRole(format!(
                            "item {i} of a noise-only corpus must carry noise only"
                        )));
                    }
                }
                CorpusKind::MixtureOnly => {
                    if item.speech.is_some() || item.noise.is_some() {
                        return Err(Error::InvalidSignal(format!(
                            "item {i} of a mixture-only corpus carries isolated sources"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            kind,
            domain_tag: domain_tag.into(),
            items,
        })
    }

    pub fn kind(&self) -> CorpusKind {
        self.kind
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    pub fn items(&self) -> &[CorpusItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sample_rate_hz(&self) -> Option<u32> {
        self.items.first().map(|i| i.mixture.sample_rate_hz())
    }

    /// Subset by item index, preserving metadata.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            domain_tag: self.domain_tag.clone(),
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }

    /// Drops the isolated sources, keeping only the mixtures.
    pub fn to_mixture_only(&self) -> Self {
        Self {
            kind: CorpusKind::MixtureOnly,
            domain_tag: self.domain_tag.clone(),
            items: self
                .items
                .iter()
                .map(|it| CorpusItem {
                    speech: None,
                    noise: None,
                    ..it.clone()
                })
                .collect(),
        }
    }

    /// Keeps the isolated noises of a paired corpus as noise recordings.
    pub fn to_noise_only(&self) -> Result<Self> {
        let items = self
            .items
            .iter()
            .map(|it| {
                it.noise
                    .clone()
                    .map(CorpusItem::noise_only)
                    .ok_or(Error::UnpairedCorpus)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: CorpusKind::NoiseOnly,
            domain_tag: self.domain_tag.clone(),
            items,
        })
    }

    pub fn require_paired(&self) -> Result<()> {
        if self.kind != CorpusKind::Paired {
            return Err(Error::UnpairedCorpus);
        }
        Ok(())
    }

    /// Common item length, or an error when lengths differ.
    pub fn uniform_len(&self) -> Result<usize> {
        let first = self.items.first().ok_or(Error::EmptyCorpus)?.mixture.len();
        for it in &self.items {
            if it.mixture.len() != first {
                return Err(Error::LengthMismatch(first, it.mixture.len()));
            }
        }
        Ok(first)
    }
}
