use rand::seq::SliceRandom;

use super::{Corpus, SnrMode};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};
use crate::signal::{mix_at_snr, SignalBatch, Waveform};

/// How paired items become batch mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MixMode {
    /// Use the stored mixture.
    #[default]
    Stored,
    /// Remix speech and noise at a fresh SNR drawn per item and epoch.
    Resample(SnrMode),
}

/// Rows of one batch. `speech` and `noise` are present for paired corpora,
/// `noise` alone for noise-only corpora.
#[derive(Debug, Clone)]
pub struct Batch {
    pub mixture: SignalBatch,
    pub speech: Option<SignalBatch>,
    pub noise: Option<SignalBatch>,
    /// Corpus index of every row.
    pub indices: Vec<usize>,
}

/// Deterministic shuffled batches; partial trailing batches are dropped.
#[derive(Debug)]
pub struct BatchSampler<'a> {
    corpus: &'a Corpus,
    batch_size: usize,
    seed: u64,
    epoch: usize,
    order: Vec<usize>,
    cursor: usize,
    mix: MixMode,
}

impl<'a> BatchSampler<'a> {
    pub fn new(corpus: &'a Corpus, batch_size: usize, seed: u64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if batch_size > corpus.len() {
            return Err(Error::BatchTooLarge {
                batch: batch_size,
                corpus: corpus.len(),
            });
        }
        corpus.uniform_len()?;
        let mut sampler = Self {
            corpus,
            batch_size,
            seed,
            epoch: 0,
            order: Vec::new(),
            cursor: 0,
            mix: MixMode::Stored,
        };
        sampler.set_epoch(0);
        Ok(sampler)
    }

    pub fn with_mix(mut self, mix: MixMode) -> Result<Self> {
        if let MixMode::Resample(snr) = mix {
            snr.validate()?;
            self.corpus.require_paired()?;
        }
        self.mix = mix;
        Ok(self)
    }

    /// Restarts at the beginning of `epoch` with that epoch's order.
    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
        self.cursor = 0;
        self.order = (0..self.corpus.len()).collect();
        self.order.shuffle(&mut rng_for(self.seed, epoch as u64));
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.corpus.len() / self.batch_size
    }

    /// Next batch of the current epoch, `None` once the epoch is exhausted.
    pub fn next_batch(&mut self) -> Result<Option<Batch>> {
        if self.cursor + self.batch_size > self.order.len() {
            return Ok(None);
        }
        let indices = self.order[self.cursor..self.cursor + self.batch_size].to_vec();
        self.cursor += self.batch_size;

        let items = self.corpus.items();
        let mut mixtures = Vec::with_capacity(indices.len());
        let mut speech = Vec::with_capacity(indices.len());
        let mut noise = Vec::with_capacity(indices.len());
        for &i in &indices {
            let item = &items[i];
            match (self.mix, &item.speech, &item.noise) {
                (MixMode::Resample(snr), Some(s), Some(n)) => {
                    let mut rng = rng_for(derive_seed(self.seed, self.epoch as u64), i as u64);
                    let (m, n_scaled) = match snr.draw(&mut rng) {
                        Some(db) => mix_at_snr(s, n, db)?,
                        None => (item.mixture.clone(), n.clone()),
                    };
                    mixtures.push(m);
                    speech.push(s.clone());
                    noise.push(n_scaled);
                }
                (_, s, n) => {
                    mixtures.push(item.mixture.clone());
                    if let Some(s) = s {
                        speech.push(s.clone());
                    }
                    if let Some(n) = n {
                        noise.push(n.clone());
                    }
                }
            }
        }
        let stack = |rows: &[Waveform]| -> Result<Option<SignalBatch>> {
            if rows.len() == indices.len() {
                SignalBatch::from_waveforms(&rows.iter().collect::<Vec<_>>()).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Some(Batch {
            mixture: stack(&mixtures)?.expect("one mixture per row"),
            speech: stack(&speech)?,
            noise: stack(&noise)?,
            indices,
        }))
    }
}
