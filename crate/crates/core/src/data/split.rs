use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Smallest corpus that can be split.
pub const MIN_SPLIT_ITEMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRegime {
    /// Every training item keeps speech and noise.
    Supervised,
    /// 80% become mixtures, the other 20% isolated noises.
    Mixit,
    /// Mixtures only.
    RemixitStudent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub regime: SplitRegime,
    /// Share of items held out as a paired test set.
    #[serde(default)]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(regime: SplitRegime, seed: u64) -> Self {
        Self {
            regime,
            test_fraction: 0.0,
            seed,
        }
    }
}

/// Training corpora per role plus the held-out test set.
#[derive(Debug, Clone, Default)]
pub struct RegimeSplit {
    pub paired: Option<Corpus>,
    pub mixtures: Option<Corpus>,
    pub noise: Option<Corpus>,
    pub test: Option<Corpus>,
}

pub fn split_for_regime(corpus: &Corpus, cfg: &SplitConfig) -> Result<RegimeSplit> {
    corpus.require_paired()?;
    if corpus.len() < MIN_SPLIT_ITEMS {
        return Err(Error::CorpusTooSmall {
            have: corpus.len(),
            need: MIN_SPLIT_ITEMS,
        });
    }
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction {} outside [0, 1)",
            cfg.test_fraction
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng_for(cfg.seed, 0x5917));
    let n_test = (cfg.test_fraction * corpus.len() as f64).round() as usize;
    let (test_idx, train_idx) = order.split_at(n_test);
    if train_idx.len() < MIN_SPLIT_ITEMS {
        return Err(Error::CorpusTooSmall {
            have: train_idx.len(),
            need: MIN_SPLIT_ITEMS,
        });
    }
    let mut split = RegimeSplit {
        test: (n_test > 0).then(|| corpus.select(test_idx)),
        ..RegimeSplit::default()
    };
    match cfg.regime {
        SplitRegime::Supervised => split.paired = Some(corpus.select(train_idx)),
        SplitRegime::RemixitStudent => split.mixtures = Some(corpus.select(train_idx).to_mixture_only()),
        SplitRegime::Mixit => {
            let n_mix = train_idx.len() * 4 / 5;
            let (mix, noise) = train_idx.split_at(n_mix);
            split.mixtures = Some(corpus.select(mix).to_mixture_only());
            split.noise = Some(corpus.select(noise).to_noise_only()?);
        }
    }
    Ok(split)
}
