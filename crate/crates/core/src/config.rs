//! JSON run configuration shared by the command-line tool and the presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    generate_corpus, load_manifest, load_wav_dir, split_for_regime, Corpus, CorpusKind, RegimeSplit, SnrMode,
    SplitConfig, SplitRegime, SynthSpec, WavRole,
};
use crate::error::{Error, Result};
use crate::model::ModelArch;
use crate::optim::LrSchedule;
use crate::seed::derive_seed;
use crate::selftrain::{Regime, TeacherProtocol, TrainConfig};

/// Where a corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generated on the fly; `seed` defaults to one derived from the run seed.
    Synth {
        spec: SynthSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// A directory or manifest written by `gen-data`.
    Manifest { path: PathBuf },
    /// A flat directory of mono WAV files.
    WavDir { path: PathBuf, role: WavRole },
}

impl DataSource {
    pub fn load(&self, default_seed: u64) -> Result<Corpus> {
        match self {
            DataSource::Synth { spec, seed } => generate_corpus(spec, seed.unwrap_or(default_seed)),
            DataSource::Manifest { path } => load_manifest(path),
            DataSource::WavDir { path, role } => load_wav_dir(path, *role),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Training corpus.
    pub source: DataSource,
    /// Separate noise-only corpus for MixIT; without it a paired source is
    /// split into mixtures and noise.
    #[serde(default)]
    pub noise: Option<DataSource>,
    /// Paired evaluation corpus.
    #[serde(default)]
    pub test: Option<DataSource>,
    /// Share of a paired source held out for evaluation when `test` is absent.
    #[serde(default)]
    pub test_fraction: f64,
}

/// Optimization settings; architecture, protocol and seed live in their own
/// sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub regime: Regime,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub lr: LrSchedule,
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default)]
    pub resample_snr: Option<SnrMode>,
}

fn default_batch() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Teacher checkpoint for `remixit` and `adapt`.
    #[serde(default)]
    pub teacher: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: default_out(),
            teacher: None,
        }
    }
}

/// Teacher training run executed before self-training when no teacher
/// checkpoint is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelArch,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelArch,
    pub train: TrainSection,
    #[serde(default)]
    pub protocol: Option<TeacherProtocol>,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub pretrain: Option<PretrainConfig>,
}

/// Seed streams derived from the run seed.
const TRAIN_DATA_STREAM: u64 = 0xDA7A;
const TEST_DATA_STREAM: u64 = 0x7E57;
const NOISE_DATA_STREAM: u64 = 0x0153;
const SPLIT_STREAM: u64 = 0x5917;

impl RunConfig {
    /// Parses and validates; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidConfig(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train_config().validate()?;
        if let Some(p) = &self.pretrain {
            p.data.validate()?;
            if !matches!(p.train.regime, Regime::Supervised | Regime::Mixit) {
                return Err(Error::InvalidConfig(
                    "pretrain.train.regime must be supervised or mixit".into(),
                ));
            }
            p.train_config(self.seed).validate()?;
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            protocol: self.protocol,
            ..self.train.to_config(self.model, self.seed)
        }
    }

    /// Training roles and the optional test corpus for the configured regime.
    pub fn load_data(&self) -> Result<(RegimeSplit, Option<Corpus>)> {
        self.data.load(self.train.regime, self.seed)
    }

    pub fn teacher_dir(&self) -> PathBuf {
        self.paths.out_dir.join("teacher")
    }
}

impl PretrainConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        self.train.to_config(self.model, seed)
    }
}

impl TrainSection {
    fn to_config(&self, arch: ModelArch, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            seed,
            lr: self.lr,
            arch,
            eval_every: self.eval_every,
            resample_snr: self.resample_snr,
            ..TrainConfig::new(self.regime, self.epochs)
        }
    }
}

impl DataConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must lie in [0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.test.is_some() && self.test_fraction > 0.0 {
            return Err(Error::InvalidConfig(
                "give either data.test or data.test_fraction, not both".into(),
            ));
        }
        for src in [Some(&self.source), self.noise.as_ref(), self.test.as_ref()]
            .into_iter()
            .flatten()
        {
            if let DataSource::Synth { spec, .. } = src {
                spec.validate()?;
            }
        }
        Ok(())
    }

    pub fn load_source(&self, seed: u64) -> Result<Corpus> {
        self.source.load(derive_seed(seed, TRAIN_DATA_STREAM))
    }

    pub fn load_test(&self, seed: u64) -> Result<Option<Corpus>> {
        self.test
            .as_ref()
            .map(|t| t.load(derive_seed(seed, TEST_DATA_STREAM)))
            .transpose()
    }

    /// Assigns corpus roles for `regime`.
    pub fn load(&self, regime: Regime, seed: u64) -> Result<(RegimeSplit, Option<Corpus>)> {
        let corpus = self.load_source(seed)?;
        let mut test = self.load_test(seed)?;
        let split_cfg = |regime| SplitConfig {
            regime,
            test_fraction: self.test_fraction,
            seed: derive_seed(seed, SPLIT_STREAM),
        };
        let mut split = match regime {
            Regime::Supervised => split_for_regime(&corpus, &split_cfg(SplitRegime::Supervised))?,
            Regime::Mixit => match &self.noise {
                Some(noise) => {
                    let noise = noise.load(derive_seed(seed, NOISE_DATA_STREAM))?;
                    RegimeSplit {
                        mixtures: Some(corpus.to_mixture_only()),
                        noise: Some(noise.to_noise_only()?),
                        ..Default::default()
                    }
                }
                None => split_for_regime(&corpus, &split_cfg(SplitRegime::Mixit))?,
            },
            Regime::Remixit | Regime::Adapt => {
                if corpus.kind() == CorpusKind::Paired && self.test_fraction > 0.0 {
                    split_for_regime(&corpus, &split_cfg(SplitRegime::RemixitStudent))?
                } else if corpus.kind() == CorpusKind::NoiseOnly {
                    return Err(Error::MissingRole("mixture".into()));
                } else {
                    RegimeSplit {
                        mixtures: Some(corpus.to_mixture_only()),
                        ..Default::default()
                    }
                }
            }
        };
        if let Some(t) = split.test.take() {
            test = Some(t);
        }
        if let Some(t) = &test {
            t.require_paired()?;
        }
        Ok((split, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"source": {"synth": {"spec": {"n_items": 8, "domain": "a"}}}},
        "train": {"regime": "supervised", "epochs": 1}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.model, ModelArch::default());
        assert_eq!(cfg.train.batch_size, 2);
        assert_eq!(cfg.paths, PathsConfig::default());
        assert!(cfg.pretrain.is_none());
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let text = MINIMAL.replace(r#""domain": "a""#, r#""domain": "a", "bogus": 1"#);
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("data.source.synth.spec"), "{err}");
        assert!(err.contains("bogus"), "{err}");

        let text = MINIMAL.replace(r#""epochs": 1"#, r#""epochs": "one""#);
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("train.epochs"), "{err}");
    }

    #[test]
    fn semantic_validation() {
        let text = MINIMAL.replace(r#""n_items": 8"#, r#""n_items": 8, "sample_rate_hz": 100"#);
        assert!(matches!(RunConfig::from_json(&text), Err(Error::InvalidConfig(_))));
        let text = MINIMAL.replace(r#""epochs": 1"#, r#""epochs": 1, "batch_size": 0"#);
        assert!(matches!(RunConfig::from_json(&text), Err(Error::InvalidConfig(_))));
        let text = MINIMAL
            .replace(r#""regime": "supervised""#, r#""regime": "adapt""#)
            .replace(r#""train""#, r#""protocol": {"kind": "static"}, "train""#);
        assert!(matches!(RunConfig::from_json(&text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn roles_follow_regime() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let (split, test) = cfg.data.load(Regime::Supervised, 0).unwrap();
        assert_eq!(split.paired.unwrap().len(), 8);
        assert!(test.is_none());

        let (split, _) = cfg.data.load(Regime::Remixit, 0).unwrap();
        assert_eq!(split.mixtures.unwrap().kind(), CorpusKind::MixtureOnly);

        let (split, _) = cfg.data.load(Regime::Mixit, 0).unwrap();
        assert_eq!(split.mixtures.unwrap().len() + split.noise.unwrap().len(), 8);

        let held_out = DataConfig {
            test_fraction: 0.25,
            ..cfg.data.clone()
        };
        let (split, test) = held_out.load(Regime::Remixit, 0).unwrap();
        assert_eq!(split.mixtures.unwrap().len(), 6);
        assert_eq!(test.unwrap().len(), 2);
    }

    #[test]
    fn data_loading_is_seeded() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let a = cfg.data.load_source(1).unwrap();
        let b = cfg.data.load_source(1).unwrap();
        let c = cfg.data.load_source(2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
