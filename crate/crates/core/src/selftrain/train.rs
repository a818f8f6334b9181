//! Epoch loops, evaluation and the training log.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    mixit_step, remixit_epoch, supervised_step, update_teacher, Separator, StepLoss, TeacherProtocol, TeacherUpdate,
};
use crate::data::{BatchSampler, Corpus, MixMode, RegimeSplit, SnrMode};
use crate::error::{Error, Result};
use crate::metrics::{si_sdr, snr};
use crate::model::{init_params, save_checkpoint, MaskNetParams, ModelArch};
use crate::optim::{lr_at, AdamState, LrSchedule};
use crate::seed::{derive_seed, rng_for};
use crate::signal::SignalBatch;

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "final.rmxt";
pub const TEACHER_CHECKPOINT: &str = "teacher_final.rmxt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supervised,
    Mixit,
    Remixit,
    /// RemixIT whose student starts from the teacher's weights.
    Adapt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: LrSchedule,
    /// `None` picks the regime's default: static for RemixIT, EMA for
    /// adaptation. Ignored by supervised and MixIT training.
    pub protocol: Option<TeacherProtocol>,
    /// Architecture of the trained model (of the first student for RemixIT).
    pub arch: ModelArch,
    /// Evaluate on the test set after every `eval_every` epochs; 0 disables.
    pub eval_every: usize,
    /// Supervised only: remix speech and noise at fresh SNRs every epoch.
    pub resample_snr: Option<SnrMode>,
}

impl TrainConfig {
    pub fn new(regime: Regime, epochs: usize) -> Self {
        Self {
            regime,
            epochs,
            batch_size: 2,
            seed: 0,
            lr: LrSchedule::default(),
            protocol: None,
            arch: ModelArch::default(),
            eval_every: 0,
            resample_snr: None,
        }
    }

    pub fn effective_protocol(&self) -> Result<TeacherProtocol> {
        let protocol = match (self.regime, self.protocol) {
            (Regime::Adapt, None) => TeacherProtocol::ema(0.01),
            (Regime::Adapt, Some(p @ TeacherProtocol::Ema { .. })) => p,
            (Regime::Adapt, Some(p)) => {
                return Err(Error::InvalidConfig(format!(
                    "adaptation uses the EMA protocol, got {p:?}"
                )))
            }
            (_, p) => p.unwrap_or(TeacherProtocol::Static),
        };
        protocol.validate()?;
        Ok(protocol)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        self.lr.validate()?;
        self.arch.validate()?;
        if let Some(snr) = self.resample_snr {
            snr.validate()?;
        }
        self.effective_protocol().map(|_| ())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss_total: f64,
    pub loss_speech: f64,
    pub loss_noise: f64,
    pub teacher_gen: usize,
    pub eval_si_sdr: Option<f64>,
    pub eval_delta_si_sdr: Option<f64>,
}

pub fn write_train_log(records: &[TrainRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record([
            "epoch",
            "step",
            "lr",
            "loss_total",
            "loss_speech",
            "loss_noise",
            "teacher_gen",
            "eval_si_sdr",
            "eval_delta_si_sdr",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_si_sdr_db: f64,
    /// Mean of `SI-SDR(estimate, s) - SI-SDR(mixture, s)`.
    pub mean_delta_si_sdr_db: f64,
    pub mean_snr_db: f64,
    pub n_items: usize,
}

/// Scores the speech slot of `separator` on every item of a paired corpus.
pub fn evaluate<S: Separator + ?Sized>(separator: &S, corpus: &Corpus) -> Result<EvalMetrics> {
    corpus.require_paired()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores = corpus
        .items()
        .par_iter()
        .map(|item| {
            let speech = item.speech.as_ref().expect("paired").samples();
            let batch = SignalBatch::from_waveforms(&[&item.mixture])?;
            let est = separator.separate(&batch)?;
            let est = est.slice(ndarray::s![0, 0, ..]).to_vec();
            let out = si_sdr(&est, speech)?;
            let input = si_sdr(item.mixture.samples(), speech)?;
            Ok((out, out - input, snr(&est, speech)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scores.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Ok(EvalMetrics {
        mean_si_sdr_db: mean(|s| s.0),
        mean_delta_si_sdr_db: mean(|s| s.1),
        mean_snr_db: mean(|s| s.2),
        n_items: scores.len(),
    })
}

/// Trained model, the final teacher for self-training regimes, the log and
/// the checkpoints written.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MaskNetParams<f32>,
    pub teacher: Option<MaskNetParams<f32>>,
    pub records: Vec<TrainRecord>,
    pub checkpoints: Vec<PathBuf>,
}

struct Recorder<'a> {
    cfg: &'a TrainConfig,
    test: Option<&'a Corpus>,
    out_dir: Option<&'a Path>,
    records: Vec<TrainRecord>,
    checkpoints: Vec<PathBuf>,
    step: usize,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a TrainConfig, test: Option<&'a Corpus>, out_dir: Option<&'a Path>) -> Result<Self> {
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            cfg,
            test,
            out_dir,
            records: Vec::new(),
            checkpoints: Vec::new(),
            step: 0,
        })
    }

    fn push(&mut self, epoch: usize, lr: f64, loss: StepLoss, teacher_gen: usize) {
        self.records.push(TrainRecord {
            epoch,
            step: self.step,
            lr,
            loss_total: loss.total,
            loss_speech: loss.speech,
            loss_noise: loss.noise,
            teacher_gen,
            eval_si_sdr: None,
            eval_delta_si_sdr: None,
        });
        self.step += 1;
    }

    fn end_epoch<S: Separator + ?Sized>(&mut self, epoch: usize, model: &S) -> Result<()> {
        let due = self.cfg.eval_every > 0 && (epoch + 1).is_multiple_of(self.cfg.eval_every);
        if let (true, Some(test)) = (due, self.test) {
            let m = evaluate(model, test)?;
            if let Some(last) = self.records.last_mut() {
                last.eval_si_sdr = Some(m.mean_si_sdr_db);
                last.eval_delta_si_sdr = Some(m.mean_delta_si_sdr_db);
            }
        }
        Ok(())
    }

    fn checkpoint(&mut self, params: &MaskNetParams<f32>, name: &str) -> Result<()> {
        if let Some(dir) = self.out_dir {
            let path = dir.join(name);
            save_checkpoint(params, &path)?;
            self.checkpoints.push(path);
        }
        Ok(())
    }

    fn finish(self, model: MaskNetParams<f32>, teacher: Option<MaskNetParams<f32>>) -> Result<TrainOutcome> {
        if let Some(dir) = self.out_dir {
            write_train_log(&self.records, dir.join(LOG_FILE))?;
        }
        Ok(TrainOutcome {
            model,
            teacher,
            records: self.records,
            checkpoints: self.checkpoints,
        })
    }
}

fn next_cycling(sampler: &mut BatchSampler, epoch: &mut usize) -> Result<crate::data::Batch> {
    if let Some(b) = sampler.next_batch()? {
        return Ok(b);
    }
    *epoch += 1;
    sampler.set_epoch(*epoch);
    sampler.next_batch()?.ok_or(Error::EmptyCorpus)
}

/// Supervised or MixIT training of a teacher from out-of-domain data.
pub fn pretrain_teacher(
    cfg: &TrainConfig,
    data: &RegimeSplit,
    test: Option<&Corpus>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mix = cfg.resample_snr.map_or(MixMode::Stored, MixMode::Resample);
    let (mut main, mut noise) = match cfg.regime {
        Regime::Supervised => {
            if cfg.arch.num_sources != 2 {
                return Err(Error::InvalidConfig("supervised training needs M=2".into()));
            }
            let paired = data
                .paired
                .as_ref()
                .ok_or_else(|| Error::MissingRole("paired speech and noise".into()))?;
            (
                BatchSampler::new(paired, cfg.batch_size, derive_seed(cfg.seed, 2))?.with_mix(mix)?,
                None,
            )
        }
        Regime::Mixit => {
            if cfg.arch.num_sources != 3 {
                return Err(Error::MixitRequiresThreeSources(cfg.arch.num_sources));
            }
            let mixtures = data
                .mixtures
                .as_ref()
                .ok_or_else(|| Error::MissingRole("mixtures".into()))?;
            let noises = data
                .noise
                .as_ref()
                .ok_or_else(|| Error::MissingRole("noise_only".into()))?;
            (
                BatchSampler::new(mixtures, cfg.batch_size, derive_seed(cfg.seed, 2))?,
                Some(BatchSampler::new(noises, cfg.batch_size, derive_seed(cfg.seed, 4))?),
            )
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "pretraining runs supervised or mixit, not {other:?}"
            )))
        }
    };

    let mut rec = Recorder::new(cfg, test, out_dir)?;
    let mut params = init_params::<f32>(&cfg.arch, derive_seed(cfg.seed, 1))?;
    let mut opt = AdamState::new(&params);
    let mut noise_epoch = 0;
    for epoch in 0..cfg.epochs {
        let lr = lr_at(&cfg.lr, epoch);
        main.set_epoch(epoch);
        while let Some(batch) = main.next_batch()? {
            let loss = match noise.as_mut() {
                None => {
                    let (s, n) = (batch.speech.as_ref(), batch.noise.as_ref());
                    let (s, n) = s.zip(n).ok_or(Error::UnpairedCorpus)?;
                    supervised_step(&mut params, &mut opt, lr, &batch.mixture, s, n)?
                }
                Some(noise) => {
                    let n2 = next_cycling(noise, &mut noise_epoch)?;
                    mixit_step(&mut params, &mut opt, lr, &batch.mixture, &n2.mixture)?
                }
            };
            rec.push(epoch, lr, loss, 0);
        }
        rec.end_epoch(epoch, &params)?;
    }
    rec.checkpoint(&params, FINAL_CHECKPOINT)?;
    rec.finish(params, None)
}

/// RemixIT on in-domain mixtures, refreshing the teacher per the configured
/// protocol. With [`Regime::Adapt`] the student starts as a copy of the
/// teacher.
pub fn run_remixit(
    cfg: &TrainConfig,
    teacher: &MaskNetParams<f32>,
    mixtures: &Corpus,
    test: Option<&Corpus>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let protocol = cfg.effective_protocol()?;
    let mut student = match cfg.regime {
        Regime::Remixit => init_params::<f32>(&cfg.arch, derive_seed(cfg.seed, 1))?,
        Regime::Adapt => teacher.clone(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "self-training runs remixit or adapt, not {other:?}"
            )))
        }
    };
    if student.arch.num_sources != 2 {
        return Err(Error::InvalidConfig("the RemixIT student needs M=2".into()));
    }
    let mut teacher = teacher.clone();
    let mut sampler = BatchSampler::new(mixtures, cfg.batch_size, derive_seed(cfg.seed, 2))?;
    let mut rng = rng_for(cfg.seed, 3);
    let mut opt = AdamState::new(&student);
    let mut rec = Recorder::new(cfg, test, out_dir)?;
    let mut generation = 0;
    let mut generation_start = 0;

    for epoch in 0..cfg.epochs {
        let lr = lr_at(&cfg.lr, epoch - generation_start);
        sampler.set_epoch(epoch);
        for loss in remixit_epoch(&teacher, &mut student, &mut opt, &mut sampler, lr, &mut rng)? {
            rec.push(epoch, lr, loss, generation);
        }
        rec.end_epoch(epoch, &student)?;

        let last = epoch + 1 == cfg.epochs;
        if last && matches!(protocol, TeacherProtocol::Sequential { .. }) {
            // A swap now would hand back an untrained student.
            continue;
        }
        let seed = derive_seed(cfg.seed, 1000 + generation as u64 + 1);
        match update_teacher(&protocol, &mut teacher, &mut student, epoch + 1, seed)? {
            TeacherUpdate::Unchanged => {}
            TeacherUpdate::Averaged => generation += 1,
            TeacherUpdate::Swapped => {
                generation += 1;
                generation_start = epoch + 1;
                opt = AdamState::new(&student);
                rec.checkpoint(&teacher, &format!("teacher_gen{generation}.rmxt"))?;
            }
        }
    }
    rec.checkpoint(&student, FINAL_CHECKPOINT)?;
    rec.checkpoint(&teacher, TEACHER_CHECKPOINT)?;
    rec.finish(student, Some(teacher))
}

/// Adapts `teacher` to the domain of `mixtures` with EMA-protocol RemixIT,
/// the student initialized from the teacher.
pub fn zero_shot_adapt(
    teacher: &MaskNetParams<f32>,
    mixtures: &Corpus,
    cfg: &TrainConfig,
    test: Option<&Corpus>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        regime: Regime::Adapt,
        arch: teacher.arch,
        ..cfg.clone()
    };
    if mixtures.len() < cfg.batch_size {
        return Err(Error::BatchTooLarge {
            batch: cfg.batch_size,
            corpus: mixtures.len(),
        });
    }
    run_remixit(&cfg, teacher, mixtures, test, out_dir)
}
