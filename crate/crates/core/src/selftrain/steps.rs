//! Single optimization steps of the three regimes.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::Separator;
use crate::error::{Error, Result};
use crate::metrics::{neg_sisdr_with_grad, si_sdr};
use crate::model::{backward, forward, MaskNetParams};
use crate::optim::{adam_step, AdamState};
use crate::scalar::Scalar;
use crate::signal::SignalBatch;

/// Batch loss split into its speech-side and noise-side terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepLoss {
    pub total: f64,
    pub speech: f64,
    pub noise: f64,
}

fn term(est: ndarray::ArrayView1<f64>, target: ndarray::ArrayView1<f64>) -> Result<(f64, Vec<f64>)> {
    let est = est.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| est.to_vec());
    let target = target
        .as_slice()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| target.to_vec());
    neg_sisdr_with_grad(&est, &target)
}

fn check_rows(est: &Array3<f64>, targets: &[ArrayView2<f64>]) -> Result<()> {
    let (_, b, t) = est.dim();
    for tgt in targets {
        if tgt.dim() != (b, t) {
            return Err(Error::ShapeMismatch(format!(
                "targets {:?} vs estimates {b}x{t}",
                tgt.dim()
            )));
        }
    }
    Ok(())
}

/// `sum_b L(est[0,b], speech_b) + L(est[1,b], noise_b)` with its gradient.
pub fn supervised_loss(
    est: &Array3<f64>,
    speech: ArrayView2<f64>,
    noise: ArrayView2<f64>,
) -> Result<(StepLoss, Array3<f64>)> {
    if est.dim().0 != 2 {
        return Err(Error::ShapeMismatch(format!(
            "expected 2 output slots, got {}",
            est.dim().0
        )));
    }
    check_rows(est, &[speech, noise])?;
    let mut grad = Array3::zeros(est.dim());
    let mut loss = StepLoss::default();
    for b in 0..est.dim().1 {
        let (ls, gs) = term(est.slice(s![0, b, ..]), speech.row(b))?;
        let (ln, gn) = term(est.slice(s![1, b, ..]), noise.row(b))?;
        grad.slice_mut(s![0, b, ..]).assign(&ndarray::Array1::from(gs));
        grad.slice_mut(s![1, b, ..]).assign(&ndarray::Array1::from(gn));
        loss.speech += ls;
        loss.noise += ln;
    }
    loss.total = loss.speech + loss.noise;
    Ok((loss, grad))
}

fn finish_step<T: Scalar>(
    params: &mut MaskNetParams<T>,
    opt: &mut AdamState<T>,
    lr: f64,
    loss: StepLoss,
    tape: &crate::model::ForwardTape<T>,
    grad: &Array3<f64>,
) -> Result<StepLoss> {
    if !loss.total.is_finite() {
        return Err(Error::Diverged);
    }
    let grads = backward(params, tape, grad)?;
    adam_step(params, &grads, opt, lr)?;
    Ok(loss)
}

fn require_sources<T>(params: &MaskNetParams<T>, m: usize, what: &str) -> Result<()> {
    if params.arch.num_sources != m {
        return Err(Error::InvalidConfig(format!(
            "{what} needs a model with M={m}, got M={}",
            params.arch.num_sources
        )));
    }
    Ok(())
}

/// One Adam step on the paired loss for mixtures `m` with targets `speech`
/// and `noise`. Returns the loss before the update.
pub fn supervised_step<T: Scalar>(
    params: &mut MaskNetParams<T>,
    opt: &mut AdamState<T>,
    lr: f64,
    mixture: &SignalBatch,
    speech: &SignalBatch,
    noise: &SignalBatch,
) -> Result<StepLoss> {
    require_sources(params, 2, "supervised training")?;
    let (est, tape) = forward(params, mixture)?;
    let (loss, grad) = supervised_loss(&est, speech.data().view(), noise.data().view())?;
    finish_step(params, opt, lr, loss, &tape, &grad)
}

/// Per-item values of the MixIT loss under both assignments of the two
/// noise slots, and the index of the smaller one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixitChoice {
    /// `[slots (1, 2), slots (2, 1)]`.
    pub per_assignment: [f64; 2],
    pub chosen: usize,
}

/// MixIT loss on `3 x B x T` estimates of mixtures-of-mixtures `m + n2`.
pub fn mixit_loss(
    est: &Array3<f64>,
    mixtures: ArrayView2<f64>,
    noises: ArrayView2<f64>,
) -> Result<(StepLoss, Array3<f64>, Vec<MixitChoice>)> {
    if est.dim().0 != 3 {
        return Err(Error::MixitRequiresThreeSources(est.dim().0));
    }
    check_rows(est, &[mixtures, noises])?;
    let mut grad = Array3::zeros(est.dim());
    let mut loss = StepLoss::default();
    let mut choices = Vec::with_capacity(est.dim().1);
    for b in 0..est.dim().1 {
        let speech = est.slice(s![0, b, ..]);
        let merged = |slot: usize| &speech + &est.slice(s![slot, b, ..]);
        let value = |with_speech: usize, alone: usize| -> Result<f64> {
            let lm = -si_sdr(&merged(with_speech).to_vec(), &mixtures.row(b).to_vec())?;
            let ln = -si_sdr(&est.slice(s![alone, b, ..]).to_vec(), &noises.row(b).to_vec())?;
            Ok(lm + ln)
        };
        let per_assignment = [value(1, 2)?, value(2, 1)?];
        let chosen = usize::from(per_assignment[1] < per_assignment[0]);
        let (with_speech, alone) = if chosen == 0 { (1, 2) } else { (2, 1) };
        let (lm, gm) = term(merged(with_speech).view(), mixtures.row(b))?;
        let (ln, gn) = term(est.slice(s![alone, b, ..]), noises.row(b))?;
        let gm = ndarray::Array1::from(gm);
        grad.slice_mut(s![0, b, ..]).assign(&gm);
        grad.slice_mut(s![with_speech, b, ..]).assign(&gm);
        grad.slice_mut(s![alone, b, ..]).assign(&ndarray::Array1::from(gn));
        loss.speech += lm;
        loss.noise += ln;
        choices.push(MixitChoice { per_assignment, chosen });
    }
    loss.total = loss.speech + loss.noise;
    Ok((loss, grad, choices))
}

/// One MixIT step: the model separates `m + n2` into three slots.
pub fn mixit_step<T: Scalar>(
    params: &mut MaskNetParams<T>,
    opt: &mut AdamState<T>,
    lr: f64,
    mixtures: &SignalBatch,
    noises: &SignalBatch,
) -> Result<StepLoss> {
    if params.arch.num_sources != 3 {
        return Err(Error::MixitRequiresThreeSources(params.arch.num_sources));
    }
    if mixtures.data().dim() != noises.data().dim() {
        return Err(Error::ShapeMismatch("mixture and noise batches differ".into()));
    }
    let mom = SignalBatch::new(mixtures.data() + noises.data(), mixtures.sample_rate_hz())?;
    let (est, tape) = forward(params, &mom)?;
    let (loss, grad, _) = mixit_loss(&est, mixtures.data().view(), noises.data().view())?;
    finish_step(params, opt, lr, loss, &tape, &grad)
}

/// Row permutation of a batch: row `b` of the result is row `perm[b]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BatchPermutation(Vec<usize>);

impl BatchPermutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidConfig(format!("{perm:?} is not a permutation")));
            }
        }
        Ok(Self(perm))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.select(Axis(0), &self.0)
    }
}

/// Uniform draw over all `B!` permutations, identity included.
pub fn sample_permutation(batch_size: usize, rng: &mut impl Rng) -> BatchPermutation {
    let mut perm: Vec<usize> = (0..batch_size).collect();
    perm.shuffle(rng);
    BatchPermutation(perm)
}

/// Speech estimates and a single noise estimate per row; with three slots the
/// two noise slots are summed.
pub fn consolidate(estimates: &Array3<f64>) -> (Array2<f64>, Array2<f64>) {
    let speech = estimates.index_axis(Axis(0), 0).to_owned();
    let noise = estimates.slice(s![1.., .., ..]).sum_axis(Axis(0));
    (speech, noise)
}

/// Bootstrapped mixtures `s~ + P n~` with their pseudo-targets.
#[derive(Debug, Clone)]
pub struct RemixedBatch {
    pub mixture: SignalBatch,
    pub speech: SignalBatch,
    pub noise: SignalBatch,
}

pub fn bootstrap_remix(
    speech: &Array2<f64>,
    noise: &Array2<f64>,
    perm: &BatchPermutation,
    sample_rate_hz: u32,
) -> Result<RemixedBatch> {
    if speech.dim() != noise.dim() || perm.len() != speech.nrows() {
        return Err(Error::ShapeMismatch("remix inputs disagree in shape".into()));
    }
    let permuted = perm.apply_rows(noise.view());
    Ok(RemixedBatch {
        mixture: SignalBatch::new(speech + &permuted, sample_rate_hz)?,
        speech: SignalBatch::new(speech.clone(), sample_rate_hz)?,
        noise: SignalBatch::new(permuted, sample_rate_hz)?,
    })
}

/// Teacher estimates for a batch, refusing non-finite output.
pub fn teacher_estimates<S: Separator + ?Sized>(teacher: &S, mixtures: &SignalBatch) -> Result<Array3<f64>> {
    let est = match teacher.separate(mixtures) {
        Err(Error::NonFinite(_)) => return Err(Error::TeacherDivergence),
        other => other?,
    };
    if est.iter().any(|v| !v.is_finite()) {
        return Err(Error::TeacherDivergence);
    }
    Ok(est)
}

/// One RemixIT step: teacher inference, bootstrapped remix, student update.
pub fn remixit_step<S: Separator + ?Sized, T: Scalar>(
    teacher: &S,
    student: &mut MaskNetParams<T>,
    opt: &mut AdamState<T>,
    lr: f64,
    mixtures: &SignalBatch,
    rng: &mut impl Rng,
) -> Result<StepLoss> {
    require_sources(student, 2, "the RemixIT student")?;
    let est = teacher_estimates(teacher, mixtures)?;
    let (speech, noise) = consolidate(&est);
    let perm = sample_permutation(mixtures.batch_size(), rng);
    let remix = bootstrap_remix(&speech, &noise, &perm, mixtures.sample_rate_hz())?;
    supervised_step(student, opt, lr, &remix.mixture, &remix.speech, &remix.noise)
}

/// Runs [`remixit_step`] over the sampler's current epoch.
pub fn remixit_epoch<S: Separator + ?Sized, T: Scalar>(
    teacher: &S,
    student: &mut MaskNetParams<T>,
    opt: &mut AdamState<T>,
    sampler: &mut crate::data::BatchSampler,
    lr: f64,
    rng: &mut impl Rng,
) -> Result<Vec<StepLoss>> {
    let mut losses = Vec::with_capacity(sampler.batches_per_epoch());
    while let Some(batch) = sampler.next_batch()? {
        losses.push(remixit_step(teacher, student, opt, lr, &batch.mixture, rng)?);
    }
    Ok(losses)
}
