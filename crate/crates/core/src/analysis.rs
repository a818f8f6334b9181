//! Diagnostics of a trained teacher/student pair: improvement per teacher
//! quality bracket, the empirical-mean-student sweep, and per-item error
//! decompositions.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::metrics::{error_decomposition, si_sdr, snr, unit, ErrorDecomposition};
use crate::seed::rng_for;
use crate::selftrain::{consolidate, sample_permutation, teacher_estimates, Separator};
use crate::signal::{dot, SignalBatch};

/// Bracket edges in dB; an implicit bracket below the first edge and one
/// from the last edge to infinity complete the partition.
pub const DEFAULT_BRACKET_EDGES: [f64; 7] = [-30.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
pub const DEFAULT_SWEEP_SIZES: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
/// Teacher estimates below this SNR form the sweep's probe set.
pub const POOR_TEACHER_DB: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Teacher SI-SDR range `[lo, hi)` in dB.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Student minus teacher SI-SDR; `None` for an empty bracket.
    pub delta: Option<DeltaStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub brackets: Vec<Bracket>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn stats(values: &[f64]) -> Option<DeltaStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(DeltaStats {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile(&sorted, 0.5),
        q25: quantile(&sorted, 0.25),
        q75: quantile(&sorted, 0.75),
    })
}

fn speech_estimate<S: Separator + ?Sized>(model: &S, mixture: &crate::signal::Waveform) -> Result<Vec<f64>> {
    let est = model.separate(&SignalBatch::from_waveforms(&[mixture])?)?;
    Ok(est.slice(ndarray::s![0, 0, ..]).to_vec())
}

/// Groups items by teacher SI-SDR on the original mixtures and summarizes
/// the student's SI-SDR gain in each group.
pub fn bracket_analysis<T: Separator + ?Sized, S: Separator + ?Sized>(
    teacher: &T,
    student: &S,
    corpus: &Corpus,
    edges: &[f64],
) -> Result<BracketReport> {
    corpus.require_paired()?;
    if edges.is_empty() || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "bracket edges must be finite and strictly increasing".into(),
        ));
    }
    let scores = corpus
        .items()
        .par_iter()
        .map(|item| {
            let s = item.speech.as_ref().expect("paired").samples();
            let t = si_sdr(&speech_estimate(teacher, &item.mixture)?, s)?;
            let st = si_sdr(&speech_estimate(student, &item.mixture)?, s)?;
            Ok((t, st - t))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend_from_slice(edges);
    bounds.push(f64::INFINITY);
    let brackets = bounds
        .windows(2)
        .map(|w| {
            let deltas: Vec<f64> = scores
                .iter()
                .filter(|(t, _)| *t >= w[0] && *t < w[1])
                .map(|(_, d)| *d)
                .collect();
            Bracket {
                lo: w[0],
                hi: w[1],
                count: deltas.len(),
                delta: stats(&deltas),
            }
        })
        .collect();
    Ok(BracketReport { brackets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    #[default]
    Snr,
    SiSdr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_sizes")]
    pub b_values: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Keep only items whose teacher estimate scores below this; `None`
    /// probes every item.
    #[serde(default = "default_poor")]
    pub poor_teacher_below_db: Option<f64>,
    #[serde(default)]
    pub metric: SweepMetric,
}

fn default_sizes() -> Vec<usize> {
    DEFAULT_SWEEP_SIZES.to_vec()
}

fn default_poor() -> Option<f64> {
    Some(POOR_TEACHER_DB)
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            b_values: default_sizes(),
            seed: 0,
            poor_teacher_below_db: default_poor(),
            metric: SweepMetric::Snr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Number of bootstrapped mixtures averaged.
    pub b: usize,
    /// Mean over probe items of `metric(mean student, s) - metric(teacher, s)`.
    pub mean_improvement_db: f64,
    /// Mean over probe items of `<mean unit student error, unit teacher error>`.
    pub correlation_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStudentSweep {
    pub points: Vec<SweepPoint>,
    pub n_probe_items: usize,
}

/// Holds each probe item's teacher speech estimate fixed, adds `B` teacher
/// noise estimates of other items, and averages the student's speech outputs
/// over those bootstrapped mixtures. The student is not updated.
pub fn mean_student_sweep<T: Separator + ?Sized, S: Separator + ?Sized>(
    teacher: &T,
    student: &S,
    corpus: &Corpus,
    cfg: &SweepConfig,
) -> Result<MeanStudentSweep> {
    corpus.require_paired()?;
    corpus.uniform_len()?;
    let b_values = &cfg.b_values;
    if b_values.is_empty() || b_values[0] == 0 || b_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "B values must be positive and strictly increasing".into(),
        ));
    }
    let b_max = *b_values.last().expect("non-empty");
    let available = corpus.len() - 1;
    if b_max > available {
        return Err(Error::NotEnoughNoiseEstimates {
            requested: b_max,
            available,
        });
    }
    let rate = corpus.sample_rate_hz().expect("non-empty");
    let metric = |e: &[f64], r: &[f64]| match cfg.metric {
        SweepMetric::Snr => snr(e, r),
        SweepMetric::SiSdr => si_sdr(e, r),
    };

    let mixtures: Vec<&crate::signal::Waveform> = corpus.items().iter().map(|i| &i.mixture).collect();
    let est = teacher_estimates(teacher, &SignalBatch::from_waveforms(&mixtures)?)?;
    let (t_speech, t_noise) = consolidate(&est);
    let clean: Vec<&[f64]> = corpus
        .items()
        .iter()
        .map(|i| i.speech.as_ref().expect("paired").samples())
        .collect();

    let mut probes = Vec::new();
    for (i, s) in clean.iter().enumerate() {
        let score = metric(&t_speech.row(i).to_vec(), s)?;
        if cfg.poor_teacher_below_db.is_none_or(|th| score < th) {
            probes.push((i, score));
        }
    }
    if probes.is_empty() {
        return Err(Error::NoProbeItems(cfg.poor_teacher_below_db.unwrap_or(f64::INFINITY)));
    }

    let per_item = probes
        .par_iter()
        .map(|&(i, teacher_score)| {
            let mut donors: Vec<usize> = (0..corpus.len()).filter(|&j| j != i).collect();
            donors.shuffle(&mut rng_for(cfg.seed, i as u64));
            donors.truncate(b_max);
            let s_tilde = t_speech.row(i);
            let mut remixed = Array2::zeros((b_max, s_tilde.len()));
            for (row, &j) in donors.iter().enumerate() {
                remixed.row_mut(row).assign(&(&s_tilde + &t_noise.row(j)));
            }
            let out = student.separate(&SignalBatch::new(remixed, rate)?)?;
            let student_speech = out.index_axis(Axis(0), 0);

            let s = clean[i];
            let u_s = unit(s);
            let teacher_err: Vec<f64> = unit(&s_tilde.to_vec()).iter().zip(&u_s).map(|(a, b)| a - b).collect();
            let mut sum = vec![0.0; s.len()];
            let mut unit_err_sum = vec![0.0; s.len()];
            let mut points = Vec::with_capacity(b_values.len());
            let mut next = 0;
            for (count, row) in student_speech.outer_iter().enumerate() {
                let row = row.to_vec();
                sum.iter_mut().zip(&row).for_each(|(acc, v)| *acc += v);
                for ((acc, u), c) in unit_err_sum.iter_mut().zip(unit(&row)).zip(&u_s) {
                    *acc += u - c;
                }
                let b = count + 1;
                if b == b_values[next] {
                    let mean: Vec<f64> = sum.iter().map(|v| v / b as f64).collect();
                    let mean_err: Vec<f64> = unit_err_sum.iter().map(|v| v / b as f64).collect();
                    points.push((metric(&mean, s)? - teacher_score, dot(&mean_err, &teacher_err)));
                    next += 1;
                    if next == b_values.len() {
                        break;
                    }
                }
            }
            Ok(points)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = per_item.len() as f64;
    let points = b_values
        .iter()
        .enumerate()
        .map(|(k, &b)| SweepPoint {
            b,
            mean_improvement_db: per_item.iter().map(|p| p[k].0).sum::<f64>() / n,
            correlation_term: per_item.iter().map(|p| p[k].1).sum::<f64>() / n,
        })
        .collect();
    Ok(MeanStudentSweep {
        points,
        n_probe_items: per_item.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRow {
    pub item: usize,
    pub terms: ErrorDecomposition,
}

/// Per-item terms of the student/teacher error decomposition. The student
/// sees the bootstrapped mixture `s~_i + n~_P(i)` built with a seeded
/// permutation over the whole corpus.
pub fn decomposition_trace<T: Separator + ?Sized, S: Separator + ?Sized>(
    teacher: &T,
    student: &S,
    corpus: &Corpus,
    unit_norm: bool,
    seed: u64,
) -> Result<Vec<DecompositionRow>> {
    corpus.require_paired()?;
    corpus.uniform_len()?;
    let rate = corpus.sample_rate_hz().expect("non-empty");
    let mixtures: Vec<&crate::signal::Waveform> = corpus.items().iter().map(|i| &i.mixture).collect();
    let est = teacher_estimates(teacher, &SignalBatch::from_waveforms(&mixtures)?)?;
    let (t_speech, t_noise) = consolidate(&est);
    let perm = sample_permutation(corpus.len(), &mut rng_for(seed, 0xDEC0));
    let remixed = &t_speech + &perm.apply_rows(t_noise.view());
    let student_speech = student
        .separate(&SignalBatch::new(remixed, rate)?)?
        .index_axis(Axis(0), 0)
        .to_owned();
    corpus
        .items()
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let terms = error_decomposition(
                &student_speech.row(i).to_vec(),
                &t_speech.row(i).to_vec(),
                item.speech.as_ref().expect("paired").samples(),
                unit_norm,
            )?;
            Ok(DecompositionRow { item: i, terms })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_bracket_csv(report: &BracketReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "bracket_lo,bracket_hi,count,mean_delta,median_delta,q25,q75")?;
    for b in &report.brackets {
        let d = b.delta;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            b.lo,
            b.hi,
            b.count,
            opt(d.map(|d| d.mean)),
            opt(d.map(|d| d.median)),
            opt(d.map(|d| d.q25)),
            opt(d.map(|d| d.q75)),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(sweep: &MeanStudentSweep, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "B,mean_snr_improvement_db,correlation_term")?;
    for p in &sweep.points {
        writeln!(w, "{},{},{}", p.b, p.mean_improvement_db, p.correlation_term)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_decomposition_csv(rows: &[DecompositionRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "item,total,student_err_sq,teacher_err_sq,correlation")?;
    for r in rows {
        let t = r.terms;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.item, t.total, t.student_err_sq, t.teacher_err_sq, t.correlation
        )?;
    }
    w.flush()?;
    Ok(())
}
