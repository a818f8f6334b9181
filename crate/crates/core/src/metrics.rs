//! SI-SDR / SNR metrics, the negative SI-SDR training loss with its analytic
//! gradient, and the student/teacher error decomposition.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::signal::{dot, energy};

/// Added to the residual norm so a perfect estimate reports a large finite
/// value instead of infinity.
pub const SISDR_EPS: f64 = 1e-8;

const DB: f64 = 20.0;

fn check(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch(est.len(), reference.len()));
    }
    let ref_energy = energy(reference);
    if ref_energy <= 0.0 {
        return Err(Error::ZeroEnergyReference);
    }
    Ok(ref_energy)
}

fn ratio_db(alpha: f64, est: &[f64], reference: &[f64], ref_energy: f64) -> f64 {
    let target = alpha.abs() * ref_energy.sqrt();
    let residual = reference
        .iter()
        .zip(est)
        .map(|(y, e)| {
            let d = alpha * y - e;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    DB * (target / (residual + SISDR_EPS)).log10()
}

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    let ref_energy = check(est, reference)?;
    let alpha = dot(est, reference) / ref_energy;
    Ok(ratio_db(alpha, est, reference, ref_energy))
}

/// Signal-to-noise ratio in dB (SI-SDR with the scale pinned to one).
pub fn snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    let ref_energy = check(est, reference)?;
    Ok(ratio_db(1.0, est, reference, ref_energy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    /// Batch mean of `per_item`.
    pub value: f64,
    pub per_item: Vec<f64>,
}

/// Negative SI-SDR averaged over the rows of a batch.
pub fn neg_sisdr_loss(est: ArrayView2<f64>, reference: ArrayView2<f64>) -> Result<LossValue> {
    if est.dim() != reference.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate {:?} vs reference {:?}",
            est.dim(),
            reference.dim()
        )));
    }
    let per_item = est
        .outer_iter()
        .zip(reference.outer_iter())
        .map(|(e, r)| si_sdr(&e.to_vec(), &r.to_vec()).map(|v| -v))
        .collect::<Result<Vec<_>>>()?;
    let value = per_item.iter().sum::<f64>() / per_item.len() as f64;
    Ok(LossValue { value, per_item })
}

/// `-SI-SDR(est, reference)` together with its gradient with respect to `est`.
pub fn neg_sisdr_with_grad(est: &[f64], reference: &[f64]) -> Result<(f64, Vec<f64>)> {
    let ref_energy = check(est, reference)?;
    let alpha = dot(est, reference) / ref_energy;
    if alpha == 0.0 {
        return Err(Error::InvalidSignal(
            "estimate is orthogonal to the reference; SI-SDR gradient undefined".into(),
        ));
    }
    let residual: Vec<f64> = reference.iter().zip(est).map(|(y, e)| alpha * y - e).collect();
    let r = energy(&residual).sqrt();
    let loss = -DB * (alpha.abs() * ref_energy.sqrt() / (r + SISDR_EPS)).log10();
    // d/dest of ln|alpha| is y / (alpha ||y||^2); of ln(r + eps) is -e / (r (r + eps)).
    // The residual is orthogonal to y, so the alpha-dependence of r drops out.
    let c = DB / std::f64::consts::LN_10;
    let a = 1.0 / (alpha * ref_energy);
    let b = if r > 0.0 { 1.0 / (r * (r + SISDR_EPS)) } else { 0.0 };
    let grad = reference
        .iter()
        .zip(&residual)
        .map(|(y, e)| -c * (a * y + b * e))
        .collect();
    Ok((loss, grad))
}

/// Analytic gradient of `-SI-SDR(est, reference)` with respect to `est`.
pub fn neg_sisdr_grad(est: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    neg_sisdr_with_grad(est, reference).map(|(_, g)| g)
}

/// Terms of `||s_hat - s_tilde||^2 = ||R_S||^2 + ||R_T||^2 - 2 <R_S, R_T>`
/// with `R_S = s_hat - s` (student error) and `R_T = s_tilde - s` (teacher error).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    pub total: f64,
    pub student_err_sq: f64,
    pub teacher_err_sq: f64,
    pub correlation: f64,
}

impl ErrorDecomposition {
    /// `|total - (student + teacher - 2 correlation)|`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        (self.total - (self.student_err_sq + self.teacher_err_sq - 2.0 * self.correlation)).abs()
    }
}

pub(crate) fn unit(x: &[f64]) -> Vec<f64> {
    let n = energy(x).sqrt();
    if n > 0.0 {
        x.iter().map(|v| v / n).collect()
    } else {
        x.to_vec()
    }
}

/// Decomposes the student-vs-teacher distance into the two error energies and
/// their correlation. With `unit_norm`, every signal is scaled to unit norm
/// first (zero signals are left untouched).
pub fn error_decomposition(
    student: &[f64],
    teacher: &[f64],
    clean: &[f64],
    unit_norm: bool,
) -> Result<ErrorDecomposition> {
    if student.len() != clean.len() {
        return Err(Error::LengthMismatch(student.len(), clean.len()));
    }
    if teacher.len() != clean.len() {
        return Err(Error::LengthMismatch(teacher.len(), clean.len()));
    }
    let (student, teacher, clean) = if unit_norm {
        (unit(student), unit(teacher), unit(clean))
    } else {
        (student.to_vec(), teacher.to_vec(), clean.to_vec())
    };
    let rs: Vec<f64> = student.iter().zip(&clean).map(|(a, b)| a - b).collect();
    let rt: Vec<f64> = teacher.iter().zip(&clean).map(|(a, b)| a - b).collect();
    let diff: Vec<f64> = student.iter().zip(&teacher).map(|(a, b)| a - b).collect();
    Ok(ErrorDecomposition {
        total: energy(&diff),
        student_err_sq: energy(&rs),
        teacher_err_sq: energy(&rt),
        correlation: dot(&rs, &rt),
    })
}
