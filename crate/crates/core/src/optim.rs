//! Adam with bias correction, and a step-halving learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat view over a set of parameter (or gradient) tensors.
pub trait ParamTensors<T> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;
}

impl<T> ParamTensors<T> for Vec<Vec<T>> {
    fn tensors(&self) -> Vec<&[T]> {
        self.iter().map(Vec::as_slice).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.iter_mut().map(Vec::as_mut_slice).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(params: &impl ParamTensors<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.first
            .iter()
            .chain(&self.second)
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Fails without touching anything if a gradient is non-finite or the shapes
/// disagree.
pub fn adam_step<T: Scalar, P, G>(params: &mut P, grads: &G, state: &mut AdamState<T>, lr: f64) -> Result<()>
where
    P: ParamTensors<T> + ?Sized,
    G: ParamTensors<T> + ?Sized,
{
    let grads = grads.tensors();
    let mut params = params.tensors_mut();
    let congruent = grads.len() == params.len()
        && grads.len() == state.first.len()
        && grads
            .iter()
            .zip(&params)
            .zip(&state.first)
            .all(|((g, p), m)| g.len() == p.len() && g.len() == m.len());
    if !congruent {
        return Err(Error::ShapeMismatch(
            "gradients, parameters and optimizer state differ".into(),
        ));
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient);
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(state.beta1);
    let b2 = T::of(state.beta2);
    let c1 = T::of(1.0 - state.beta1.powi(t));
    let c2 = T::of(1.0 - state.beta2.powi(t));
    let lr = T::of(lr);
    let eps = T::of(state.eps);
    let one = T::one();
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    #[serde(default = "default_lr")]
    pub initial_lr: f64,
    #[serde(default = "default_halve")]
    pub halve_every_epochs: usize,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_halve() -> usize {
    6
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial_lr: default_lr(),
            halve_every_epochs: default_halve(),
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.initial_lr.is_nan() || self.initial_lr <= 0.0 || self.halve_every_epochs == 0 {
            return Err(Error::InvalidConfig(
                "lr schedule needs initial_lr > 0 and halve_every_epochs >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// `initial_lr * 0.5^floor(epoch / halve_every_epochs)`.
pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    let halvings = (epoch / schedule.halve_every_epochs) as i32;
    schedule.initial_lr * 0.5f64.powi(halvings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![vec![0.5f64, -1.0], vec![2.0]];
        let g = vec![vec![0.0, 0.0], vec![0.0]];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.1).unwrap();
        assert_eq!(p, vec![vec![0.5, -1.0], vec![2.0]]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![vec![0.0f64]];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &vec![vec![1.0]], &mut s, 0.1).unwrap();
        // m_hat = 1, v_hat = 1 -> -0.1 / (1 + 1e-8)
        assert!((p[0][0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut p = vec![vec![1.0f32, 2.0]];
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &vec![vec![f32::NAN, 0.0]], &mut s, 0.1);
        assert!(matches!(err, Err(Error::NonFiniteGradient)));
        assert_eq!(p, vec![vec![1.0, 2.0]]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = vec![vec![0.3f32, -0.2, 0.7]];
            let mut s = AdamState::new(&p);
            for k in 0..50 {
                let g: Vec<Vec<f32>> = vec![p[0].iter().map(|v| v * 2.0 + k as f32 * 0.01).collect()];
                adam_step(&mut p, &g, &mut s, 0.01).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn layout_invariance() {
        let mut split = vec![vec![0.3f64, -0.2], vec![0.7, 0.1, 0.0]];
        let mut flat = vec![vec![0.3f64, -0.2, 0.7, 0.1, 0.0]];
        let mut ss = AdamState::new(&split);
        let mut sf = AdamState::new(&flat);
        for k in 0..20 {
            let g: Vec<f64> = (0..5).map(|i| ((i + k) as f64).sin()).collect();
            adam_step(&mut split, &vec![g[..2].to_vec(), g[2..].to_vec()], &mut ss, 0.05).unwrap();
            adam_step(&mut flat, &vec![g.clone()], &mut sf, 0.05).unwrap();
        }
        assert_eq!(split.concat(), flat[0]);
    }

    #[test]
    fn quadratic_loss_decreases() {
        let mut p = vec![vec![3.0f64]];
        let mut s = AdamState::new(&p);
        let loss = |x: f64| (x - 1.0).powi(2);
        let before = loss(p[0][0]);
        let g = vec![vec![2.0 * (p[0][0] - 1.0)]];
        adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
        assert!(loss(p[0][0]) < before);
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::default();
        assert_eq!(lr_at(&s, 0), 1e-3);
        assert_eq!(lr_at(&s, 5), 1e-3);
        assert_eq!(lr_at(&s, 6), 5e-4);
        assert_eq!(lr_at(&s, 13), 2.5e-4);
        let mut prev = f64::INFINITY;
        for e in 0..100 {
            assert!(lr_at(&s, e) <= prev);
            prev = lr_at(&s, e);
        }
    }
}
