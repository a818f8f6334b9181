use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{grow_depth, init_params, MaskNetParams};
use crate::optim::ParamTensors;
use crate::scalar::Scalar;

/// When and how the teacher is refreshed from the student.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TeacherProtocol {
    /// The pretrained teacher is never changed.
    Static,
    /// Every `period_epochs` the student becomes the teacher and a freshly
    /// initialized student takes its place, twice as deep when `grow_depth`.
    Sequential {
        #[serde(default = "default_period")]
        period_epochs: usize,
        #[serde(default = "default_grow")]
        grow_depth: bool,
    },
    /// After every epoch the teacher moves toward the student by `gamma`.
    Ema {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_period() -> usize {
    20
}

fn default_grow() -> bool {
    true
}

fn default_gamma() -> f64 {
    0.01
}

impl TeacherProtocol {
    pub fn sequential(period_epochs: usize) -> Self {
        TeacherProtocol::Sequential {
            period_epochs,
            grow_depth: true,
        }
    }

    pub fn ema(gamma: f64) -> Self {
        TeacherProtocol::Ema { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TeacherProtocol::Sequential { period_epochs: 0, .. } => {
                Err(Error::InvalidConfig("period_epochs must be at least 1".into()))
            }
            TeacherProtocol::Ema { gamma } if !(gamma > 0.0 && gamma < 1.0) => {
                Err(Error::InvalidConfig(format!("gamma {gamma} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// What [`update_teacher`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeacherUpdate {
    Unchanged,
    Averaged,
    /// The student became the teacher and a new student was initialized.
    Swapped,
}

/// `teacher := gamma * student + (1 - gamma) * teacher`, elementwise, for any
/// `gamma` in `[0, 1]`.
pub fn ema_update<T: Scalar>(teacher: &mut MaskNetParams<T>, student: &MaskNetParams<T>, gamma: f64) -> Result<()> {
    if !teacher.same_shape(student) {
        return Err(Error::IncompatibleEma);
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma {gamma} outside [0, 1]")));
    }
    for (t, s) in teacher.tensors_mut().into_iter().zip(student.tensors()) {
        for (tv, sv) in t.iter_mut().zip(s) {
            *tv = T::of(gamma * sv.as_f64() + (1.0 - gamma) * tv.as_f64());
        }
    }
    Ok(())
}

/// Applies `protocol` at the boundary after `epochs_done` completed epochs.
/// A sequential swap initializes the new student from `new_student_seed`;
/// the caller is responsible for resetting its optimizer.
pub fn update_teacher<T: Scalar>(
    protocol: &TeacherProtocol,
    teacher: &mut MaskNetParams<T>,
    student: &mut MaskNetParams<T>,
    epochs_done: usize,
    new_student_seed: u64,
) -> Result<TeacherUpdate> {
    protocol.validate()?;
    match *protocol {
        TeacherProtocol::Static => Ok(TeacherUpdate::Unchanged),
        TeacherProtocol::Ema { gamma } => {
            ema_update(teacher, student, gamma)?;
            Ok(TeacherUpdate::Averaged)
        }
        TeacherProtocol::Sequential {
            period_epochs,
            grow_depth: grow,
        } => {
            if epochs_done == 0 || !epochs_done.is_multiple_of(period_epochs) {
                return Ok(TeacherUpdate::Unchanged);
            }
            let arch = if grow { grow_depth(&student.arch) } else { student.arch };
            let fresh = init_params(&arch, new_student_seed)?;
            *teacher = std::mem::replace(student, fresh);
            Ok(TeacherUpdate::Swapped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelArch;
    use crate::signal::StftConfig;

    fn arch(depth: usize) -> ModelArch {
        ModelArch {
            num_sources: 2,
            depth,
            max_depth: 8,
            hidden: 4,
            context: 1,
            stft: StftConfig::new(32, 8).unwrap(),
        }
    }

    fn filled(value: f32) -> MaskNetParams<f32> {
        let mut p = MaskNetParams::zeros(arch(2)).unwrap();
        p.tensors_mut().into_iter().for_each(|t| t.fill(value));
        p
    }

    #[test]
    fn ema_convex_combination() {
        let mut t = filled(1.0);
        let mut s = filled(0.0);
        assert_eq!(
            update_teacher(&TeacherProtocol::ema(0.01), &mut t, &mut s, 1, 0).unwrap(),
            TeacherUpdate::Averaged
        );
        assert!(t.tensors().iter().all(|x| x.iter().all(|v| *v == 0.99f32)));
        assert_eq!(s, filled(0.0));
    }

    #[test]
    fn ema_extremes() {
        let s = init_params::<f32>(&arch(2), 1).unwrap();
        let t0 = init_params::<f32>(&arch(2), 2).unwrap();
        let mut t = t0.clone();
        ema_update(&mut t, &s, 1.0).unwrap();
        assert_eq!(t, s);
        let mut t = t0.clone();
        ema_update(&mut t, &s, 0.0).unwrap();
        assert_eq!(t, t0);
    }

    #[test]
    fn ema_rejects_mismatched_arch() {
        let mut t = init_params::<f32>(&arch(2), 1).unwrap();
        let mut s = init_params::<f32>(&arch(4), 1).unwrap();
        let err = update_teacher(&TeacherProtocol::ema(0.01), &mut t, &mut s, 1, 0).unwrap_err();
        assert_eq!(err.to_string(), "incompatible shapes for EMA");
    }

    #[test]
    fn sequential_swaps_at_period() {
        let proto = TeacherProtocol::sequential(20);
        let t0 = init_params::<f32>(&arch(2), 1).unwrap();
        let s0 = init_params::<f32>(&arch(2), 2).unwrap();
        let (mut t, mut s) = (t0.clone(), s0.clone());
        assert_eq!(
            update_teacher(&proto, &mut t, &mut s, 19, 5).unwrap(),
            TeacherUpdate::Unchanged
        );
        assert_eq!((&t, &s), (&t0, &s0));
        assert_eq!(
            update_teacher(&proto, &mut t, &mut s, 20, 5).unwrap(),
            TeacherUpdate::Swapped
        );
        assert_eq!(t, s0);
        assert_eq!(s.arch.depth, 4);
        assert_eq!(s, init_params::<f32>(&arch(4), 5).unwrap());
    }

    #[test]
    fn sequential_without_growth_keeps_depth() {
        let proto = TeacherProtocol::Sequential {
            period_epochs: 3,
            grow_depth: false,
        };
        let mut t = init_params::<f32>(&arch(2), 1).unwrap();
        let mut s = init_params::<f32>(&arch(2), 2).unwrap();
        update_teacher(&proto, &mut t, &mut s, 3, 9).unwrap();
        assert_eq!(s.arch.depth, 2);
    }

    #[test]
    fn static_is_bit_stable() {
        let t0 = init_params::<f32>(&arch(2), 1).unwrap();
        let (mut t, mut s) = (t0.clone(), init_params::<f32>(&arch(2), 2).unwrap());
        for epoch in 1..50 {
            update_teacher(&TeacherProtocol::Static, &mut t, &mut s, epoch, 0).unwrap();
        }
        assert_eq!(t, t0);
    }

    #[test]
    fn protocol_validation_and_serde() {
        assert!(TeacherProtocol::ema(0.0).validate().is_err());
        assert!(TeacherProtocol::ema(1.0).validate().is_err());
        assert!(TeacherProtocol::sequential(0).validate().is_err());
        let p: TeacherProtocol = serde_json::from_str(r#"{"kind": "sequential"}"#).unwrap();
        assert_eq!(p, TeacherProtocol::sequential(20));
        let p: TeacherProtocol = serde_json::from_str(r#"{"kind": "ema"}"#).unwrap();
        assert_eq!(p, TeacherProtocol::ema(0.01));
        assert!(serde_json::from_str::<TeacherProtocol>(r#"{"kind": "ema", "gama": 0.1}"#).is_err());
    }
}
