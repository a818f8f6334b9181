//! Supervised, MixIT and RemixIT training, teacher update protocols and
//! zero-shot adaptation.

mod protocol;
mod separator;
mod steps;
mod train;

pub use protocol::{ema_update, update_teacher, TeacherProtocol, TeacherUpdate};
pub use separator::{OracleSeparator, PassthroughSeparator, Separator};
pub use steps::{
    bootstrap_remix, consolidate, mixit_loss, mixit_step, remixit_epoch, remixit_step, sample_permutation,
    supervised_loss, supervised_step, teacher_estimates, BatchPermutation, MixitChoice, RemixedBatch, StepLoss,
};
pub use train::{
    evaluate, pretrain_teacher, run_remixit, write_train_log, zero_shot_adapt, EvalMetrics, Regime, TrainConfig,
    TrainOutcome, TrainRecord, FINAL_CHECKPOINT, LOG_FILE, TEACHER_CHECKPOINT,
};
