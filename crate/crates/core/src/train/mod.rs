//! Objectives, schedules, optimizer and training loops.

mod config;
mod loops;
pub mod loss;
mod optim;
pub mod schedule;

pub use config::{EtaSchedule, TrainConfig, KEYS};
pub use loops::{
    ce_objective, ce_step, init_model, log_csv, mean_ce, model_config, prepare,
    self_critic_objective, self_critic_step, self_critic_term, train_pretrain, train_transfer,
    trl_objective, trl_step, LogRow, Prepared, Side, StepReport, TrainOutcome, TransferMode,
    LOG_HEADER,
};
pub use optim::{AdaGrad, ADAGRAD_EPS};
