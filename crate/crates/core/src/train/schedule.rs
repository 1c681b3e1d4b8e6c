use alloc::format;

use rand::Rng;

use super::config::EtaSchedule;
use crate::{Error, Result};

/// `min(clip, step / total)`.
pub fn zeta_schedule(step: usize, total: usize, clip: f64) -> Result<f64> {
    if total == 0 || step > total {
        return Err(Error::Invalid(format!("step {step} of {total}")));
    }
    if !(clip > 0.0 && clip <= 1.0) {
        return Err(Error::Invalid(format!("zeta clip {clip}")));
    }
    Ok((step as f64 / total as f64).min(clip))
}

/// `γ0 / epoch`, epochs counted from 1.
pub fn lr_schedule(gamma0: f64, epoch: usize) -> Result<f64> {
    if epoch == 0 {
        return Err(Error::Invalid("epochs are counted from 1".into()));
    }
    Ok(gamma0 / epoch as f64)
}

pub fn eta_schedule(kind: EtaSchedule, step: usize, total: usize, eta_max: f64) -> Result<f64> {
    if total == 0 || step > total {
        return Err(Error::Invalid(format!("step {step} of {total}")));
    }
    Ok(match kind {
        EtaSchedule::Ramp => eta_max * step as f64 / total as f64,
        EtaSchedule::Constant => eta_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingChoice {
    GroundTruth,
    ModelOutput,
}

/// Feeds the model's own previous output with probability `zeta`.
pub fn scheduled_sampling_choice<R: Rng + ?Sized>(zeta: f64, rng: &mut R) -> SamplingChoice {
    if rng.random::<f64>() < zeta {
        SamplingChoice::ModelOutput
    } else {
        SamplingChoice::GroundTruth
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    /// 1-based step within the phase.
    pub step: usize,
    pub total: usize,
    pub epoch: usize,
    pub zeta: f64,
    pub eta: f64,
    pub lr: f64,
}
