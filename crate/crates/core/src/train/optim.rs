use alloc::vec::Vec;

use crate::tensor::{Gradients, ParamStore};
use crate::{Error, Result};

pub const ADAGRAD_EPS: f64 = 1e-8;

/// AdaGrad with global-norm clipping applied before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGrad {
    acc: Vec<Vec<f64>>,
    clip: f64,
}

impl AdaGrad {
    pub fn new(params: &ParamStore, clip: f64) -> Self {
        AdaGrad {
            acc: params
                .tensors()
                .iter()
                .map(|t| alloc::vec![0.0; t.len()])
                .collect(),
            clip,
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.acc
    }

    /// Applies one update and returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<f64> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        let norm = grads.global_norm();
        let factor = if norm > self.clip {
            self.clip / norm
        } else {
            1.0
        };
        let ids: Vec<_> = params.ids().collect();
        if ids.len() != self.acc.len() {
            return Err(Error::Shape(
                "optimizer state does not match parameters".into(),
            ));
        }
        for id in ids {
            let g = grads.get(id);
            let acc = &mut self.acc[id.0];
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            params.update(id, |p| {
                for ((p, a), &g) in p.iter_mut().zip(acc.iter_mut()).zip(g) {
                    let g = g * factor;
                    *a += g * g;
                    *p -= lr * g / (libm::sqrt(*a) + ADAGRAD_EPS);
                }
            });
        }
        Ok(norm)
    }
}
