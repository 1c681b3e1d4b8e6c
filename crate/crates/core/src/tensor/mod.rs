//! Dense parameters and a reverse-mode gradient tape.
//!
//! Parameters are stored as f32 (this is what checkpoints hold). Every
//! parameter also keeps an f64 mirror whose values are exactly the f32
//! values widened; forward activations, adjoints and optimizer state are
//! f64. Matrices are row-major; a vector is an `n x 1` matrix.

mod gradcheck;
mod tape;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{lstm_cell, Tape, Var, PROB_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{name}: {} values for shape {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Tensor {
            name,
            rows,
            cols,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    tensors: Vec<Tensor>,
    mirror: Vec<Vec<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, tensor: Tensor) -> Result<ParamId> {
        if self.find(&tensor.name).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate parameter `{}`",
                tensor.name
            )));
        }
        self.mirror
            .push(tensor.data.iter().map(|&v| f64::from(v)).collect());
        self.tensors.push(tensor);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.tensors
            .iter()
            .position(|t| t.name == name)
            .map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.mirror[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Stores `value` rounded to f32 and returns the value actually stored.
    pub fn set(&mut self, id: ParamId, index: usize, value: f64) -> f64 {
        let v = value as f32;
        self.tensors[id.0].data[index] = v;
        self.mirror[id.0][index] = f64::from(v);
        f64::from(v)
    }

    /// Runs `f` over the f64 view of a parameter, then rounds back to f32.
    pub fn update(&mut self, id: ParamId, f: impl FnOnce(&mut [f64])) {
        let m = &mut self.mirror[id.0];
        f(m);
        for (dst, src) in self.tensors[id.0].data.iter_mut().zip(m.iter_mut()) {
            *dst = *src as f32;
            *src = f64::from(*dst);
        }
    }
}

/// Adjoints for every parameter of a store, index-aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_param: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(params: &ParamStore) -> Self {
        Gradients {
            per_param: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.per_param[id.0]
    }

    pub fn global_norm(&self) -> f64 {
        libm::sqrt(self.per_param.iter().flatten().map(|g| g * g).sum::<f64>())
    }

    pub fn is_finite(&self) -> bool {
        self.per_param.iter().flatten().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        self.per_param.iter_mut().flatten().for_each(|g| *g *= c);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.per_param.iter_mut().zip(&other.per_param) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    Ok(softmax_unchecked(x))
}

pub(crate) fn softmax_unchecked(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
