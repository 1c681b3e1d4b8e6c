//! Pointer-generator abstractive summarization with cross-entropy,
//! self-critic policy gradient and dual-dataset transfer RL training.
//!
//! The crate is `no_std` (it needs `alloc`). File IO, the command line
//! and parallel evaluation live in the `trlsum` companion crate; everything
//! here operates on in-memory strings and byte buffers.
//!
//! Module map:
//!
//! - [`corpus`]: examples, datasets, the TAB-separated corpus format,
//!   synthetic corpora and deterministic batching.
//! - [`vocab`]: top-K vocabulary and the per-article extended vocabulary
//!   used by the copy mechanism.
//! - [`tensor`]: f32 parameter storage and a reverse-mode gradient tape.
//! - [`model`]: the pointer-generator network.
//! - [`decode`]: greedy, sampled and beam-search decoding.
//! - [`rouge`]: exact ROUGE-1/2/L and the RL reward.
//! - [`train`]: losses, schedules, AdaGrad and the training loops.
//! - [`checkpoint`]: binary checkpoint format.
//! - [`eval`]: per-dataset scoring and average / weighted-average rows.

#![no_std]

extern crate alloc;

pub mod checkpoint;
pub mod corpus;
pub mod decode;
mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod rouge;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
