//! Core library for latency-aware streaming classification of power-grid
//! faults and cyber-attacks on sampled-value streams.
//!
//! The pipeline, end to end:
//!
//! 1. [`waveform`] synthesizes labelled 4.8 kHz two-merging-unit streams and
//!    injects the 18-class fault/attack taxonomy.
//! 2. [`preprocess`] standardizes channels, builds 50-sample sliding windows,
//!    and performs leak-free stratified block splitting.
//! 3. [`nn`] trains compact MLP / 1D-CNN classifiers from scratch with Adam,
//!    early stopping, and learning-rate reduction.
//! 4. [`streaming`] runs per-sample inference with one-cycle centered
//!    smoothing and confidence-gated abstention.
//! 5. [`metrics`] scores traces (accuracy, coverage, classification time)
//!    and benchmarks inference latency with warm-up exclusion.
//! 6. [`wire`] replays datasets over a datagram socket at the native 208 µs
//!    period and measures true end-to-end latency.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod streaming;
pub mod waveform;
pub mod wire;

pub use error::{Error, Result};
