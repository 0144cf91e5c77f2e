//! Adaptive hierarchical sensing of sparse and compressible signals.
//!
//! The crate builds a binary sensing tree over an analysis transform,
//! samples a signal with a measurement budget that scales as
//! `O(K log2(N/K))`, and reconstructs directly from the collected leaf
//! values without solving an inverse problem. Supporting modules provide
//! the transform pairs (Haar, CDF 9/7, permuted variants), synthetic
//! signal models with their recovery-condition checks, and the experiment
//! drivers plus file formats used by the command-line tool.

pub mod experiments;
pub mod io;
pub mod models;
pub mod sensing;
pub mod transforms;
