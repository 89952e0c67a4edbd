//! Streaming subspace clustering over landmark windows.
//!
//! Each window of `d`-dimensional objects (stored as the columns of a `d × n`
//! matrix) is coded against itself plus a small bank of representatives kept
//! from the previous window. The sparse code drives a three-level hierarchy:
//! spectral microclusters, residual-based merging into macroclusters, and a
//! single reassignment pass. Per-object residuals give a sparsity residual
//! value (SRV) that flags outliers and ranks bank candidates.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the clock and
//! the command line live in the `sparsestream` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod kmeans;
mod math;
pub mod model;
pub mod solver;
pub mod spectral;
pub mod srv;
pub mod synth;

pub use engine::{
    init_state, process_window, run_stream, Clock, NoClock, StreamAggregate, StreamSummary,
    WindowOutput,
};
pub use error::{CoreError, Result};
pub use model::{
    ClusterLevel, ClusterSet, DataWindow, NoiseNorm, ObjectDiagnostics, SolverConfig, SparseCode,
    StreamConfig, StreamState, WindowReport,
};

/// Dense column-major matrix used throughout; objects are columns.
pub type Matrix = nalgebra::DMatrix<f64>;
