//! Random-graph GNN laboratory.
//!
//! Samples latent-position random graphs, builds their shift matrices and the
//! matching continuous operators, and measures how message-passing networks and
//! positional encodings computed on sampled graphs approach their continuous
//! limits as the graph grows.

pub mod error;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod kernel;
pub mod limit;
pub mod nn;
pub mod pe;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use kernel::{KernelModel, Latent, ModelSpec, ShiftKernel, ShiftKind};
