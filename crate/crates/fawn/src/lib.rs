//! FAWN: a dual-encoder fusion-attention network that infers which entities
//! (person, robot) are in a room and in which 0.6 m grid cell each one
//! stands, from passively captured Wi-Fi beacon CSI and 5G SSB CSI.
//!
//! The crate is self-contained: a dense-tensor core with reverse-mode
//! automatic differentiation ([`graph`]), the network itself ([`model`]),
//! a deterministic synthetic CSI scene simulator ([`scene`]), a training
//! and evaluation harness ([`train`], [`metrics`]), and bit-exact file
//! formats ([`io`]).
//!
//! Data-parallel inner loops (dataset generation, per-batch gradients,
//! test-set evaluation) run on rayon when the default `parallel` feature
//! is enabled and fall back to sequential iteration otherwise; results
//! are bit-identical either way.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod parallel;
pub mod rng;
pub mod sample;
pub mod scene;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::SplitMix64;
pub use sample::{CsiSample, GridCell, SceneLabel};
pub use tensor::Tensor;
