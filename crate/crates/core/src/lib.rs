//! Deterministic desk-scale world model for an embodied rearrangement agent.
//!
//! The crate has three layers that build on each other:
//!
//! * **World**: axis-aligned scene geometry reconstructed from labeled surface
//!   point sets ([`scene`]), a line-oriented action-token grammar ([`grammar`]),
//!   and a replayable state machine that validates trajectories against a scene
//!   ([`sim`]).
//! * **Memory**: a numerical working/episodic memory engine ([`memory`]) —
//!   pinhole unprojection, sinusoidal position/time embeddings, farthest point
//!   sampling, MLP projection into memory space, a timestamped per-room memory
//!   bank, softmax-attention memory fusion, and an analytic-vs-finite-difference
//!   gradient check over every parameter group.
//! * **Scoring**: success-rate and sub-goal metrics with tiered suite
//!   aggregation ([`metrics`]).
//!
//! Everything is reproducible: all randomness flows through seeded generators
//! ([`synthetic`]), collections with observable iteration order are ordered,
//! and re-running any pipeline with the same inputs yields byte-identical
//! artifacts. With the `parallel` feature (on by default) the batch entry
//! points fan out via rayon; the sequential fallbacks compute bit-identical
//! results and stay available for comparison benches.

pub mod grammar;
pub mod linalg;
pub mod memory;
pub mod metrics;
pub mod scene;
pub mod sim;
pub mod synthetic;

pub(crate) mod par;

pub use linalg::Mat;
