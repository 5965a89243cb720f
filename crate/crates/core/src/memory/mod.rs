//! Numerical memory engine: perception geometry, token selection, feature
//! projection, the per-room episodic bank, attention fusion, and a gradient
//! checker for the whole differentiable path.
//!
//! Data flows through the submodules in pipeline order:
//!
//! 1. [`camera`] — pinhole back-projection of depth pixels into world space;
//! 2. [`patch`] — patch feature grids with 3D position embeddings;
//! 3. [`fps`] — farthest-point downsampling to a fixed token budget;
//! 4. [`project`] — MLP + affine maps from feature space into memory space;
//! 5. [`bank`] — the per-room episodic store with monotonic timestamps;
//! 6. [`fusion`] — scaled dot-product attention over the bank;
//! 7. [`grad`] — analytic gradients for the full path, checked against
//!    finite differences.
//!
//! Everything is plain `f64` with deterministic evaluation order; there is
//! no learned state anywhere, so identical inputs give bit-identical
//! outputs.

pub mod bank;
pub mod camera;
pub mod embed;
pub mod fps;
pub mod fusion;
pub mod grad;
pub mod patch;
pub mod project;

pub use bank::{BankError, MemoryBank, MemoryEntry, TimeEmbed};
pub use camera::{CameraModel, Pose, PoseError};
pub use embed::{position_embed, time_embed};
#[cfg(feature = "parallel")]
pub use fps::fps_par;
pub use fps::{fps, fps_seq};
pub use fusion::{
    attention_entropy, build_query, fuse, fuse_detailed, fuse_reference, FusionConfig, FusionError,
    FusionOutput, QueryInit,
};
pub use grad::{grad_check, synthetic_instance, GradCheckInstance, GradCheckReport};
pub use patch::{build_working_memory, PatchGrid, WorkingMemory};
pub use project::ProjectionParams;
