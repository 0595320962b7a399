//! Hierarchical coded matrix multiplication.
//!
//! Each worker's share of `AB` is split into `L` sequential layers, each
//! protected by its own polynomial code with recovery threshold `K_l`, so
//! partial stragglers still contribute the layers they finish.

pub mod codec;
pub mod error;
pub mod matrix;
pub mod optimizer;
pub mod runtime;
pub mod sim;
pub mod tiling;
pub mod verify;

pub use codec::{CompletedResult, EncodedTask, SingleCode, TileGrid};
pub use error::{Error, Result};
pub use matrix::{mat_mul, DenseMatrix, EvalPointSet, Matrix, PointMode, RationalMatrix, Scalar};
pub use optimizer::{exhaustive_profile_search, optimize_profile, OptimizedProfile, OptimizerSpec};
pub use runtime::{DecodeMode, ExpectationMode, RuntimeParams, WorkerTimeline};
pub use sim::{ExperimentConfig, ExperimentMode, ExperimentReport, Scheme};
pub use tiling::{build_tile_plan, choose_grids, LayerGrid, Profile, TilePlan};
