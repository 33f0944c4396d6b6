//! Level-set active contours with Gaussian-regularized evolution.
//!
//! The crate provides image fields and Gaussian filtering, region statistics,
//! self-organizing maps, a shared evolution engine, a family of speed models
//! (global, local, density-based and SOM-driven), and a harness for synthetic
//! experiments with Precision/Recall/F-measure scoring.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod harness;
pub mod models;
pub mod netpbm;
pub mod regional;
pub mod som;

pub use error::{Error, Result};
pub use evolve::{evolve, EvolveParams, Multiplier, SegmentationResult, SpeedModel, TimeStep};
pub use field::{Mask, Rect, ScalarField, VectorImage};
pub use grid::{init_levelset_rect, LevelSetField};
