//! Lost-in-space star identification by globally optimal rotation search.
//!
//! The solver finds the rotation that aligns the most scene stars with
//! onboard catalog stars, using branch-and-bound over axis-angle space with
//! a triplet-constrained bound. Per-star queries run on stereographically
//! projected sub-catalogs indexed by circular R-trees.
//!
//! Geometry, projection and indexing are generic over [`Real`] (`f32`/`f64`);
//! the catalog, solver and simulator work in `f64`. The `*64` aliases below
//! name the concrete types used throughout the pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod catalog;
pub mod error;
pub mod geometry;
pub mod projection;
pub mod scalar;
pub mod simulator;
pub mod solver;
pub mod spatial_index;

pub use error::{Error, Result};
pub use scalar::Real;

pub type UnitVec3f64 = geometry::UnitVec3<f64>;
pub type UnitVec3f32 = geometry::UnitVec3<f32>;
pub type AxisAngle64 = geometry::AxisAngle<f64>;
pub type AxisAngle32 = geometry::AxisAngle<f32>;
pub type RotationCube64 = geometry::RotationCube<f64>;
pub type SphericalPatch64 = projection::SphericalPatch<f64>;
pub type ProjectedPatch64 = projection::ProjectedPatch<f64>;
pub type ProjectedPatch32 = projection::ProjectedPatch<f32>;
pub type CircularRTree64<P> = spatial_index::CircularRTree<f64, P>;
pub type CircularRTree32<P> = spatial_index::CircularRTree<f32, P>;
