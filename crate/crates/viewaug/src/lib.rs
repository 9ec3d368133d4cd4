//! Geometry-informed synthetic view augmentation for sparse-view surface
//! reconstruction.
//!
//! The library fits per-surface-point radiance maps as real spherical
//! harmonics expansions from multi-view color observations, casts augmented
//! rays from coarse surface geometry, filters them by sphere-traced
//! visibility against a signed-distance field, and propagates depth between
//! posed views by forward warping. Synthetic driving-style scenes provide
//! reproducible ground truth for every stage, and the brute-force oracles
//! (mesh intersection, recursive compositing, double-loop metrics) that the
//! test suites check against live alongside the fast paths.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`sh`]: spherical-harmonics basis, least-squares radiance fitting, and
//!   the geodesic interpolation baseline
//! - [`geom`]: rays, rigid transforms, pinhole cameras
//! - [`sdf`]: signed-distance fields, sphere tracing, visibility marching
//! - [`mesh`]: marching-cubes extraction and the ray/triangle oracle
//! - [`render`]: alpha compositing and image/depth quality metrics
//! - [`warp`]: forward depth warping and the smoothness regularizer
//! - [`scene`]: synthetic scene construction, trajectories, ground truth
//! - [`augment`]: the end-to-end ray augmentation pipeline and ablations
//! - [`eval`]: metric aggregation shared by the CLI and the acceptance suite

pub mod augment;
pub mod error;
pub mod eval;
pub mod geom;
pub mod math;
pub mod mesh;
pub mod render;
pub mod scene;
pub mod sdf;
pub mod sh;
pub mod warp;

mod book;

pub use error::{Error, Result};
pub use math::{Aabb, Rgb, UnitVec3, Vec3};
