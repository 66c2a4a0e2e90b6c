//! Two-parameter persistent homology for point clouds carrying a real-valued
//! function, and statistical procedures for comparing such clouds.
//!
//! The pipeline runs: [`geometry`] (clouds, distances, grids) →
//! [`bifiltration`] (function-Rips complexes with bigrades) →
//! [`persistence`] / [`bipersistence`] (barcodes, Hilbert functions,
//! bigraded Betti numbers, slices) → [`distance`] (bottleneck and matching
//! distances) → [`stats`] and [`experiments`].

pub mod bifiltration;
pub mod bipersistence;
pub mod distance;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod persistence;
pub mod plot;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
