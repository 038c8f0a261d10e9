//! Core algorithms for center-point-based object depth estimation.
//!
//! The pipeline stages are:
//!
//! 1. **geometry** – rigid transforms, pinhole projection, 3D-box to 2D
//!    annotation conversion and range/visibility filtering.
//! 2. **scene** – deterministic synthetic frame generation (feature maps,
//!    depth rasters, ground-truth heatmaps, annotations) at desk scale.
//! 3. **heatmap** – Gaussian peak rendering and center-point decoding with
//!    windowed non-maximum suppression.
//! 4. **crf** – star-topology fully-connected CRF over a detection's region,
//!    anchored at the center point; closed-form and coordinate-descent
//!    minimizers of the quadratic energy.
//! 5. **metrics** – delta-threshold accuracy, MRE/MAE/RMSE, distance-binned
//!    MAE, and the Center/Seg extraction baselines.
//! 6. **bev** – back-projection of detections onto the ground plane,
//!    occupancy-grid rasterization and A* path planning.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all floating-point
//! transcendentals go through `libm` so results are bit-identical across
//! platforms, which the dataset determinism contract relies on.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bev;
pub mod crf;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod raster;
pub mod scene;

pub use raster::Raster;
