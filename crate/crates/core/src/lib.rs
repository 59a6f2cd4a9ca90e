//! Radio-map imaging with a ceiling-mounted large intelligent surface (LIS)
//! and floor-plan reconstruction from the resulting maps.
//!
//! The pipeline, one module per stage:
//!
//! - [`scene`]: rooms, metallic scatterers, active devices; floor-plan rasterization.
//! - [`propagation`]: image-source multipath tracing and the complex field at each element.
//! - [`lis`]: antenna outputs, SNR-calibrated noise and S-averaging.
//! - [`radiomap`]: spherical-wave matched filter and RGB rendering.
//! - [`reconstruct_ls`]: linear least-squares map-to-plan estimator.
//! - [`metrics`]: PSNR, SSIM and scatterer centroid errors.
//! - [`dataset`]: reproducible sample generation, stratified splits, manifests.
//! - [`cli`]: the `lismap` command-line front end.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod io;
pub mod lis;
pub mod metrics;
pub mod propagation;
pub mod radiomap;
pub mod reconstruct_ls;
pub mod scene;

pub use error::{Error, Result};
pub use grid::Grid;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
