//! Segmentation of thin tubular structures in 3-D volumes.
//!
//! The pipeline runs a multiscale Frangi vesselness filter on isotropic
//! volumes, thresholds the response inside a region of interest, keeps
//! connected components of plausible length and counts them. The filter's
//! scales and thresholds are tuned by maximising the likelihood of ordinal
//! visual ratings under an ordered-logit model, so no voxel-level ground
//! truth is required.
//!
//! Modules:
//!
//! - [`volume`]: grids, volumes, masks, raw/NIfTI-1 I/O and isotropic reslicing.
//! - [`hessian`]: Gaussian scale-space Hessian and 3×3 symmetric eigenvalues.
//! - [`vesselness`]: per-scale and multiscale vesselness, thresholding.
//! - [`components`]: connected components, length gating and counting.
//! - [`ologit`]: rating scales, the ordered-logit model and its calibration.
//! - [`optimizer`]: cohort likelihood and grid search over filter parameters.
//! - [`phantom`]: synthetic tube phantoms with known ground truth.
//! - [`stats`]: Spearman rank correlation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the I/O layer and optimizer use.

pub mod components;
pub mod error;
pub mod hessian;
pub mod ologit;
pub mod optimizer;
pub mod phantom;
pub mod scalar;
pub mod stats;
pub mod vesselness;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use volume::{Axis, Grid, Mask3D, Volume};

pub type Volume3D = volume::Volume<f64>;
pub type Volume3F = volume::Volume<f32>;
pub type HessianField3D = hessian::HessianField<f64>;
pub type EigenTriple3D = hessian::EigenTriple<f64>;
pub type OrderedLogitModel = ologit::OrderedLogit<f64>;
pub type CorrelationResult = stats::Correlation<f64>;
