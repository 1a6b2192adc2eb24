//! Reconstruction of planar convex bodies from noisy covariogram samples and
//! from noisy samples of the (squared) modulus of the Fourier transform of
//! their indicator functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: exact kernels on convex polygons (clipping, support and
//!   brightness functions, surface area measures, Minkowski reconstruction,
//!   difference and Blaschke bodies, Hausdorff distance).
//! - [`covariogram`]: covariogram evaluation and the measurement lattice.
//! - [`spectral`]: closed-form Fourier transform of polygon indicators and the
//!   Fourier partial-sum synthesis of covariogram estimates.
//! - [`measurement`]: reproducible simulation of every measurement design.
//! - [`estimators`]: first-stage estimators (brightness from finite
//!   differences, the Gasser-Müller kernel estimator, phase front ends).
//! - [`lsq`]: the brightness NNLS fit and the nonlinear covariogram fit.
//! - [`pipelines`]: end-to-end reconstruction for the three problems and the
//!   convergence-experiment harness.
//! - [`oracle`]: brute-force references used by the tests.
//! - [`io`] and [`svg`]: file formats and figures.

pub mod covariogram;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
pub mod lsq;
pub mod measurement;
pub mod oracle;
pub mod pipelines;
pub mod quadrature;
pub mod shapes;
pub mod spectral;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{Direction, Polygon, SurfaceAreaMeasure, Vec2};
