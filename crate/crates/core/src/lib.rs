//! Detection of filaments in planar point clouds by multiscale significant runs.
//!
//! Points are counted in a dictionary of thin tilted strips at every
//! anisotropy scale ([`strip`], [`counter`]). Strips whose counts exceed a
//! threshold are linked by good-continuation edges ([`graph`]) and the
//! longest run of linked significant strips is the test statistic
//! ([`runs`]). Thresholds come from closed-form Poisson calculus
//! ([`thresholds`]) or from Monte Carlo calibration ([`experiments`]).
//!
//! Geometry, counting and sampling are generic over the coordinate type via
//! [`Real`]; the aliases below fix it to `f64` (or `f32`).

pub mod counter;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod holder;
pub mod io;
pub mod runs;
pub mod scalar;
pub mod strip;
pub mod synth;
pub mod thresholds;

pub use error::{Error, Result};
pub use holder::{CurveSpec, HolderCurve};
pub use runs::{detect, detect_with, DetectionResult, ScanMode};
pub use scalar::Real;
pub use strip::StripId;
pub use thresholds::{ThresholdConfig, ThresholdSet};

pub type Point = scalar::Point2<f64>;
pub type PointCloud = counter::PointCloud<f64>;
pub type ScaleParams = strip::ScaleParams<f64>;
pub type StripGeometry = strip::StripGeometry<f64>;

pub type Point32 = scalar::Point2<f32>;
pub type PointCloud32 = counter::PointCloud<f32>;
pub type ScaleParams32 = strip::ScaleParams<f32>;
pub type StripGeometry32 = strip::StripGeometry<f32>;
