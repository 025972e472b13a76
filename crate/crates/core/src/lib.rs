//! Numerical construction and verification of positive-scalar-curvature
//! deformations: warping functions, torpedo profiles, bent plane curves and
//! the homotopies built from them.
//!
//! Everything is computed in `f64`; see [`Real`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod deform;
pub mod error;
pub mod fncore;
pub mod glcurve;
pub mod numerics;
pub mod report;
pub mod suite;
pub mod tolerances;
pub mod torpedo;

pub use error::{Error, Result};

/// Scalar type used throughout the crate.
pub type Real = f64;
pub use curvature::{CurvatureReport, MetricPath, WarpSpec};
pub use fncore::{JetValue, Piece, PiecewiseFn, SmoothFn1D, Term};
pub use glcurve::{CurveJet, GLFamily, GLParams, PlaneCurve};

