//! Tolerances shared by constructions, verifiers and tests.

/// Fraction of the domain length below which `sigma_warp` switches to the
/// limit branch at the origin.
pub const SIGMA_SWITCH_FRACTION: f64 = 1e-3;

/// Agreement of the two `sigma_warp` branches at the switch point.
pub const SIGMA_BRANCH_AGREEMENT: f64 = 1e-6;

/// Normalisation checks `f(0) = 0`, `f'(0) = 1` of a warping function.
pub const WARP_NORMALISATION: f64 = 1e-10;

/// Exactness of mollification where the base is affine.
pub const MOLLIFY_AFFINE: f64 = 1e-10;

/// Derivative-through-convolution agreement.
pub const MOLLIFY_DERIVATIVE: f64 = 1e-8;

/// Local error tolerance of the adaptive Runge-Kutta integrators.
pub const RK_TOLERANCE: f64 = 1e-10;

/// Event location tolerance (in the independent variable).
pub const EVENT_TOLERANCE: f64 = 1e-10;

/// Allowed drift of the conserved quantity of the bend equation.
pub const BEND_DRIFT: f64 = 1e-8;

/// Jet matching at a gluing point.
pub const GLUE_JET: f64 = 1e-9;

/// Slack on inequality clauses evaluated in floating point.
pub const CLAUSE_SLACK: f64 = 1e-12;

/// Equality clauses of the sloping and bending lemmas.
pub const CLAUSE_EQUALITY: f64 = 1e-10;

/// Flatness of a warping function near its gluing radius.
pub const FLATNESS: f64 = 1e-9;

/// Relative step of the finite-difference oracle.
pub const FD_STEP: f64 = 1e-3;

/// Unit-speed check for constructed plane curves.
pub const ARCLENGTH: f64 = 1e-9;

/// Axis checks for the `lambda = 0` curve.
pub const AXIS: f64 = 1e-10;
