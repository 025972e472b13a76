//! Scalar curvature of warped metrics, paths of metrics and hypersurfaces
//! of revolution, with a finite-difference Riemann oracle.

mod oracle;
mod trace;

pub use oracle::{fd_oracle_scal, metric_derivatives};
pub use trace::{gajer_bound, gajer_constant, scal_trace_path, MetricJet, MetricPath, GAJER_CAP};

pub use crate::report::CurvatureReport;

use serde::{Deserialize, Serialize};

use crate::fncore::{JetValue, SmoothFn1D};
use crate::glcurve::{CurveJet, PlaneCurve};
use crate::tolerances::{SIGMA_SWITCH_FRACTION, WARP_NORMALISATION};
use crate::{Error, Result};

/// A warped metric `dt^2 + f(t)^2 dxi^2` on a `k`-disc over a base whose
/// scalar curvature is bounded below by `ambient_offset`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarpSpec {
    pub k: usize,
    pub f: SmoothFn1D,
    pub ambient_offset: f64,
    /// Below this radius `sigma_warp` uses the expansion at the origin.
    pub t_switch: f64,
}

impl WarpSpec {
    /// Validates `f(0) = 0`, `f'(0) = 1` and `f(0) = 0` at the left end of
    /// the domain. The switch radius defaults to a fixed fraction of the
    /// domain length.
    pub fn new(k: usize, f: SmoothFn1D, ambient_offset: f64) -> Result<Self> {
        let (lo, hi) = f.domain();
        let t_switch = SIGMA_SWITCH_FRACTION * hi;
        Self::with_switch(k, f, ambient_offset, t_switch).and_then(|w| {
            if lo != 0.0 {
                Err(Error::InvalidWarping(format!("domain must start at 0, starts at {lo}")))
            } else {
                Ok(w)
            }
        })
    }

    pub fn with_switch(k: usize, f: SmoothFn1D, ambient_offset: f64, t_switch: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Parameter(format!("fiber sphere dimension k - 1 needs k >= 2, got {k}")));
        }
        let j = f.jet(0.0);
        if j.value.abs() > WARP_NORMALISATION || j.om1.abs() > WARP_NORMALISATION {
            return Err(Error::InvalidWarping(format!(
                "need f(0) = 0 and f'(0) = 1, got f(0) = {}, f'(0) = {}",
                j.value, j.d1
            )));
        }
        let (_, hi) = f.domain();
        if !(t_switch > 0.0 && t_switch < hi) {
            return Err(Error::Parameter(format!("switch radius {t_switch} outside (0, {hi})")));
        }
        Ok(Self {
            k,
            f,
            ambient_offset,
            t_switch,
        })
    }

    pub fn r_bar(&self) -> f64 {
        self.f.domain().1
    }

    /// `B = max(0, -A)`.
    pub fn b(&self) -> f64 {
        (-self.ambient_offset).max(0.0)
    }
}

/// `(k-1)((k-2)(1-f'^2)/f^2 - 2f''/f)` from a jet, using the `1 - f'`
/// channel for the difference of squares.
pub fn sigma_from_jet(k: usize, j: &JetValue) -> f64 {
    let km1 = k as f64 - 1.0;
    let km2 = k as f64 - 2.0;
    let one_minus_sq = j.om1 * (2.0 - j.om1);
    let f = j.value;
    km1 * km2 * one_minus_sq / (f * f) - 2.0 * km1 * j.d2 / f
}

/// Limit of the warped curvature at the origin, `-k(k-1) f'''(0)`.
pub fn sigma_at_origin(k: usize, f: &SmoothFn1D) -> f64 {
    -(k as f64) * (k as f64 - 1.0) * f.jet(0.0).d3
}

fn sigma_formula(w: &WarpSpec, t: f64) -> Result<f64> {
    let j = w.f.jet(t);
    if !(j.value > 0.0) {
        return Err(Error::InvalidWarping(format!("f({t}) = {} is not positive", j.value)));
    }
    Ok(sigma_from_jet(w.k, &j))
}

/// Odd expansion `f = t + c3 t^3 + c5 t^5` near the origin; `c5` comes
/// from the change of `f'''` over `[0, t_switch]`.
fn odd_coefficients(w: &WarpSpec) -> (f64, f64) {
    let d0 = w.f.jet(0.0).d3;
    let ds = w.f.jet(w.t_switch).d3;
    (d0 / 6.0, (ds - d0) / (60.0 * w.t_switch * w.t_switch))
}

/// The curvature formula applied to the odd expansion, with every
/// quotient divided through by `t` so that `t = 0` is regular.
fn sigma_expansion(k: usize, c3: f64, c5: f64, t: f64) -> f64 {
    let km1 = k as f64 - 1.0;
    let km2 = k as f64 - 2.0;
    let t2 = t * t;
    let f_t = 1.0 + c3 * t2 + c5 * t2 * t2;
    let f2_t = 6.0 * c3 + 20.0 * c5 * t2;
    let g = 3.0 * c3 + 5.0 * c5 * t2;
    let one_minus_sq_t2 = -g * (2.0 + g * t2);
    km1 * (km2 * one_minus_sq_t2 / (f_t * f_t) - 2.0 * f2_t / f_t)
}

/// Scalar curvature of `dt^2 + f(t)^2 dxi^2` at radius `t`.
///
/// For `t <= t_switch` the formula is evaluated on the odd expansion of
/// `f` through `t^5`, which equals `-k(k-1) f'''(0)` at the origin.
pub fn sigma_warp(w: &WarpSpec, t: f64) -> Result<f64> {
    let hi = w.r_bar();
    if !(t >= 0.0 && t <= hi * (1.0 + 1e-12)) {
        return Err(Error::Domain { t, lo: 0.0, hi });
    }
    if t > w.t_switch {
        return sigma_formula(w, t);
    }
    let (c3, c5) = odd_coefficients(w);
    Ok(sigma_expansion(w.k, c3, c5, t))
}

/// Gap at `t_switch` between the direct formula and the expansion branch.
pub fn sigma_branch_gap(w: &WarpSpec) -> Result<f64> {
    let (c3, c5) = odd_coefficients(w);
    Ok((sigma_formula(w, w.t_switch)? - sigma_expansion(w.k, c3, c5, w.t_switch)).abs())
}

/// Principal curvatures of the hypersurface of revolution in the flat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalCurvatures {
    pub lambdas: Vec<f64>,
}

/// `kappa`, then `k - 1` copies of `-sin(theta)/r`, then zeros up to `d_total`.
pub fn principal_curvatures_model(cj: &CurveJet, k: usize, d_total: usize) -> Result<PrincipalCurvatures> {
    if !(cj.r > 0.0) {
        return Err(Error::Axis(format!("radius {} is not positive", cj.r)));
    }
    if d_total < k {
        return Err(Error::Parameter(format!("total dimension {d_total} below k = {k}")));
    }
    let mu = -cj.theta.sin() / cj.r;
    let mut lambdas = vec![0.0; d_total];
    lambdas[0] = cj.kappa;
    for l in lambdas.iter_mut().take(k).skip(1) {
        *l = mu;
    }
    Ok(PrincipalCurvatures { lambdas })
}

/// `2 sum_{i<j} lambda_i lambda_j`.
pub fn pair_sum(lambdas: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..lambdas.len() {
        for j in i + 1..lambdas.len() {
            acc += lambdas[i] * lambdas[j];
        }
    }
    2.0 * acc
}

/// `A + 2 sum_{i<j} lambda_i lambda_j` for a single jet.
pub fn scal_revolution_jet(cj: &CurveJet, k: usize, ambient_offset: f64) -> Result<f64> {
    let pc = principal_curvatures_model(cj, k, k)?;
    Ok(ambient_offset + pair_sum(&pc.lambdas))
}

/// Curvature of the hypersurface swept by `curve` at arclength `s`.
pub fn scal_revolution(curve: &PlaneCurve, k: usize, s: f64, ambient_offset: f64) -> Result<f64> {
    let cj = curve.jet(s)?;
    if !(cj.r > 0.0) {
        return Err(Error::Axis(format!("curve meets the axis at s = {s}")));
    }
    scal_revolution_jet(&cj, k, ambient_offset)
}

/// Certified lower bound for the bent tube over a base whose metric deviates
/// from the product by a constant `c`.
pub fn lower_bound_estimate(cj: &CurveJet, k: usize, c: f64, base_scal: f64) -> Result<f64> {
    if !(cj.r > 0.0) {
        return Err(Error::Axis(format!("radius {} is not positive", cj.r)));
    }
    if c < 0.0 {
        return Err(Error::Parameter(format!("C must be non-negative, got {c}")));
    }
    let km1 = k as f64 - 1.0;
    let km2 = k as f64 - 2.0;
    let (s, r, kap) = (cj.theta.sin(), cj.r, cj.kappa);
    let sign = if kap > 0.0 {
        1.0
    } else if kap < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(base_scal + kap.abs() * (-sign * 2.0 * km1 * s / r - c * s) + km1 * km2 * s * s / (r * r) - c * s * s / r)
}
