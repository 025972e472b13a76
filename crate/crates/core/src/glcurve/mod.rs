//! Plane curves in the `(y, r)` half-plane and the bent-tube curve family.
//!
//! Angles are measured from the negative `r`-axis: the unit tangent is
//! `(sin theta, -cos theta)` and `theta' = kappa`.

mod bend;
mod family;
mod params;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use family::{build_gl_family, verify_gl_family, CurveSample, GLFamily, GlCurve};
pub use params::{select_parameters, select_parameters_with, variant_feasibility, GLParams};

use crate::fncore::{BendSystem, SmoothFn1D};
use crate::numerics::{integrate, OdeOptions, OdeSystem, Trajectory};
use crate::tolerances::{AXIS, BEND_DRIFT, EVENT_TOLERANCE, RK_TOLERANCE};
use crate::{Error, Result};

/// Position, angle and signed curvature of a plane curve at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveJet {
    pub y: f64,
    pub r: f64,
    pub theta: f64,
    pub kappa: f64,
}

impl CurveJet {
    pub fn tangent(&self) -> [f64; 2] {
        [self.theta.sin(), -self.theta.cos()]
    }
}

#[derive(Debug, Clone)]
struct FrenetSystem {
    kappa: SmoothFn1D,
}

impl OdeSystem<3> for FrenetSystem {
    fn rhs(&self, s: f64, y: &[f64; 3]) -> [f64; 3] {
        [self.kappa.value(s), y[0].sin(), -y[0].cos()]
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Integrated {
        system: FrenetSystem,
        trajectory: Trajectory<3>,
    },
    Family(Arc<GlCurve>),
}

/// An arclength-parametrised curve on `[0, s_max]`.
#[derive(Debug, Clone)]
pub struct PlaneCurve {
    s_max: f64,
    repr: Repr,
}

impl PlaneCurve {
    pub(crate) fn from_family(curve: Arc<GlCurve>) -> Self {
        Self {
            s_max: curve.total_length(),
            repr: Repr::Family(curve),
        }
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn domain(&self) -> (f64, f64) {
        (0.0, self.s_max)
    }

    pub fn jet(&self, s: f64) -> Result<CurveJet> {
        if !(s >= 0.0 && s <= self.s_max * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                t: s,
                lo: 0.0,
                hi: self.s_max,
            });
        }
        match &self.repr {
            Repr::Integrated { system, trajectory } => {
                let st = trajectory.state_at(system, s);
                Ok(CurveJet {
                    theta: st[0],
                    y: st[1],
                    r: st[2],
                    kappa: system.kappa.value(s),
                })
            }
            Repr::Family(c) => Ok(c.jet_from_axis(s)),
        }
    }

    /// `(s, jet)` on a uniform grid of `n` points.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, CurveJet)>> {
        crate::numerics::linspace(0.0, self.s_max, n)
            .into_iter()
            .map(|s| self.jet(s).map(|j| (s, j)))
            .collect()
    }
}

fn frenet(kappa: SmoothFn1D, start: CurveJet, s_max: f64, stop_at_axis: bool) -> Result<PlaneCurve> {
    let (lo, hi) = kappa.domain();
    if !(lo <= 0.0 && hi >= s_max && s_max > 0.0) {
        return Err(Error::Parameter(format!(
            "curvature defined on [{lo}, {hi}] does not cover [0, {s_max}]"
        )));
    }
    if !(start.r > 0.0) {
        return Err(Error::Axis(format!("start radius {} is not positive", start.r)));
    }
    let system = FrenetSystem { kappa };
    let opts = OdeOptions {
        h0: 1e-3 * s_max,
        ..OdeOptions::default()
    };
    let sol = integrate(
        &system,
        0.0,
        [start.theta, start.y, start.r],
        s_max,
        &opts,
        Some(|_: f64, y: &[f64; 3]| y[2]),
        EVENT_TOLERANCE * s_max.max(1.0),
    )?;
    let s_end = match sol.event {
        Some(s_axis) if !stop_at_axis => {
            return Err(Error::Axis(format!("curve reaches r = 0 at s = {s_axis} before {s_max}")));
        }
        Some(s_axis) => s_axis,
        None => s_max,
    };
    Ok(PlaneCurve {
        s_max: s_end,
        repr: Repr::Integrated {
            system,
            trajectory: sol.trajectory,
        },
    })
}

/// Integrate `theta' = kappa`, `y' = sin theta`, `r' = -cos theta` from
/// `start` over `[0, s_max]`. Reaching the axis is an error.
pub fn curve_from_curvature(kappa: SmoothFn1D, start: CurveJet, s_max: f64) -> Result<PlaneCurve> {
    frenet(kappa, start, s_max, false)
}

/// As [`curve_from_curvature`], but the curve ends where it meets the axis.
pub fn curve_to_axis(kappa: SmoothFn1D, start: CurveJet, s_max: f64) -> Result<PlaneCurve> {
    frenet(kappa, start, s_max, true)
}

/// Solution of the bending equation `h'' = (1 + h'^2) / (a h)` together
/// with the worst drift of `h^(1/a) / sqrt(1 + h'^2)` along it.
#[derive(Debug, Clone)]
pub struct BendProfile {
    pub h: SmoothFn1D,
    pub t_end: f64,
    pub conserved: f64,
    pub drift: f64,
}

fn conserved(a: f64, y: &[f64; 2]) -> f64 {
    y[0].powf(1.0 / a) / (1.0 + y[1] * y[1]).sqrt()
}

/// Solve the bending equation from `h(t0) = f0`, `h'(t0) = slope0 < 0`
/// until `h'` vanishes.
pub fn bend_profile_solve(a: f64, f0: f64, slope0: f64, t0: f64) -> Result<BendProfile> {
    if !(a > 0.0 && f0 > 0.0 && slope0 < 0.0) {
        return Err(Error::Parameter(format!(
            "need a > 0, f0 > 0 and slope0 < 0, got a = {a}, f0 = {f0}, slope0 = {slope0}"
        )));
    }
    let system = BendSystem { a };
    let c0 = conserved(a, &[f0, slope0]);
    let h_end = c0.powf(a);
    // h'' >= 1/(a f0) while h <= f0, so h' reaches 0 before this span.
    let span = 2.0 * slope0.abs() * a * f0;
    let opts = OdeOptions {
        rtol: RK_TOLERANCE,
        atol: RK_TOLERANCE * h_end.min(1.0),
        h0: 1e-3 * span,
        ..OdeOptions::default()
    };
    let sol = integrate(
        &system,
        t0,
        [f0, slope0],
        t0 + span,
        &opts,
        Some(|_: f64, y: &[f64; 2]| y[1]),
        EVENT_TOLERANCE * span.min(1.0),
    )?;
    let t_end = sol
        .event
        .ok_or_else(|| Error::Solver("slope did not reach zero on the expected interval".into()))?;
    let drift = sol
        .trajectory
        .nodes
        .iter()
        .map(|(_, y)| (conserved(a, y) - c0).abs() / c0)
        .fold(0.0, f64::max);
    if drift > BEND_DRIFT {
        return Err(Error::Solver(format!("conserved quantity drifted by {drift}")));
    }
    Ok(BendProfile {
        h: SmoothFn1D::bend_solution(system, sol.trajectory),
        t_end,
        conserved: c0,
        drift,
    })
}

pub(crate) fn on_axis(y: f64) -> bool {
    y.abs() <= AXIS
}
