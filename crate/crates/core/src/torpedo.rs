//! Torpedo warping functions: round near the origin, concave, and constant
//! from some radius on.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::curvature::{sigma_warp, WarpSpec};
use crate::fncore::{make_piecewise, mollify, scale_warp, Piece, SmoothFn1D};
use crate::numerics::{integrate_composite, linspace};
use crate::report::CurvatureReport;
use crate::tolerances::CLAUSE_EQUALITY;
use crate::{Error, Result};

/// Grid used by [`validate_torpedo`].
pub const VALIDATION_POINTS: usize = 1000;

/// Tail flatness required by [`validate_torpedo`].
pub const TAIL_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_EPS: f64 = 0.05;

/// A torpedo function of radius `delta`, constant from `r_cyl` on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorpedoSpec {
    pub delta: f64,
    pub eps: f64,
    #[serde(rename = "R")]
    pub r_cyl: f64,
    pub f: SmoothFn1D,
}

impl TorpedoSpec {
    /// End of the domain, `delta * pi`.
    pub fn r_bar(&self) -> f64 {
        self.f.domain().1
    }

    pub fn warp(&self, k: usize) -> Result<WarpSpec> {
        WarpSpec::new(k, self.f.clone(), 0.0)
    }
}

/// `u = min(t, pi/2)` with the corner smoothed over `[pi/2 - eps, pi/2 + eps]`.
pub fn build_cap_profile(eps: f64) -> Result<SmoothFn1D> {
    if !(eps > 0.0 && eps < 0.25 * PI) {
        return Err(Error::Parameter(format!("eps must lie in (0, pi/4), got {eps}")));
    }
    // Pieces long enough on both sides that the corner is the only
    // breakpoint any bump reaches.
    let ramp = make_piecewise(
        vec![-2.0 * PI, FRAC_PI_2, FRAC_PI_2 + 2.0 * PI],
        vec![Piece::affine(0.0, 0.0, 1.0), Piece::constant(FRAC_PI_2)],
    )?;
    Ok(mollify(&ramp, 4.0 * eps)?.with_domain(0.0, PI))
}

/// `h_delta(t) = delta sin(u(t / delta))` on `[0, delta pi]`.
pub fn build_torpedo(delta: f64, eps: f64) -> Result<TorpedoSpec> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let u = build_cap_profile(eps)?;
    let h1 = SmoothFn1D::compose(&SmoothFn1D::sin(0.0, FRAC_PI_2 + 2.0 * PI), &u);
    Ok(TorpedoSpec {
        delta,
        eps,
        r_cyl: delta * (FRAC_PI_2 + eps),
        f: scale_warp(&h1, delta)?,
    })
}

/// Check the four torpedo conditions on a grid over the domain of `f`:
/// `0 <= f' <= 1`, `f'' <= 0`, a tail with `f = delta`, `f' = 0`, and
/// `sigma >= (k-1)(k-2)/delta^2` (the sampled quantity).
pub fn validate_torpedo(f: &SmoothFn1D, delta: f64, k: usize) -> CurvatureReport {
    let km = (k as f64 - 1.0) * (k as f64 - 2.0);
    let mut rep = CurvatureReport::new("torpedo", km / (delta * delta));
    let (lo, hi) = f.domain();
    let grid = linspace(lo, hi, VALIDATION_POINTS);

    let mut slope = f64::INFINITY;
    let mut concave = f64::INFINITY;
    for &t in &grid {
        let j = f.jet(t);
        slope = slope.min(j.d1).min(j.om1);
        concave = concave.min(-j.d2);
    }
    rep.condition("slope_in_unit_interval", slope + CLAUSE_EQUALITY);
    rep.condition("concave", concave + CLAUSE_EQUALITY);

    let flat = |t: f64| {
        let j = f.jet(t);
        j.d1.abs().max((j.value - delta).abs())
    };
    let tail_start = grid.iter().rposition(|&t| flat(t) > TAIL_TOLERANCE);
    let tail = match tail_start {
        None => hi - lo,
        Some(i) if i + 2 < grid.len() => hi - grid[i + 1],
        Some(_) => -flat(hi),
    };
    rep.condition("constant_tail", tail);

    match WarpSpec::new(k, f.clone(), 0.0) {
        Ok(w) => {
            for &t in &grid {
                rep.push(&[("t", t)], sigma_warp(&w, t).unwrap_or(f64::NAN));
            }
        }
        Err(_) => {
            for &t in &grid {
                let j = f.jet(t);
                let v = if t > 0.0 && j.value > 0.0 {
                    crate::curvature::sigma_from_jet(k, &j)
                } else {
                    f64::NAN
                };
                rep.push(&[("t", t)], v);
            }
        }
    }
    rep.finish()
}

/// One point of the profile curve `(y(t), f(t))` of the torpedo viewed as a
/// surface of revolution, with the warped curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub s: f64,
    pub y: f64,
    pub r: f64,
    pub theta: f64,
    pub kappa: f64,
    pub sigma: f64,
}

/// Profile samples at `n` points. The curve has unit speed in `t`, so
/// `y' = sqrt(1 - f'^2)` and `cos(theta) = -f'`.
pub fn profile_samples(spec: &TorpedoSpec, k: usize, n: usize) -> Result<Vec<ProfileSample>> {
    let w = spec.warp(k)?;
    let f = &spec.f;
    let rise = |t: f64| {
        let om1 = f.jet(t).om1;
        (om1 * (2.0 - om1)).max(0.0).sqrt()
    };
    let grid = linspace(0.0, spec.r_bar(), n.max(2));
    let mut y = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in &grid {
        y += integrate_composite(prev, t, 1, 16, rise);
        prev = t;
        let j = f.jet(t);
        let sin_th = rise(t);
        let kappa = if sin_th > 0.0 {
            j.d2 / sin_th
        } else {
            -(-j.d3).max(0.0).sqrt()
        };
        out.push(ProfileSample {
            s: t,
            y,
            r: j.value,
            theta: (-j.d1).clamp(-1.0, 1.0).acos(),
            kappa,
            sigma: sigma_warp(&w, t)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_profile_shape() {
        let u = build_cap_profile(0.05).unwrap();
        let j = u.jet(0.0);
        assert!(j.value.abs() < 1e-15 && (j.d1 - 1.0).abs() < 1e-15);
        assert!((u.value(PI) - FRAC_PI_2).abs() < 1e-15);
        assert!((u.value(1.0) - 1.0).abs() < 1e-14);
        let max_d2 = u.sample(2001).iter().map(|(_, j)| j.d2).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_d2 <= 1e-10);
        assert!(build_cap_profile(0.0).is_err() && build_cap_profile(1.0).is_err());
    }

    #[test]
    fn unit_torpedo_is_sine_then_constant() {
        let t = build_torpedo(1.0, 0.05).unwrap();
        for x in linspace(0.0, FRAC_PI_2 - 0.05, 50) {
            assert!((t.f.value(x) - x.sin()).abs() < 1e-14);
        }
        let j = t.f.jet(t.r_cyl);
        assert!((j.value - 1.0).abs() < 1e-15 && j.d1.abs() < 1e-15);
    }

    #[test]
    fn radius_two_meets_the_bound() {
        let t = build_torpedo(2.0, 0.05).unwrap();
        let rep = validate_torpedo(&t.f, 2.0, 3);
        assert!(rep.pass, "{:?}", rep.conditions);
        assert!(rep.min_value >= 0.5);
    }

    #[test]
    fn round_part_has_sphere_curvature() {
        for &delta in &[0.5, 1.0, 2.0] {
            let t = build_torpedo(delta, 0.05).unwrap();
            let w = t.warp(4).unwrap();
            for x in linspace(0.0, delta * (FRAC_PI_2 - 0.05), 40) {
                let s = sigma_warp(&w, x).unwrap();
                assert!((s - 12.0 / (delta * delta)).abs() < 1e-8, "{s} at {x}");
            }
        }
    }

    #[test]
    fn non_torpedoes_fail() {
        let id = SmoothFn1D::identity(0.0, 2.0);
        let rep = validate_torpedo(&id, 1.0, 3);
        assert!(rep.condition_margin("constant_tail").unwrap() < 0.0);
        let s = SmoothFn1D::sin(0.0, PI);
        let rep = validate_torpedo(&s, 1.0, 3);
        assert!(rep.condition_margin("slope_in_unit_interval").unwrap() < 0.0);
        assert!(!rep.pass);
    }

    #[test]
    fn onset_scales_with_radius() {
        let one = build_torpedo(1.0, 0.05).unwrap();
        for &d in &[0.5, 2.0, 3.7] {
            let t = build_torpedo(d, 0.05).unwrap();
            assert!((t.r_cyl - d * one.r_cyl).abs() <= 1e-12 * d);
        }
    }

    #[test]
    fn profile_curve_is_unit_speed() {
        let t = build_torpedo(1.0, 0.1).unwrap();
        let p = profile_samples(&t, 3, 400).unwrap();
        for w in p.windows(2) {
            let ds = w[1].s - w[0].s;
            let chord = ((w[1].y - w[0].y).powi(2) + (w[1].r - w[0].r).powi(2)).sqrt();
            assert!(chord <= ds * (1.0 + 1e-9) && chord >= ds * (1.0 - 1e-3));
        }
        assert!((p[10].kappa + 1.0).abs() < 1e-9);
    }
}
