//! Deformations of warping functions: reparametrisation families, the
//! flattening homotopy, matching to a torpedo, and the path constructions
//! used to build collars.

mod endgame;
mod families;
mod flatten;
mod paths;

pub use families::{
    bending_family, certification_grid, sloping_family, BendingFamily, BendingMember, ClauseCheck, SlopingFamily,
    SlopingMember, BEND_HEADROOM, BEND_OFFSET, CLAUSE_SAMPLES,
};
pub use endgame::{
    collar_interp, collar_length, match_bounds, torpedo_match_homotopy, verify_match, CollarInterp, MatchGrid, MatchMember, TorpedoMatch,
    COLLAR_DOUBLINGS, THETA_TOL,
};
pub use paths::{
    collar_transition, concat_sup_distance, path_concat_approx, step_profile, CollarSlice, CollarTransition, Partition,
    StepProfile, ACCEL,
};
pub use flatten::{
    fixture_family, flatten_homotopy, verify_flatten, Fixture, FlattenConstants, FlattenGrid, FlattenHomotopy,
    FlattenMember, WarpFamily, BLEND_WEIGHT, BLEND_WIDTH,
};

use serde::{Deserialize, Serialize};

use crate::curvature::{sigma_warp, WarpSpec};
use crate::fncore::SmoothFn1D;
use crate::numerics::linspace;
use crate::report::CurvatureReport;
use crate::tolerances::CLAUSE_SLACK;
use crate::{Error, Result};

/// Curvature levels `B <= B' < B'' < (k-1)(k-2)/delta^2` over a base with
/// scalar curvature at least `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSCBounds {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Bp")]
    pub bp: f64,
    #[serde(rename = "Bpp")]
    pub bpp: f64,
    pub k: usize,
    pub delta: f64,
}

impl PSCBounds {
    pub fn new(a: f64, bp: f64, bpp: f64, k: usize, delta: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::Parameter(format!("need k >= 3, got {k}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        let b = (-a).max(0.0);
        let out = Self { a, b, bp, bpp, k, delta };
        if !(b <= bp) {
            return Err(Error::infeasible("B <= B'", format!("B = {b}, B' = {bp}")));
        }
        if !(bp < bpp) {
            return Err(Error::infeasible("B' < B''", format!("B' = {bp}, B'' = {bpp}")));
        }
        if !(bpp < out.torpedo_level()) {
            return Err(Error::infeasible(
                "B'' < (k-1)(k-2)/delta^2",
                format!("B'' = {bpp}, bound = {}", out.torpedo_level()),
            ));
        }
        Ok(out)
    }

    /// `(k-1)(k-2)`.
    pub fn km(&self) -> f64 {
        (self.k as f64 - 1.0) * (self.k as f64 - 2.0)
    }

    /// `(k-1)(k-2)/delta^2`, the curvature floor of the torpedo.
    pub fn torpedo_level(&self) -> f64 {
        self.km() / (self.delta * self.delta)
    }
}

/// Check the easy estimate for `f o h` on `[0, s]`.
///
/// Hypothesis (1) is `B'' f^2 <= (k-1)(k-2)` on `[0, r]`; hypothesis (2) is
/// `h'' <= (B'' - B') f(h) / (2(k-1))` wherever `h <= r`. When both hold the
/// conclusion `sigma(f o h) >= B'` is sampled as the report's values;
/// otherwise the samples are still recorded but the report is marked as
/// not asserting the conclusion through a failed condition.
pub fn easy_estimate_check(f: &WarpSpec, h: &SmoothFn1D, bounds: &PSCBounds, r: f64, s: f64) -> Result<CurvatureReport> {
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::Parameter(format!("need r, s > 0, got r = {r}, s = {s}")));
    }
    let km1 = bounds.k as f64 - 1.0;
    let mut rep = CurvatureReport::new("easy_estimate", bounds.bp);
    let (_, f_hi) = f.f.domain();
    let hyp1 = linspace(0.0, r.min(f_hi), 401)
        .into_iter()
        .map(|t| {
            let v = f.f.value(t);
            bounds.km() - bounds.bpp * v * v
        })
        .fold(f64::INFINITY, f64::min);
    rep.condition("hypothesis_1", hyp1);

    let grid = linspace(0.0, s, 401);
    let gap = 0.5 * (bounds.bpp - bounds.bp) / km1;
    let hyp2 = grid
        .iter()
        .filter_map(|&t| {
            let j = h.jet(t);
            (j.value <= r).then(|| gap * f.f.value(j.value) - j.d2)
        })
        .fold(f64::INFINITY, f64::min);
    rep.condition("hypothesis_2", hyp2 + CLAUSE_SLACK);

    let comp = WarpSpec::new(bounds.k, SmoothFn1D::compose(&f.f, &h.with_domain(0.0, s)), f.ambient_offset)?;
    for &t in &grid {
        rep.push(&[("t", t)], sigma_warp(&comp, t)?);
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fncore::{integrate_twice, make_piecewise, mollify, Piece};
    use crate::torpedo::build_torpedo;

    fn bounds() -> PSCBounds {
        PSCBounds::new(0.0, 0.5, 7.0, 5, 1.0).unwrap()
    }

    #[test]
    fn bounds_ordering() {
        assert!(PSCBounds::new(-1.0, 0.5, 7.0, 5, 1.0).is_err());
        assert!(PSCBounds::new(0.0, 7.0, 7.0, 5, 1.0).is_err());
        assert!(PSCBounds::new(0.0, 0.5, 12.0, 5, 1.0).is_err());
        assert_eq!(PSCBounds::new(-0.25, 0.5, 7.0, 5, 1.0).unwrap().b, 0.25);
    }

    #[test]
    fn torpedo_meets_hypothesis_one_for_every_radius() {
        let b = bounds();
        let t = build_torpedo(1.0, 0.05).unwrap();
        let w = t.warp(5).unwrap();
        for &r in &[0.5, 1.5, 3.0] {
            let rep = easy_estimate_check(&w, &SmoothFn1D::identity(0.0, 3.0), &b, r, 3.0).unwrap();
            assert!(rep.condition_margin("hypothesis_1").unwrap() >= 0.0);
        }
    }

    #[test]
    fn identity_reduces_to_the_input() {
        let b = bounds();
        let t = build_torpedo(1.0, 0.05).unwrap();
        let w = t.warp(5).unwrap();
        let rep = easy_estimate_check(&w, &SmoothFn1D::identity(0.0, 3.0), &b, 3.0, 3.0).unwrap();
        assert!(rep.pass, "{:?} {}", rep.conditions, rep.min_value);
        assert!((rep.min_value - 12.0).abs() < 1e-6);
    }

    /// A second-derivative spike in `h` breaks hypothesis (2), and for a
    /// round `f` the composition does drop below `B'`.
    #[test]
    fn spike_breaks_hypothesis_two() {
        let b = PSCBounds::new(0.0, 0.5, 1.0, 3, 1.0).unwrap();
        let f = WarpSpec::new(3, SmoothFn1D::sin(0.0, 3.0), 0.0).unwrap();
        let mut worst: f64 = f64::INFINITY;
        for spike in [4.0, 8.0, 16.0] {
            // Slope drops to 1 - spike/20 and the spike brings it back to 1.
            let w = make_piecewise(
                vec![-1.0, 0.2, 0.4, 0.45, 3.0],
                vec![
                    Piece::constant(0.0),
                    Piece::constant(-spike / 4.0),
                    Piece::constant(spike),
                    Piece::constant(0.0),
                ],
            )
            .unwrap();
            let h = integrate_twice(&mollify(&w, 0.02).unwrap(), -1.0, -1.0, 1.0).unwrap().with_domain(0.0, 1.0);
            assert!((h.jet(1.0).d1 - 1.0).abs() < 1e-12);
            let rep = easy_estimate_check(&f, &h, &b, 1.0, 1.0).unwrap();
            assert!(rep.condition_margin("hypothesis_2").unwrap() < 0.0);
            worst = worst.min(rep.margin);
        }
        assert!(worst < 0.0, "no violating instance found");
    }
}
