//! Piecewise closed-form functions of one variable and the operations the
//! constructions are built from: mollification, double integration,
//! scaling, convex combination and composition.

mod mollify;
pub(crate) use mollify::{panel_rule as bump_rule, unit_nodes as bump_nodes};
mod piecewise;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use mollify::{bump, bump_constant, bump_moment, reference_convolution, scaled_bump, SUPPORT as BUMP_SUPPORT};
pub use piecewise::{make_piecewise, Piece, PiecewiseFn, Term};

use crate::numerics::{integrate_adaptive, OdeSystem, Trajectory};
use crate::tolerances::{FLATNESS, GLUE_JET};
use crate::{Error, Result};

/// Value and derivatives at a point.
///
/// `om1` carries `1 - d1` computed without cancellation; near the origin of
/// a warping function it keeps the curvature formula accurate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub om1: f64,
}

impl JetValue {
    pub fn new(value: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Self {
            value,
            d1,
            d2,
            d3,
            om1: 1.0 - d1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d3.is_finite()
    }

    fn truncate(mut self, order: usize) -> Self {
        if order < 1 {
            self.d1 = 0.0;
            self.om1 = 1.0;
        }
        if order < 2 {
            self.d2 = 0.0;
        }
        if order < 3 {
            self.d3 = 0.0;
        }
        self
    }

    pub fn get(&self, order: usize) -> f64 {
        match order {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3,
        }
    }
}

/// How the composed warping function glues at the end of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlueMode {
    /// The outer function is flat near its right endpoint.
    FlatF,
    /// The reparametrisation has unit slope near `S`.
    UnitSlopeH,
}

/// Solution of `h'' = (1 + h'^2) / (a h)` with state `(h, h')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendSystem {
    pub a: f64,
}

impl OdeSystem<2> for BendSystem {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], (1.0 + y[1] * y[1]) / (self.a * y[0])]
    }
}

impl BendSystem {
    pub fn jet(&self, y: [f64; 2]) -> JetValue {
        let (h, p) = (y[0], y[1]);
        let q = 1.0 + p * p;
        let d2 = q / (self.a * h);
        let d3 = (2.0 * p * d2 * h - q * p) / (self.a * h * h);
        JetValue::new(h, p, d2, d3)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Node {
    /// Piecewise data, mollified when `epsilon > 0`.
    Base {
        #[serde(flatten)]
        base: PiecewiseFn,
        epsilon: f64,
    },
    /// `theta * f(t / theta)`
    Scale { inner: SmoothFn1D, theta: f64 },
    /// `mul * f(t) + add + slope * (t - origin)`
    Affine {
        inner: SmoothFn1D,
        mul: f64,
        add: f64,
        slope: f64,
        origin: f64,
    },
    /// `f(t - shift)`
    Shift { inner: SmoothFn1D, shift: f64 },
    /// `sum c_i f_i`
    Combine { parts: Vec<(f64, SmoothFn1D)> },
    /// `outer(inner(t))`
    Compose { outer: SmoothFn1D, inner: SmoothFn1D },
    /// `left` on `t <= at`, `right` beyond.
    Splice { left: SmoothFn1D, right: SmoothFn1D, at: f64 },
    /// `value0 + slope0 (t - t0) + int_{t0}^t (t - s) w(s) ds` by quadrature.
    DoubleIntegral {
        w: SmoothFn1D,
        t0: f64,
        value0: f64,
        slope0: f64,
    },
    /// Stored solution of the bend equation.
    Bend { system: BendSystem, trajectory: Trajectory<2> },
}

/// A real function on `[lo, hi]` evaluable with derivatives to order 3.
///
/// Cheap to clone; all values are immutable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothFn1D {
    lo: f64,
    hi: f64,
    node: Arc<Node>,
}

impl SmoothFn1D {
    fn wrap(lo: f64, hi: f64, node: Node) -> Self {
        Self {
            lo,
            hi,
            node: Arc::new(node),
        }
    }

    pub fn from_piecewise(f: PiecewiseFn) -> Self {
        let (lo, hi) = f.domain();
        Self::wrap(lo, hi, Node::Base { base: f, epsilon: 0.0 })
    }

    pub fn from_piece(lo: f64, hi: f64, piece: Piece) -> Result<Self> {
        Ok(Self::from_piecewise(PiecewiseFn::single(lo, hi, piece)?))
    }

    pub fn identity(lo: f64, hi: f64) -> Self {
        Self::from_piece(lo, hi, Piece::affine(0.0, 0.0, 1.0)).expect("valid interval")
    }

    pub fn constant(lo: f64, hi: f64, c: f64) -> Self {
        Self::from_piece(lo, hi, Piece::constant(c)).expect("valid interval")
    }

    pub fn sin(lo: f64, hi: f64) -> Self {
        Self::from_piece(lo, hi, Piece::sin()).expect("valid interval")
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Piecewise data and mollification radius, when this is a leaf.
    pub fn as_base(&self) -> Option<(&PiecewiseFn, f64)> {
        match &*self.node {
            Node::Base { base, epsilon } => Some((base, *epsilon)),
            _ => None,
        }
    }

    /// The same function on a sub-interval (or an extension, for functions
    /// whose formulas extend).
    pub fn with_domain(&self, lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            node: self.node.clone(),
        }
    }

    /// Full jet without a domain check.
    pub fn jet(&self, t: f64) -> JetValue {
        match &*self.node {
            Node::Base { base, epsilon } => {
                if *epsilon > 0.0 {
                    mollify::convolve(base, *epsilon, t)
                } else {
                    base.jet(t)
                }
            }
            Node::Scale { inner, theta } => {
                let j = inner.jet(t / theta);
                JetValue {
                    value: theta * j.value,
                    d1: j.d1,
                    d2: j.d2 / theta,
                    d3: j.d3 / (theta * theta),
                    om1: j.om1,
                }
            }
            Node::Affine {
                inner,
                mul,
                add,
                slope,
                origin,
            } => {
                let j = inner.jet(t);
                JetValue {
                    value: mul * j.value + add + slope * (t - origin),
                    d1: mul * j.d1 + slope,
                    d2: mul * j.d2,
                    d3: mul * j.d3,
                    om1: (1.0 - mul - slope) + mul * j.om1,
                }
            }
            Node::Shift { inner, shift } => inner.jet(t - shift),
            Node::Combine { parts } => {
                let mut out = JetValue {
                    value: 0.0,
                    d1: 0.0,
                    d2: 0.0,
                    d3: 0.0,
                    om1: 1.0,
                };
                for (c, f) in parts {
                    let j = f.jet(t);
                    out.value += c * j.value;
                    out.d1 += c * j.d1;
                    out.d2 += c * j.d2;
                    out.d3 += c * j.d3;
                    out.om1 += c * (j.om1 - 1.0);
                }
                out
            }
            Node::Compose { outer, inner } => {
                let h = inner.jet(t);
                let f = outer.jet(h.value);
                JetValue {
                    value: f.value,
                    d1: f.d1 * h.d1,
                    d2: f.d2 * h.d1 * h.d1 + f.d1 * h.d2,
                    d3: f.d3 * h.d1 * h.d1 * h.d1 + 3.0 * f.d2 * h.d1 * h.d2 + f.d1 * h.d3,
                    om1: h.om1 + h.d1 * f.om1,
                }
            }
            Node::Splice { left, right, at } => {
                if t <= *at {
                    left.jet(t)
                } else {
                    right.jet(t)
                }
            }
            Node::DoubleIntegral { w, t0, value0, slope0 } => {
                let wt = w.jet(t);
                let tol = 1e-14;
                let first = integrate_adaptive(*t0, t, tol, |s| w.jet(s).value);
                let moment = integrate_adaptive(*t0, t, tol, |s| (t - s) * w.jet(s).value);
                JetValue {
                    value: value0 + slope0 * (t - t0) + moment,
                    d1: slope0 + first,
                    d2: wt.value,
                    d3: wt.d1,
                    om1: (1.0 - slope0) - first,
                }
            }
            Node::Bend { system, trajectory } => system.jet(trajectory.state_at(system, t)),
        }
    }

    /// Value at `t` without a domain check.
    pub fn value(&self, t: f64) -> f64 {
        self.jet(t).value
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.lo.abs().max(self.hi.abs()));
        if !(t >= self.lo - slack && t <= self.hi + slack) {
            return Err(Error::Domain {
                t,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Value and derivatives up to `order` at `t`; higher entries are zero.
    pub fn eval_jet(&self, t: f64, order: usize) -> Result<JetValue> {
        self.check_domain(t)?;
        if order > 3 {
            return Err(Error::Smoothness { t, order });
        }
        let j = self.jet(t).truncate(order);
        if !j.is_finite() {
            return Err(Error::Smoothness { t, order });
        }
        Ok(j)
    }

    /// `f(t - shift)` on the shifted domain.
    pub fn shifted(&self, shift: f64) -> Self {
        Self::wrap(
            self.lo + shift,
            self.hi + shift,
            Node::Shift {
                inner: self.clone(),
                shift,
            },
        )
    }

    /// `mul * f + add + slope * (t - origin)`.
    pub fn affine(&self, mul: f64, add: f64, slope: f64, origin: f64) -> Self {
        Self::wrap(
            self.lo,
            self.hi,
            Node::Affine {
                inner: self.clone(),
                mul,
                add,
                slope,
                origin,
            },
        )
    }

    /// Linear combination on the intersection of domains.
    pub fn linear_combination(parts: Vec<(f64, SmoothFn1D)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Construction("empty combination".into()));
        }
        let lo = parts.iter().map(|p| p.1.lo).fold(f64::NEG_INFINITY, f64::max);
        let hi = parts.iter().map(|p| p.1.hi).fold(f64::INFINITY, f64::min);
        if lo >= hi {
            return Err(Error::Domain { t: lo, lo, hi });
        }
        Ok(Self::wrap(lo, hi, Node::Combine { parts }))
    }

    /// Unchecked composition `outer(inner(t))` on the domain of `inner`.
    pub fn compose(outer: &SmoothFn1D, inner: &SmoothFn1D) -> Self {
        Self::wrap(
            inner.lo,
            inner.hi,
            Node::Compose {
                outer: outer.clone(),
                inner: inner.clone(),
            },
        )
    }

    /// `left` up to `at`, then `right`.
    pub fn splice(left: &SmoothFn1D, right: &SmoothFn1D, at: f64) -> Self {
        Self::wrap(
            left.lo,
            right.hi,
            Node::Splice {
                left: left.clone(),
                right: right.clone(),
                at,
            },
        )
    }

    /// This function followed by the constant `f(hi)` up to `new_hi`.
    pub fn extend_constant(&self, new_hi: f64) -> Self {
        if new_hi <= self.hi {
            return self.clone();
        }
        let c = Self::constant(self.hi, new_hi, self.value(self.hi));
        Self::splice(self, &c, self.hi)
    }

    pub fn bend_solution(system: BendSystem, trajectory: Trajectory<2>) -> Self {
        let (a, b) = (trajectory.t_start(), trajectory.t_end());
        Self::wrap(a.min(b), a.max(b), Node::Bend { system, trajectory })
    }

    /// Samples of `(t, jet)` on a uniform grid of `n` points.
    pub fn sample(&self, n: usize) -> Vec<(f64, JetValue)> {
        crate::numerics::linspace(self.lo, self.hi, n)
            .into_iter()
            .map(|t| (t, self.jet(t)))
            .collect()
    }
}

/// See [`SmoothFn1D::eval_jet`].
pub fn eval_jet(f: &SmoothFn1D, t: f64, order: usize) -> Result<JetValue> {
    f.eval_jet(t, order)
}

/// Convolve piecewise data with the bump scaled to support `(-eps/4, eps/4)`.
pub fn mollify(f: &PiecewiseFn, eps: f64) -> Result<SmoothFn1D> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("mollification radius must be positive, got {eps}")));
    }
    let shortest = f.shortest_piece();
    if eps >= 0.5 * shortest {
        return Err(Error::MollifierTooWide { eps, piece: shortest });
    }
    let (lo, hi) = f.domain();
    Ok(SmoothFn1D::wrap(
        lo,
        hi,
        Node::Base {
            base: f.clone(),
            epsilon: eps,
        },
    ))
}

/// The function `u` with `u'' = w`, `u(t0) = value0`, `u'(t0) = slope0`.
pub fn integrate_twice(w: &SmoothFn1D, t0: f64, value0: f64, slope0: f64) -> Result<SmoothFn1D> {
    w.check_domain(t0)?;
    if let Some((base, eps)) = w.as_base() {
        if let Some(twice) = base.integrate_twice(t0, value0, slope0) {
            if eps == 0.0 {
                return Ok(SmoothFn1D::from_piecewise(twice).with_domain(w.lo, w.hi));
            }
            // Convolution commutes with integration; the double integral is
            // C^1 so no jump terms appear, and an affine term fixes the data.
            let smooth = mollify(&twice, eps)?;
            let j = smooth.jet(t0);
            return Ok(smooth
                .affine(1.0, value0 - j.value, slope0 - j.d1, t0)
                .with_domain(w.lo, w.hi));
        }
    }
    Ok(SmoothFn1D::wrap(
        w.lo,
        w.hi,
        Node::DoubleIntegral {
            w: w.clone(),
            t0,
            value0,
            slope0,
        },
    ))
}

/// `theta * f(t / theta)` on the scaled domain.
pub fn scale_warp(f: &SmoothFn1D, theta: f64) -> Result<SmoothFn1D> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Parameter(format!("scale must be positive, got {theta}")));
    }
    Ok(SmoothFn1D::wrap(
        f.lo * theta,
        f.hi * theta,
        Node::Scale {
            inner: f.clone(),
            theta,
        },
    ))
}

/// `(1 - lambda) f0 + lambda f1` on a common domain.
pub fn convex_combine(f0: &SmoothFn1D, f1: &SmoothFn1D, lambda: f64) -> Result<SmoothFn1D> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let scale = 1.0 + f0.lo.abs().max(f0.hi.abs());
    if (f0.lo - f1.lo).abs() > 1e-12 * scale || (f0.hi - f1.hi).abs() > 1e-12 * scale {
        return Err(Error::Domain {
            t: f1.hi,
            lo: f0.lo,
            hi: f0.hi,
        });
    }
    SmoothFn1D::linear_combination(vec![(1.0 - lambda, f0.clone()), (lambda, f1.clone())])
}

/// `f o h` on `[0, s]`, after checking the conditions under which the glued
/// warping data stays smooth at `s`.
pub fn compose_warp(f: &SmoothFn1D, h: &SmoothFn1D, s: f64, mode: GlueMode) -> Result<SmoothFn1D> {
    if !(s > 0.0) {
        return Err(Error::Parameter(format!("gluing point must be positive, got {s}")));
    }
    h.check_domain(0.0)?;
    h.check_domain(s)?;
    let r = f.hi;
    let scale = 1.0 + r.abs();
    let h0 = h.jet(0.0);
    if h0.value.abs() > 1e-10 * scale || h0.om1.abs() > 1e-9 {
        return Err(Error::Gluing(format!(
            "reparametrisation must start as the identity (h(0) = {}, h'(0) = {})",
            h0.value, h0.d1
        )));
    }
    for t in crate::numerics::linspace(0.0, s, 401) {
        let d1 = h.jet(t).d1;
        if !(-1e-12..=1.0 + 1e-12).contains(&d1) {
            return Err(Error::Gluing(format!("h'({t}) = {d1} outside [0, 1]")));
        }
    }
    let hs = h.jet(s);
    if (hs.value - r).abs() > 1e-9 * scale {
        return Err(Error::Gluing(format!("h(S) = {} but the outer domain ends at {r}", hs.value)));
    }
    let fr = f.jet(r);
    match mode {
        GlueMode::FlatF => {
            if fr.d1.abs().max(fr.d2.abs()).max(fr.d3.abs()) > FLATNESS {
                return Err(Error::Gluing(format!(
                    "outer function is not flat at its endpoint (f' = {}, f'' = {})",
                    fr.d1, fr.d2
                )));
            }
        }
        GlueMode::UnitSlopeH => {
            if hs.om1.abs().max(hs.d2.abs()).max(hs.d3.abs()) > FLATNESS {
                return Err(Error::Gluing(format!(
                    "reparametrisation does not have unit slope at S (h'(S) = {}, h''(S) = {})",
                    hs.d1, hs.d2
                )));
            }
        }
    }
    let composed = SmoothFn1D::compose(f, &h.with_domain(0.0, s));
    let c = composed.jet(s);
    let fs = f.jet(r);
    for (order, (a, b)) in [(c.value, fs.value), (c.d1, fs.d1), (c.d2, fs.d2), (c.d3, fs.d3)]
        .into_iter()
        .enumerate()
    {
        if (a - b).abs() > GLUE_JET * (1.0 + b.abs()) {
            return Err(Error::Gluing(format!(
                "derivative {order} of the composition at S is {a}, the translated outer jet is {b}"
            )));
        }
    }
    Ok(composed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink(c: f64) -> PiecewiseFn {
        make_piecewise(
            vec![c - 1.0, c, c + 1.0],
            vec![Piece::affine(c, 0.0, -1.0), Piece::affine(c, 0.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn polynomial_jet() {
        let f = SmoothFn1D::from_piece(0.0, 3.0, Piece::poly(0.0, vec![0.0, 0.0, 1.0])).unwrap();
        let j = f.eval_jet(2.0, 2).unwrap();
        assert_eq!((j.value, j.d1, j.d2, j.d3), (4.0, 4.0, 2.0, 0.0));
    }

    #[test]
    fn sine_jet_at_zero() {
        let j = SmoothFn1D::sin(0.0, 3.0).eval_jet(0.0, 3).unwrap();
        assert_eq!((j.value, j.d1, j.d2, j.d3), (0.0, 1.0, 0.0, -1.0));
    }

    #[test]
    fn domain_and_order_errors() {
        let f = SmoothFn1D::sin(0.0, 1.0);
        assert!(matches!(f.eval_jet(1.5, 0), Err(Error::Domain { .. })));
        assert!(matches!(f.eval_jet(0.5, 4), Err(Error::Smoothness { .. })));
    }

    #[test]
    fn smoothing_a_kink() {
        let eps = 0.2;
        let f = mollify(&kink(0.3), eps).unwrap();
        assert!(f.value(0.3) > 0.0);
        for &t in &[-0.6, 0.2 - 1e-3, 0.4 + 1e-3, 1.2] {
            assert!((f.value(t) - (t - 0.3f64).abs()).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn mollify_rejects_wide_radius() {
        assert!(matches!(mollify(&kink(0.0), 1.5), Err(Error::MollifierTooWide { .. })));
    }

    #[test]
    fn derivative_of_kink_is_convolved_sign() {
        let eps = 0.4;
        let base = kink(0.0);
        let f = mollify(&base, eps).unwrap();
        for &t in &[-0.09, -0.03, 0.0, 0.05] {
            let d1 = f.jet(t).d1;
            let reference = reference_convolution(|x| base.jet(x).d1, eps, t, &[0.0]);
            assert!((d1 - reference).abs() < 1e-10, "{d1} vs {reference}");
            let d2 = f.jet(t).d2;
            let r2 = 2.0 * scaled_bump(t, eps)[0];
            assert!((d2 - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_and_quadratic_from_double_integration() {
        let zero = SmoothFn1D::constant(-1.0, 2.0, 0.0);
        let id = integrate_twice(&zero, 0.0, 0.0, 1.0).unwrap();
        for t in [-1.0, 0.0, 0.7, 2.0] {
            assert!((id.value(t) - t).abs() < 1e-15);
        }
        let c = SmoothFn1D::constant(-1.0, 2.0, 3.0);
        let q = integrate_twice(&c, 0.5, 1.0, -2.0).unwrap();
        for t in [-1.0, 0.0, 0.7, 2.0] {
            let x: f64 = t - 0.5;
            assert!((q.value(t) - (1.0 - 2.0 * x + 1.5 * x * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_fallback_double_integral() {
        let w = SmoothFn1D::from_piece(0.5, 2.0, Piece::new(vec![Term::XLog { amp: 1.0, origin: 0.0 }])).unwrap();
        let u = integrate_twice(&w, 1.0, 0.0, 0.0).unwrap();
        // u'' = t ln t - t; check by differences of u'.
        let h = 1e-5;
        let t = 1.6;
        let d2 = (u.jet(t + h).d1 - u.jet(t - h).d1) / (2.0 * h);
        assert!((d2 - (t * t.ln() - t)).abs() < 1e-8);
    }

    #[test]
    fn scale_warp_examples() {
        let s = SmoothFn1D::sin(0.0, 4.0);
        let f = scale_warp(&s, 2.0).unwrap();
        assert!((f.value(1.0) - 2.0 * 0.5f64.sin()).abs() < 1e-15);
        assert_eq!(f.jet(0.0).d1, 1.0);
        let g = scale_warp(&s, 1.0).unwrap();
        assert_eq!(g.value(1.3), s.value(1.3));
        assert!(scale_warp(&s, 0.0).is_err());
    }

    #[test]
    fn convex_combination() {
        let s = SmoothFn1D::sin(0.0, 1.0);
        let id = SmoothFn1D::identity(0.0, 1.0);
        let c = convex_combine(&s, &id, 0.5).unwrap();
        for t in crate::numerics::linspace(0.0, 1.0, 20) {
            assert!((c.value(t) - 0.5 * (t.sin() + t)).abs() < 1e-15);
        }
        assert!(convex_combine(&s, &SmoothFn1D::identity(0.0, 2.0), 0.5).is_err());
    }

    #[test]
    fn compose_with_identity_and_mismatched_slope() {
        let f = SmoothFn1D::from_piece(0.0, 1.0, Piece::poly(0.0, vec![0.0, 1.0, -0.25])).unwrap();
        let id = SmoothFn1D::identity(0.0, 1.0);
        let g = compose_warp(&f, &id, 1.0, GlueMode::UnitSlopeH).unwrap();
        assert_eq!(g.value(0.4), f.value(0.4));
        // h with h(2) = 1 and h'(2) = 1/2
        let h = SmoothFn1D::from_piece(0.0, 2.0, Piece::poly(0.0, vec![0.0, 1.0, -0.125])).unwrap();
        assert!(matches!(
            compose_warp(&f, &h, 2.0, GlueMode::UnitSlopeH),
            Err(Error::Gluing(_))
        ));
        assert!(matches!(compose_warp(&f, &h, 2.0, GlueMode::FlatF), Err(Error::Gluing(_))));
    }

    #[test]
    fn serialises_leaf_as_breakpoints_pieces_epsilon() {
        let f = mollify(&kink(0.0), 0.1).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        let node = &v["node"];
        assert!(node["breakpoints"].is_array());
        assert!(node["pieces"].is_array());
        assert_eq!(node["epsilon"], 0.1);
        let back: SmoothFn1D = serde_json::from_value(v).unwrap();
        assert_eq!(back.value(0.01), f.value(0.01));
    }
}
