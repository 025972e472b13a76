//! The flattening homotopy at the level of warping functions.
//!
//! The disc `D^n` enters only through the radius `x = |x|`. Every member is
//! `f_x o H` for a reparametrisation `H` assembled from sloping and bending
//! functions, followed for `lambda >= 2/3` by a collar stretch.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::families::{bending_family, sloping_family, BendingFamily, SlopingFamily};
use super::PSCBounds;
use crate::curvature::{sigma_warp, WarpSpec};
use crate::fncore::{make_piecewise, mollify, Piece, SmoothFn1D};
use crate::numerics::{brent, linspace};
use crate::report::CurvatureReport;
use crate::tolerances::{CLAUSE_SLACK, FLATNESS};
use crate::torpedo::{build_torpedo, DEFAULT_EPS};
use crate::{Error, Result};

type FamilyFn = dyn Fn(f64) -> Result<SmoothFn1D> + Send + Sync;

/// Warping functions `f_x` on `[0, R]` indexed by the radius `x in [0, 1]`.
#[derive(Clone)]
pub struct WarpFamily {
    pub name: String,
    pub k: usize,
    /// Right end `R` of every member's domain.
    pub r_end: f64,
    /// Smallest length scale on which members have structure; the
    /// curvature expansion at the origin is used only well below it.
    pub feature: f64,
    f: Arc<FamilyFn>,
}

impl fmt::Debug for WarpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpFamily")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("r_end", &self.r_end)
            .field("feature", &self.feature)
            .finish_non_exhaustive()
    }
}

impl WarpFamily {
    pub fn new<F>(name: impl Into<String>, k: usize, r_end: f64, f: F) -> Self
    where
        F: Fn(f64) -> Result<SmoothFn1D> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            k,
            r_end,
            feature: r_end,
            f: Arc::new(f),
        }
    }

    pub fn with_feature(mut self, feature: f64) -> Self {
        self.feature = feature.min(self.r_end);
        self
    }

    /// `f_x` restricted to `[0, R]`.
    pub fn at(&self, x: f64) -> Result<SmoothFn1D> {
        Ok((self.f)(x.clamp(0.0, 1.0))?.with_domain(0.0, self.r_end))
    }

    /// Switch radius for the expansion at the origin, for members scaled
    /// down by at most `theta`.
    pub fn t_switch(&self, theta: f64) -> f64 {
        (1e-3 * self.r_end).min(0.01 * self.feature) * theta
    }
}

/// Input families used by the tests and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// `f_x = h_delta` for every `x`.
    AllTorpedo,
    /// For `x < 1/2`, `h_delta` blended toward the torpedo of radius
    /// `1.25 delta`; `h_delta` from `x = 1/2` on.
    Blended,
}

impl Fixture {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "all_torpedo" | "all-torpedo" | "torpedo" => Some(Self::AllTorpedo),
            "blended" => Some(Self::Blended),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AllTorpedo => "all_torpedo",
            Self::Blended => "blended",
        }
    }
}

/// Widening factor of the second profile in [`Fixture::Blended`].
pub const BLEND_WIDTH: f64 = 1.25;

/// Largest blend weight, reached at `x = 0`.
pub const BLEND_WEIGHT: f64 = 0.8;

/// A fixture family on `[0, delta pi]` with default bounds
/// `B'' = 7/12` and `B' = 1/24` of `(k-1)(k-2)/delta^2`, `A = 0`.
pub fn fixture_family(fixture: Fixture, k: usize, delta: f64) -> Result<(WarpFamily, PSCBounds)> {
    let level = (k as f64 - 1.0) * (k as f64 - 2.0) / (delta * delta);
    let bounds = PSCBounds::new(0.0, level / 24.0, 7.0 * level / 12.0, k, delta)?;
    let base = build_torpedo(delta, DEFAULT_EPS)?;
    let r_end = base.r_bar();
    let h = base.f.clone();
    let fam = match fixture {
        Fixture::AllTorpedo => WarpFamily::new(fixture.name(), k, r_end, move |_| Ok(h.clone())),
        Fixture::Blended => {
            let wide = build_torpedo(BLEND_WIDTH * delta, DEFAULT_EPS)?.f.with_domain(0.0, r_end);
            WarpFamily::new(fixture.name(), k, r_end, move |x| {
                let w = BLEND_WEIGHT * (1.0 - 2.0 * x).max(0.0);
                if w == 0.0 {
                    Ok(h.clone())
                } else {
                    SmoothFn1D::linear_combination(vec![(1.0 - w, h.clone()), (w, wide.clone())])
                }
            })
        }
    };
    Ok((fam, bounds))
}

/// Constants chosen before the homotopy is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenConstants {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub eta: f64,
}

/// The homotopy `(lambda, x) -> f_{lambda, x}`.
#[derive(Debug, Clone)]
pub struct FlattenHomotopy {
    pub bounds: PSCBounds,
    pub family: WarpFamily,
    pub constants: FlattenConstants,
    pub sloping: SlopingFamily,
    pub bending: BendingFamily,
}

/// One member: the warping function and the reparametrisation behind it.
#[derive(Debug, Clone)]
pub struct FlattenMember {
    pub lambda: f64,
    pub x: f64,
    /// Warping function on `[0, end]`.
    pub f: SmoothFn1D,
    /// Gluing radius; `f` is `f_x o h` on `[0, glue]`.
    pub glue: f64,
    /// Total reparametrisation on `[0, glue]`.
    pub h: SmoothFn1D,
    /// Collar centre `tau(x)`.
    pub tau: f64,
    /// Start of the pulled region `max(0, 6Rx - 5R)`.
    pub pull: f64,
}

/// Points per grid dimension used when the constants are chosen.
const SELECTION_X: usize = 21;
const SELECTION_T: usize = 401;

fn selection_sigma(family: &WarpFamily, k: usize, x: f64, grid: &[f64]) -> Result<f64> {
    let w = WarpSpec::with_switch(k, family.at(x)?, 0.0, family.t_switch(1.0))?;
    let mut m = f64::INFINITY;
    for &t in grid {
        m = m.min(sigma_warp(&w, t)?);
    }
    Ok(m)
}

/// Choose the constants and build the sloping and bending families.
pub fn flatten_homotopy(family: &WarpFamily, bounds: &PSCBounds) -> Result<FlattenHomotopy> {
    let b = *bounds;
    let k = b.k;
    let km1 = k as f64 - 1.0;
    let r_end = family.r_end;
    if family.k != k {
        return Err(Error::Parameter(format!("family has k = {}, bounds have k = {k}", family.k)));
    }
    let xs = linspace(0.0, 1.0, SELECTION_X);
    let ts = linspace(0.0, r_end, SELECTION_T);

    let mut min_sigma = f64::INFINITY;
    for &x in &xs {
        min_sigma = min_sigma.min(selection_sigma(family, k, x, &ts)?);
    }
    if !(min_sigma >= b.bpp) {
        return Err(Error::infeasible("sigma(f_x) >= B''", format!("minimum {min_sigma} below B'' = {}", b.bpp)));
    }
    let h1 = family.at(1.0)?;
    let h_half = family.at(0.5)?;
    for &t in &ts {
        let d = (h1.jet(t).value - h_half.jet(t).value).abs();
        if d > 1e-12 {
            return Err(Error::infeasible("f_x = h_delta for x >= 1/2", format!("differs by {d} at t = {t}")));
        }
    }

    // S: the largest grid radius below which every member is concave with
    // slope in [0, 1], capped by B'' S^2 <= (k-1)(k-2) and S <= delta.
    let cap = (b.km() / b.bpp).sqrt().min(b.delta);
    let mut shape_end = r_end;
    for &x in &xs {
        let f = family.at(x)?;
        for &t in &ts {
            let j = f.jet(t);
            let ok = j.d1 >= -CLAUSE_SLACK && j.om1 >= -CLAUSE_SLACK && j.d2 <= CLAUSE_SLACK;
            if !ok {
                shape_end = shape_end.min(t);
                break;
            }
        }
    }
    let s = ts
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= cap && t < shape_end && t < r_end)
        .fold(0.0, f64::max);
    if !(s > 0.0) {
        return Err(Error::infeasible("S > 0", format!("shape holds up to {shape_end}, cap {cap}")));
    }

    let mut f_min = f64::INFINITY;
    for &x in &xs {
        f_min = f_min.min(family.at(x)?.value(0.8 * s));
    }
    let p = (b.bpp - b.bp) * f_min / (2.0 * km1);
    let q = s * p / 10.0;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::infeasible("0 < q < 1", format!("q = {q}")));
    }
    let rhs = b.km() * (1.0 - (1.0 - q) * (1.0 - q));
    let t_cap = if b.bp > 0.0 { (0.5 * rhs / b.bp).sqrt() } else { f64::INFINITY };
    let t = (0.8 * s).min(t_cap);
    let c = (rhs - b.bp * t * t) / (2.0 * km1);
    if !(c > 0.0) {
        return Err(Error::infeasible("B' T^2 + 2(k-1) C <= (k-1)(k-2)(1-(1-q)^2)", format!("C = {c}")));
    }
    let bending = bending_family(c, t)?;
    let alpha = bending.alpha;
    let sloping = sloping_family(alpha, s, p)?;
    let eta = (0.5 * (b.bpp - b.bp) * b.delta / km1 / p.max(c / (2.0 * alpha))).min(0.5);
    if !(eta > 0.0) {
        return Err(Error::infeasible("eta max(p, C/(2 alpha)) <= (B''-B') delta/(2(k-1))", format!("eta = {eta}")));
    }
    Ok(FlattenHomotopy {
        bounds: b,
        family: family.clone(),
        constants: FlattenConstants {
            s,
            f: f_min,
            p,
            q,
            t,
            c,
            alpha,
            eta,
        },
        sloping,
        bending,
    })
}

fn first_crossing(h: &SmoothFn1D, level: f64, lo: f64, mut hi: f64) -> Result<f64> {
    let mut grow = 0;
    while h.value(hi) < level {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Solver(format!("reparametrisation never reaches {level}")));
        }
    }
    brent(lo, hi, 1e-15, |t| h.value(t) - level)
}

impl FlattenHomotopy {
    /// Damping parameter `r(x)`: 1 up to `x = 2/3`, `eta` from `x = 5/6`.
    pub fn damping(&self, x: f64) -> f64 {
        let eta = self.constants.eta;
        if x <= 2.0 / 3.0 {
            1.0
        } else if x >= 5.0 / 6.0 {
            eta
        } else {
            6.0 * (eta - 1.0) * x + 5.0 - 4.0 * eta
        }
    }

    /// `max(0, 6Rx - 5R)`.
    pub fn pull(&self, x: f64) -> f64 {
        let r = self.family.r_end;
        (6.0 * r * x - 5.0 * r).max(0.0)
    }

    /// Collar centre: `alpha` plus the pull.
    pub fn tau(&self, x: f64) -> f64 {
        self.constants.alpha + self.pull(x)
    }

    /// Unpulled reparametrisation for `lambda <= 2/3`.
    fn base_reparam(&self, lambda: f64, r: f64) -> Result<SmoothFn1D> {
        if lambda <= 1.0 / 3.0 {
            return Ok(self.sloping.member(r, 3.0 * lambda)?.u);
        }
        let u = self.sloping.member(r, 1.0)?.u;
        let v = self.bending.member(r, (3.0 * lambda - 1.0).min(1.0))?.v;
        Ok(SmoothFn1D::compose(&u, &v))
    }

    /// `H_{lambda, x}` on `[0, glue]` with `H(glue) = R`, for `lambda <= 2/3`.
    fn reparam(&self, lambda: f64, x: f64) -> Result<(SmoothFn1D, f64)> {
        let r_end = self.family.r_end;
        let sigma = self.pull(x);
        if sigma >= r_end {
            return Ok((SmoothFn1D::identity(0.0, r_end), r_end));
        }
        let base = self.base_reparam(lambda, self.damping(x))?;
        let h = if sigma > 0.0 {
            let right = base.shifted(sigma).affine(1.0, sigma, 0.0, 0.0);
            SmoothFn1D::splice(&SmoothFn1D::identity(0.0, sigma), &right, sigma)
        } else {
            base
        };
        let glue = first_crossing(&h, r_end, 0.0, r_end)?;
        Ok((h.with_domain(0.0, glue), glue))
    }

    /// Mollified `min(t, tau)`, equal to the identity below `tau - alpha/8`
    /// and to `tau` above `tau + alpha/8`.
    fn cutoff(&self, tau: f64) -> Result<SmoothFn1D> {
        let reach = self.constants.alpha / 8.0;
        let big = tau + 4.0 * self.family.r_end;
        let ramp = make_piecewise(
            vec![-1.0, tau, big],
            vec![Piece::affine(0.0, 0.0, 1.0), Piece::constant(tau)],
        )?;
        Ok(mollify(&ramp, 4.0 * reach)?.with_domain(0.0, big))
    }

    /// The member at `(lambda, x)`.
    pub fn member(&self, lambda: f64, x: f64) -> Result<FlattenMember> {
        if !((0.0..=1.0).contains(&lambda) && (0.0..=1.0).contains(&x)) {
            return Err(Error::Parameter(format!("(lambda, x) = ({lambda}, {x}) outside [0, 1]^2")));
        }
        let fx = self.family.at(x)?;
        let (h, glue) = self.reparam(lambda.min(2.0 / 3.0), x)?;
        let base = SmoothFn1D::compose(&fx, &h);
        let tau = self.tau(x);
        if lambda <= 2.0 / 3.0 {
            return Ok(FlattenMember {
                lambda,
                x,
                f: base,
                glue,
                h,
                tau,
                pull: self.pull(x),
            });
        }
        let mu = (6.0 * lambda - 4.0).min(1.0);
        let nu = (6.0 * lambda - 5.0).max(0.0);
        let stretch = self.cutoff(tau)?.affine(mu, 0.0, 1.0 - mu, 0.0);
        let a = tau + nu * (self.family.r_end - tau);
        let left = SmoothFn1D::compose(&base, &stretch.with_domain(0.0, a));
        let ha = stretch.value(a);
        let tail = base.shifted(a - ha).with_domain(a, a + glue - ha);
        let f = if glue - ha > 0.0 {
            SmoothFn1D::splice(&left, &tail, a)
        } else {
            left
        };
        let total = SmoothFn1D::compose(&h, &stretch.with_domain(0.0, a));
        Ok(FlattenMember {
            lambda,
            x,
            f,
            glue: a,
            h: total,
            tau,
            pull: self.pull(x),
        })
    }

    /// `sigma` of a member as a warped metric, with the switch to the
    /// expansion at the origin placed well below `alpha`.
    pub fn warp_spec(&self, m: &FlattenMember) -> Result<WarpSpec> {
        let hi = m.f.domain().1;
        let ts = (1e-3 * hi).min(0.01 * self.constants.alpha);
        WarpSpec::with_switch(self.bounds.k, m.f.clone(), self.bounds.a, ts)
    }

    /// The end of the homotopy as a family on `[0, R]`, reparametrised by
    /// `x -> min(1, 2x)` so that every member with `x >= 1/2` is the
    /// untouched boundary member.
    pub fn flattened_family(&self) -> WarpFamily {
        let hom = self.clone();
        let r_end = self.family.r_end;
        WarpFamily::new(format!("{}_flattened", self.family.name), self.bounds.k, r_end, move |x| {
            Ok(hom.member(1.0, (2.0 * x).min(1.0))?.f.with_domain(0.0, r_end))
        })
        .with_feature(self.constants.alpha)
    }

    /// Radii at which a member is sampled: uniform, geometric from the
    /// origin, and geometric from the start of the pulled region.
    pub fn sample_radii(&self, m: &FlattenMember, n: usize) -> Vec<f64> {
        let hi = m.f.domain().1;
        let lo = self.constants.alpha / 8.0;
        let quarter = (n / 4).max(2);
        let mut g = linspace(0.0, hi, n.saturating_sub(2 * quarter).max(2));
        let geo = |a: f64, b: f64| -> Vec<f64> { linspace(a.ln(), b.ln(), quarter).into_iter().map(f64::exp).collect() };
        if hi > lo {
            g.extend(geo(lo, hi));
        }
        let pull = m.pull;
        if pull > 0.0 && hi - pull > lo {
            g.extend(geo(lo, hi - pull).into_iter().map(|t| t + pull));
        } else if m.glue > lo {
            g.extend(geo(lo, m.glue));
        }
        g.retain(|t| *t >= 0.0 && *t <= hi);
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}

/// Grid sizes `(lambda, x, t)` for [`verify_flatten`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenGrid {
    pub lambdas: usize,
    pub xs: usize,
    pub ts: usize,
}

impl Default for FlattenGrid {
    fn default() -> Self {
        Self {
            lambdas: 13,
            xs: 13,
            ts: 200,
        }
    }
}

/// Sample `A + sigma` over the grid against `A + B'`, with the endpoint
/// conditions: flat near `R` and concave with values in `[0, delta]` at
/// `lambda = 1`, and the `x = 1` slice unchanged on `[0, R]`.
pub fn verify_flatten(hom: &FlattenHomotopy, grid: FlattenGrid) -> Result<CurvatureReport> {
    let b = hom.bounds;
    let r_end = hom.family.r_end;
    let lambdas = linspace(0.0, 1.0, grid.lambdas.max(2));
    let xs = linspace(0.0, 1.0, grid.xs.max(2));
    let cells: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| xs.iter().map(move |&x| (l, x))).collect();

    struct Cell {
        samples: Vec<(f64, f64, f64, f64)>,
        flat: f64,
        concave: f64,
        bounded: f64,
        unchanged: f64,
    }

    let original = hom.family.at(1.0)?;
    let cells: Vec<Cell> = cells
        .par_iter()
        .map(|&(lambda, x)| -> Result<Cell> {
            let m = hom.member(lambda, x)?;
            let w = hom.warp_spec(&m)?;
            let radii = hom.sample_radii(&m, grid.ts);
            let mut samples = Vec::with_capacity(radii.len());
            for &t in &radii {
                samples.push((lambda, x, t, b.a + sigma_warp(&w, t)?));
            }
            let mut cell = Cell {
                samples,
                flat: f64::INFINITY,
                concave: f64::INFINITY,
                bounded: f64::INFINITY,
                unchanged: f64::INFINITY,
            };
            if lambda == 1.0 {
                for i in 0..=10 {
                    let t = r_end * (1.0 - 1e-3 * i as f64);
                    cell.flat = cell.flat.min(FLATNESS - m.f.jet(t).d1.abs());
                }
                for &t in radii.iter().filter(|t| **t <= r_end) {
                    let j = m.f.jet(t);
                    cell.concave = cell.concave.min(CLAUSE_SLACK - j.d2);
                    cell.bounded = cell.bounded.min(j.value + CLAUSE_SLACK).min(b.delta - j.value + CLAUSE_SLACK);
                }
            }
            if x == 1.0 {
                for t in linspace(0.0, r_end, 201) {
                    let (a, o) = (m.f.jet(t), original.jet(t));
                    let d = (a.value - o.value).abs().max((a.d1 - o.d1).abs());
                    cell.unchanged = cell.unchanged.min(FLATNESS - d);
                }
            }
            Ok(cell)
        })
        .collect::<Result<_>>()?;

    let mut rep = CurvatureReport::new("flatten", b.a + b.bp);
    let (mut flat, mut concave, mut bounded, mut unchanged) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for c in cells {
        for (l, x, t, v) in c.samples {
            rep.push(&[("lambda", l), ("x", x), ("t", t)], v);
        }
        flat = flat.min(c.flat);
        concave = concave.min(c.concave);
        bounded = bounded.min(c.bounded);
        unchanged = unchanged.min(c.unchanged);
    }
    rep.condition("endpoint_flat_near_R", flat);
    rep.condition("endpoint_concave", concave);
    rep.condition("endpoint_within_0_delta", bounded);
    rep.condition("boundary_slice_unchanged", unchanged);
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_members() {
        let (fam, b) = fixture_family(Fixture::Blended, 5, 1.0).unwrap();
        assert_eq!((b.bp, b.bpp), (0.5, 7.0));
        let ts = linspace(0.0, fam.r_end, 201);
        for x in [0.0, 0.25, 0.5] {
            assert!(selection_sigma(&fam, 5, x, &ts).unwrap() >= b.bpp);
        }
        assert!((fam.at(0.0).unwrap().value(3.0) - (0.2 + 0.8 * 1.25)).abs() < 1e-12);
        assert_eq!(Fixture::parse("all-torpedo"), Some(Fixture::AllTorpedo));
    }

    #[test]
    fn constants_follow_the_selection_chain() {
        let (fam, b) = fixture_family(Fixture::AllTorpedo, 5, 1.0).unwrap();
        let hom = flatten_homotopy(&fam, &b).unwrap();
        let c = &hom.constants;
        assert!(c.s <= 1.0 && b.bpp * c.s * c.s <= b.km());
        assert!((c.q - c.s * c.p / 10.0).abs() < 1e-15);
        let lhs = b.bp * c.t * c.t + 2.0 * 4.0 * c.c;
        assert!(lhs <= b.km() * (1.0 - (1.0 - c.q).powi(2)) * (1.0 + 1e-12));
        assert!(c.eta * c.p.max(c.c / (2.0 * c.alpha)) <= (b.bpp - b.bp) * b.delta / 8.0 * (1.0 + 1e-12));
    }

    #[test]
    fn start_is_the_input_and_end_is_flat() {
        let (fam, b) = fixture_family(Fixture::AllTorpedo, 5, 1.0).unwrap();
        let hom = flatten_homotopy(&fam, &b).unwrap();
        for x in [0.0, 0.7, 0.9] {
            let m = hom.member(0.0, x).unwrap();
            for t in linspace(0.0, 3.0, 31) {
                assert!((m.f.value(t) - fam.at(x).unwrap().value(t)).abs() < 1e-12);
            }
            let end = hom.member(1.0, x).unwrap();
            assert!((end.glue - fam.r_end).abs() < 1e-12);
            assert!(end.f.jet(fam.r_end).d1.abs() < 1e-9);
        }
    }

    #[test]
    fn requires_the_curvature_floor() {
        let (fam, _) = fixture_family(Fixture::AllTorpedo, 5, 1.0).unwrap();
        let b = PSCBounds::new(0.0, 0.5, 11.99, 5, 1.0).unwrap();
        let fam2 = WarpFamily::new("wide", 5, fam.r_end, |_| Ok(build_torpedo(1.1, 0.05)?.f));
        match flatten_homotopy(&fam2, &b) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, "sigma(f_x) >= B''"),
            other => panic!("{other:?}"),
        }
    }
}
