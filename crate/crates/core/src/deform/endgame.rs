//! Matching a flattened family to the torpedo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flatten::WarpFamily;
use super::PSCBounds;
use crate::curvature::{sigma_from_jet, sigma_warp, WarpSpec};
use crate::fncore::{integrate_twice, make_piecewise, mollify, scale_warp, Piece, SmoothFn1D};
use crate::numerics::linspace;
use crate::report::CurvatureReport;
use crate::tolerances::{CLAUSE_SLACK, FLATNESS};
use crate::torpedo::{build_torpedo, DEFAULT_EPS};
use crate::{Error, Result};

/// Maximum number of times the collar length is doubled.
pub const COLLAR_DOUBLINGS: usize = 8;

/// Width of the bisection bracket for `theta(x)`.
pub const THETA_TOL: f64 = 1e-4;

/// Nodes on `[0, 1/2]` at which `theta` is bisected.
const THETA_NODES: usize = 11;

/// Blend weights checked by the `theta` predicate.
const THETA_MU: usize = 11;

const COLLAR_SAMPLES: usize = 401;

/// Transition `a_{p,q} = (1 - a) p + a q` on `[R, R_inf]`.
#[derive(Debug, Clone)]
pub struct CollarInterp {
    pub f: SmoothFn1D,
    pub r_inf: f64,
    /// Lower bound on `sigma` from the sup norms of `a'` and `a''`.
    pub estimate: f64,
    pub report: CurvatureReport,
}

/// `a` rising from 0 to 1 on `[r, r + len]` with `a'' = +-1/l^2` on two
/// halves of length `l = 0.4 len`, flat on the outer tenths. Returns the
/// profile and the sup norms of `a'` and `a''`.
fn transition_profile(r: f64, len: f64) -> Result<(SmoothFn1D, f64, f64)> {
    let m = 0.1 * len;
    let l = 0.5 * len - m;
    let acc = 1.0 / (l * l);
    let w = make_piecewise(
        vec![r - len, r + m, r + 0.5 * len, r + len - m, r + 2.0 * len],
        vec![
            Piece::constant(0.0),
            Piece::constant(acc),
            Piece::constant(-acc),
            Piece::constant(0.0),
        ],
    )?;
    let a = integrate_twice(&mollify(&w, m)?, r - len, 0.0, 0.0)?.with_domain(r, r + len);
    Ok((a, 1.0 / l, acc))
}

fn collar_estimate(p: f64, q: f64, beta: f64, b: &PSCBounds, d1: f64, d2: f64) -> f64 {
    let km1 = b.k as f64 - 1.0;
    let gap = (q - p).abs();
    b.torpedo_level() - b.km() * gap * gap * d1 * d1 / (beta * beta) - 2.0 * km1 * gap * d2 / beta
}

/// Shortest collar for which the estimate reaches `B'`, or infinity when
/// even an arbitrarily long collar cannot.
pub fn collar_length(p: f64, q: f64, beta: f64, bounds: &PSCBounds) -> f64 {
    let km1 = bounds.k as f64 - 1.0;
    let gap = (q - p).abs();
    let room = bounds.torpedo_level() - bounds.bp;
    if !(room > 0.0) {
        return f64::INFINITY;
    }
    let need = bounds.km() * gap * gap / (beta * beta) + 2.0 * km1 * gap / beta;
    // The profile's half-ramps have length 0.4 times the collar.
    (need / room).sqrt() / 0.4
}

/// Build `a_{p,q}` and double `R_inf - R` until the curvature estimate
/// reaches `B'`.
pub fn collar_interp(p: f64, q: f64, beta: f64, r: f64, r_inf: f64, bounds: &PSCBounds) -> Result<CollarInterp> {
    let b = bounds;
    let range = |v: f64| v >= beta - CLAUSE_SLACK && v <= b.delta + CLAUSE_SLACK;
    if !(beta > 0.0 && range(p) && range(q)) {
        return Err(Error::Parameter(format!(
            "need 0 < beta <= p, q <= delta, got beta = {beta}, p = {p}, q = {q}, delta = {}",
            b.delta
        )));
    }
    let mut rep = CurvatureReport::new("collar_interp", b.bp);
    if p == q {
        let hi = if r_inf > r { r_inf } else { r + 1.0 };
        let f = SmoothFn1D::constant(r, hi, p);
        let est = b.km() / (p * p);
        for t in linspace(r, hi, COLLAR_SAMPLES) {
            rep.push(&[("t", t)], sigma_from_jet(b.k, &f.jet(t)));
        }
        rep.condition("estimate", est - b.bp);
        return Ok(CollarInterp {
            f,
            r_inf: hi,
            estimate: est,
            report: rep.finish(),
        });
    }
    let mut len = r_inf - r;
    if !(len > 0.0) {
        return Err(Error::infeasible("R_inf > R", format!("R = {r}, R_inf = {r_inf}, p = {p} != q = {q}")));
    }
    let mut doublings = 0;
    let (a, est) = loop {
        let (a, d1, d2) = transition_profile(r, len)?;
        let est = collar_estimate(p, q, beta, b, d1, d2);
        if est >= b.bp {
            break (a, est);
        }
        if doublings == COLLAR_DOUBLINGS {
            return Err(Error::infeasible(
                "collar estimate >= B'",
                format!("estimate {est} < B' = {} at R_inf - R = {len}", b.bp),
            ));
        }
        len *= 2.0;
        doublings += 1;
    };
    let f = a.affine(q - p, p, 0.0, 0.0);
    for t in linspace(r, r + len, COLLAR_SAMPLES) {
        rep.push(&[("t", t)], sigma_from_jet(b.k, &f.jet(t)));
    }
    rep.condition("estimate", est - b.bp);
    Ok(CollarInterp {
        f,
        r_inf: r + len,
        estimate: est,
        report: rep.finish(),
    })
}

/// The deformation of a flattened family into `h_delta` on `[0, R]`.
#[derive(Debug, Clone)]
pub struct TorpedoMatch {
    pub bounds: PSCBounds,
    pub family: WarpFamily,
    pub eps: f64,
    /// `(x, theta)` at the bisection nodes, before the lower envelope.
    pub theta_nodes: Vec<(f64, f64)>,
    envelope: Vec<f64>,
    /// Minimum `sigma` over all sampled blends with `h_{delta_x}`.
    pub blend_floor: f64,
    pub beta: f64,
    pub r_inf: f64,
}

/// One member on `[0, R_inf]`.
#[derive(Debug, Clone)]
pub struct MatchMember {
    pub lambda: f64,
    pub x: f64,
    pub theta: f64,
    /// `f_x(R)`.
    pub delta_x: f64,
    /// The member on `[0, R]`.
    pub core: SmoothFn1D,
    /// The collar on `[R, R_inf]`.
    pub collar: SmoothFn1D,
}

impl MatchMember {
    pub fn full(&self) -> SmoothFn1D {
        SmoothFn1D::splice(&self.core, &self.collar, self.core.domain().1)
    }
}

/// Bounds for matching a family that satisfies `sigma >= B'` of `flat`:
/// the old `B'` becomes the new `B''`, and the new `B'` sits halfway down
/// to `B`.
pub fn match_bounds(flat: &PSCBounds) -> Result<PSCBounds> {
    PSCBounds::new(flat.a, 0.5 * (flat.b + flat.bp), flat.bp, flat.k, flat.delta)
}

fn radii(r: f64, lo: f64, n: usize) -> Vec<f64> {
    let mut g = linspace(0.0, r, n / 2 + 1);
    if lo < r {
        g.extend(linspace(lo.ln(), r.ln(), n / 2).into_iter().map(f64::exp));
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

struct Node {
    x: f64,
    f: SmoothFn1D,
    h: SmoothFn1D,
}

impl Node {
    fn new(family: &WarpFamily, x: f64, eps: f64) -> Result<Self> {
        let r = family.r_end;
        let f = family.at(x)?;
        let delta_x = f.value(r);
        let h = build_torpedo(delta_x, eps)?.f.extend_constant(r).with_domain(0.0, r);
        Ok(Self { x, f, h })
    }

    fn blend(&self, mu: f64) -> Result<SmoothFn1D> {
        SmoothFn1D::linear_combination(vec![(1.0 - mu, self.f.clone()), (mu, self.h.clone())])
    }
}

/// `theta * g(t / theta)` on `[0, r]`, with `g` continued by its value at `r`.
fn shrink(g: &SmoothFn1D, theta: f64, r: f64) -> Result<SmoothFn1D> {
    if theta == 1.0 {
        return Ok(g.with_domain(0.0, r));
    }
    Ok(scale_warp(&g.extend_constant(r / theta), theta)?.with_domain(0.0, r))
}

/// Minimum of `A + sigma` over blends of `f_x` and `h_{delta_x}`, each
/// shrunk by `theta`.
fn blend_min(family: &WarpFamily, b: &PSCBounds, node: &Node, theta: f64, ts: &[f64]) -> Result<f64> {
    let r = family.r_end;
    let mut m = f64::INFINITY;
    for mu in linspace(0.0, 1.0, THETA_MU) {
        let g = shrink(&node.blend(mu)?, theta, r)?;
        let w = WarpSpec::with_switch(b.k, g, b.a, family.t_switch(theta))?;
        for &t in ts {
            m = m.min(b.a + sigma_warp(&w, t)?);
        }
    }
    Ok(m)
}

/// Largest feasible `theta` found by bisection, where feasible means every
/// shrunk blend stays at or above `A + B''` on the grid.
fn bisect_theta(family: &WarpFamily, b: &PSCBounds, node: &Node, ts: &[f64]) -> Result<f64> {
    let target = b.a + b.bpp;
    let ok = |theta: f64| -> Result<bool> { Ok(blend_min(family, b, node, theta, ts)? >= target) };
    if ok(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    let mut tries = 0;
    while !ok(lo)? {
        hi = lo;
        lo *= 0.5;
        tries += 1;
        if tries > 20 {
            return Err(Error::infeasible("theta(x) bisection", format!("no feasible scale down to {lo} at x = {}", node.x)));
        }
    }
    while hi - lo > THETA_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Choose `theta(x)`, the collar width `beta` and the collar length.
pub fn torpedo_match_homotopy(family: &WarpFamily, bounds: &PSCBounds) -> Result<TorpedoMatch> {
    let b = *bounds;
    let r = family.r_end;
    let eps = DEFAULT_EPS;
    let xs = linspace(0.0, 0.5, THETA_NODES);
    let ts = radii(r, family.feature / 8.0, 200);

    let nodes: Vec<Node> = xs.iter().map(|&x| Node::new(family, x, eps)).collect::<Result<_>>()?;
    let floors: Vec<f64> = nodes
        .par_iter()
        .map(|n| blend_min(family, &b, n, 1.0, &ts))
        .collect::<Result<_>>()?;
    let blend_floor = floors.iter().copied().fold(f64::INFINITY, f64::min) - b.a;
    if !(blend_floor > 0.0) {
        return Err(Error::infeasible("sigma of blends > 0", format!("minimum {blend_floor}")));
    }
    let thetas: Vec<f64> = nodes
        .par_iter()
        .map(|n| bisect_theta(family, &b, n, &ts))
        .collect::<Result<_>>()?;
    let last = thetas.len() - 1;
    if thetas[last] != 1.0 {
        return Err(Error::infeasible("theta(x) = 1 for x >= 1/2", format!("bisection gave {}", thetas[last])));
    }
    let envelope: Vec<f64> = (0..thetas.len())
        .map(|i| {
            if i == last {
                1.0
            } else {
                thetas[i.saturating_sub(1)..=(i + 1)].iter().copied().fold(1.0, f64::min)
            }
        })
        .collect();

    let mut m = TorpedoMatch {
        bounds: b,
        family: family.clone(),
        eps,
        theta_nodes: xs.iter().copied().zip(thetas).collect(),
        envelope,
        blend_floor,
        beta: 0.0,
        r_inf: 2.0 * r,
    };
    let mut beta = b.delta;
    for x in linspace(0.0, 0.5, 4 * THETA_NODES) {
        beta = beta.min(m.theta(x) * family.at(x)?.value(r));
    }
    m.beta = beta;
    let len = collar_length(beta, b.delta, beta, &b).max(r) * 1.001;
    let worst = collar_interp(beta, b.delta, beta, r, r + len, &b)?;
    m.r_inf = worst.r_inf;
    Ok(m)
}

impl TorpedoMatch {
    /// `theta(x)`: linear interpolation of the lower envelope of the
    /// bisected values, and 1 from `x = 1/2` on.
    pub fn theta(&self, x: f64) -> f64 {
        if x >= 0.5 {
            return 1.0;
        }
        let n = self.envelope.len() - 1;
        let pos = (x.max(0.0) / 0.5) * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        (1.0 - w) * self.envelope[i] + w * self.envelope[i + 1]
    }

    /// `h_delta` on `[0, R]`.
    pub fn torpedo(&self) -> Result<SmoothFn1D> {
        let r = self.family.r_end;
        Ok(build_torpedo(self.bounds.delta, self.eps)?.f.extend_constant(r).with_domain(0.0, r))
    }

    pub fn member(&self, lambda: f64, x: f64) -> Result<MatchMember> {
        if !((0.0..=1.0).contains(&lambda) && (0.0..=1.0).contains(&x)) {
            return Err(Error::Parameter(format!("(lambda, x) = ({lambda}, {x}) outside [0, 1]^2")));
        }
        let r = self.family.r_end;
        let theta = self.theta(x);
        let node = Node::new(&self.family, x, self.eps)?;
        let delta_x = node.f.value(r);
        let core = if lambda <= 1.0 / 3.0 {
            shrink(&node.f, 3.0 * lambda * theta + 1.0 - 3.0 * lambda, r)?
        } else if lambda <= 2.0 / 3.0 {
            shrink(&node.blend(3.0 * lambda - 1.0)?, theta, r)?
        } else {
            let rho = (3.0 - 3.0 * lambda) * theta * delta_x + (3.0 * lambda - 2.0) * self.bounds.delta;
            build_torpedo(rho, self.eps)?.f.extend_constant(r).with_domain(0.0, r)
        };
        let p = core.value(r);
        let collar = if p == delta_x {
            SmoothFn1D::constant(r, self.r_inf, p)
        } else {
            collar_interp(p, delta_x, self.beta, r, self.r_inf, &self.bounds)?.f
        };
        if collar.domain().1 > self.r_inf * (1.0 + 1e-12) {
            return Err(Error::infeasible("one collar length for all members", format!("member ({lambda}, {x}) needs more")));
        }
        Ok(MatchMember {
            lambda,
            x,
            theta,
            delta_x,
            core,
            collar,
        })
    }
}

/// Grid sizes `(lambda, x, t)` for [`verify_match`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchGrid {
    pub lambdas: usize,
    pub xs: usize,
    pub ts: usize,
}

impl Default for MatchGrid {
    fn default() -> Self {
        Self {
            lambdas: 13,
            xs: 13,
            ts: 200,
        }
    }
}

/// Reports for the core (`A + sigma >= A + B''` on `[0, R]`) and the collar
/// (`A + sigma >= A + B'` on `[R, R_inf]`).
pub fn verify_match(m: &TorpedoMatch, grid: MatchGrid) -> Result<(CurvatureReport, CurvatureReport)> {
    let b = m.bounds;
    let r = m.family.r_end;
    let lambdas = linspace(0.0, 1.0, grid.lambdas.max(2));
    let xs = linspace(0.0, 1.0, grid.xs.max(2));
    let cells: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| xs.iter().map(move |&x| (l, x))).collect();
    let h_delta = m.torpedo()?;
    let check_ts = linspace(0.0, r, 401);

    struct Cell {
        core: Vec<(f64, f64, f64, f64)>,
        collar: Vec<(f64, f64, f64, f64)>,
        terminal: f64,
        start: f64,
        boundary: Option<SmoothFn1D>,
    }

    let out: Vec<Cell> = cells
        .par_iter()
        .map(|&(lambda, x)| -> Result<Cell> {
            let mem = m.member(lambda, x)?;
            let w = WarpSpec::with_switch(b.k, mem.core.clone(), b.a, m.family.t_switch(mem.theta))?;
            let mut core = Vec::new();
            for t in radii(r, m.family.feature * mem.theta / 8.0, grid.ts) {
                core.push((lambda, x, t, b.a + sigma_warp(&w, t)?));
            }
            let collar = linspace(r, m.r_inf, grid.ts / 2)
                .into_iter()
                .map(|t| (lambda, x, t, b.a + sigma_from_jet(b.k, &mem.collar.jet(t))))
                .collect();
            let dist = |g: &SmoothFn1D| check_ts.iter().map(|&t| (mem.core.value(t) - g.value(t)).abs()).fold(0.0, f64::max);
            let terminal = if lambda == 1.0 { FLATNESS - dist(&h_delta) } else { f64::INFINITY };
            let start = if lambda == 0.0 {
                FLATNESS - dist(&m.family.at(x)?)
            } else {
                f64::INFINITY
            };
            Ok(Cell {
                core,
                collar,
                terminal,
                start,
                boundary: (x == 1.0).then(|| mem.core.clone()),
            })
        })
        .collect::<Result<_>>()?;

    let mut core = CurvatureReport::new("match_core", b.a + b.bpp);
    let mut collar = CurvatureReport::new("match_collar", b.a + b.bp);
    let (mut terminal, mut start) = (f64::INFINITY, f64::INFINITY);
    let mut boundary: Vec<SmoothFn1D> = Vec::new();
    for c in out {
        for (l, x, t, v) in c.core {
            core.push(&[("lambda", l), ("x", x), ("t", t)], v);
        }
        for (l, x, t, v) in c.collar {
            collar.push(&[("lambda", l), ("x", x), ("t", t)], v);
        }
        terminal = terminal.min(c.terminal);
        start = start.min(c.start);
        boundary.extend(c.boundary);
    }
    let mut slice = f64::INFINITY;
    if let Some(first) = boundary.first() {
        for g in &boundary[1..] {
            let d = check_ts.iter().map(|&t| (first.value(t) - g.value(t)).abs()).fold(0.0, f64::max);
            slice = slice.min(FLATNESS - d);
        }
    }
    let theta_dev = xs
        .iter()
        .filter(|&&x| x >= 0.5)
        .map(|&x| (m.theta(x) - 1.0).abs())
        .fold(0.0, f64::max);
    core.condition("terminal_equals_torpedo", terminal);
    core.condition("start_equals_input", start);
    core.condition("boundary_slice_constant", slice);
    core.condition("theta_one_beyond_half", -theta_dev);
    core.condition("blend_floor_positive", m.blend_floor);
    Ok((core.finish(), collar.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::sigma_at_origin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> PSCBounds {
        PSCBounds::new(0.0, 1.0, 1.5, 3, 1.0).unwrap()
    }

    #[test]
    fn equal_ends_give_a_constant() {
        let c = collar_interp(0.7, 0.7, 0.5, 3.0, 4.0, &bounds()).unwrap();
        assert!((c.estimate - 2.0 / 0.49).abs() < 1e-12);
        assert!(c.report.pass);
        assert!(c.f.jet(3.5).d1 == 0.0);
    }

    #[test]
    fn collar_reaches_the_bound_after_doubling() {
        let b = bounds();
        let c = collar_interp(0.5, 1.0, 0.5, 3.0, 3.5, &b).unwrap();
        assert!(c.r_inf > 3.5, "needed no doubling");
        assert!(c.report.pass, "{}", c.report.margin);
        assert!(c.report.min_value >= c.estimate - 1e-9);
        assert!(c.f.value(3.0) == 0.5 && (c.f.value(c.r_inf) - 1.0).abs() < 1e-12);
        let len = collar_length(0.5, 1.0, 0.5, &b);
        let tight = collar_interp(0.5, 1.0, 0.5, 3.0, 3.0 + 1.001 * len, &b).unwrap();
        assert!((tight.r_inf - 3.0 - 1.001 * len).abs() < 1e-12);
        assert!(collar_interp(0.5, 1.0, 0.5, 3.0, 3.0 + 0.999 * len, &b).unwrap().r_inf > 3.0 + len);
    }

    #[test]
    fn zero_length_collar_is_infeasible() {
        match collar_interp(0.5, 1.0, 0.5, 3.0, 3.0, &bounds()) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, "R_inf > R"),
            other => panic!("{other:?}"),
        }
    }

    fn concave_profile(rng: &mut ChaCha8Rng, r: f64) -> SmoothFn1D {
        if rng.random_bool(0.5) {
            let delta = rng.random_range(0.4..2.0);
            let eps = rng.random_range(0.02..0.1);
            build_torpedo(delta, eps).unwrap().f.extend_constant(r).with_domain(0.0, r)
        } else {
            let theta = rng.random_range(2.0 * r / std::f64::consts::PI..3.0);
            scale_warp(&SmoothFn1D::sin(0.0, 2.0 * r), theta).unwrap().with_domain(0.0, r)
        }
    }

    /// Blends of concave warping functions with positive curvature keep
    /// positive curvature and a negative third derivative at the origin.
    #[test]
    fn blends_of_concave_pairs_stay_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = 1.0;
        let ts = linspace(1e-3, r, 200);
        for _ in 0..100 {
            let k = rng.random_range(3..6);
            let f0 = concave_profile(&mut rng, r);
            let f1 = concave_profile(&mut rng, r);
            for f in [&f0, &f1] {
                for &t in &ts {
                    let j = f.jet(t);
                    assert!(j.d1 >= -1e-12 && j.d1 <= 1.0 + 1e-12 && j.d2 <= 1e-12);
                }
            }
            for mu in [0.25, 0.5, 0.75] {
                let g = SmoothFn1D::linear_combination(vec![(1.0 - mu, f0.clone()), (mu, f1.clone())]).unwrap();
                assert!(g.jet(0.0).d3 < 0.0);
                assert!(sigma_at_origin(k, &g) > 0.0);
                let w = WarpSpec::new(k, g, 0.0).unwrap();
                for &t in &ts {
                    assert!(sigma_warp(&w, t).unwrap() > 0.0, "t = {t}, mu = {mu}");
                }
            }
        }
    }

    /// The cylinder part of `h_1` has `sigma = 12` for `k = 5`, so the
    /// largest admissible shrink for `B'' = 14` is `sqrt(12/14)`.
    #[test]
    fn theta_bisection_matches_the_scaling_law() {
        let b = PSCBounds::new(0.0, 1.0, 14.0, 5, 0.9).unwrap();
        let h = build_torpedo(1.0, DEFAULT_EPS).unwrap().f;
        let r = h.domain().1;
        let fam = WarpFamily::new("t", 5, r, move |_| Ok(h.clone()));
        let node = Node::new(&fam, 0.0, DEFAULT_EPS).unwrap();
        let ts = radii(r, r / 8.0, 200);
        let theta = bisect_theta(&fam, &b, &node, &ts).unwrap();
        let exact = (12.0f64 / 14.0).sqrt();
        assert!(theta <= exact + 1e-12 && exact - theta <= THETA_TOL, "{theta} vs {exact}");
    }

    #[test]
    fn all_torpedo_input_keeps_theta_one() {
        let b = PSCBounds::new(0.0, 0.25, 0.5, 5, 1.0).unwrap();
        let h = build_torpedo(1.0, DEFAULT_EPS).unwrap().f;
        let r = h.domain().1;
        let fam = WarpFamily::new("t", 5, r, move |_| Ok(h.clone()));
        let m = torpedo_match_homotopy(&fam, &b).unwrap();
        assert!(m.theta_nodes.iter().all(|&(_, t)| t == 1.0));
        let (core, collar) = verify_match(&m, MatchGrid { lambdas: 7, xs: 5, ts: 60 }).unwrap();
        assert!(core.pass, "{:?}", core.conditions);
        assert!(collar.pass);
    }
}
