//! The curve family `lambda -> Gamma_lambda`.
//!
//! Each member is assembled from exact pieces (lines, a circular arc and the
//! bend in closed form), its angle is convolved with the bump of radius `u`,
//! and an axis cap is appended. Positions are kept relative to the nearest
//! piece end, so the cap and the end of the bend (a few `1e-13` across for
//! `k = 3`) stay resolved.

use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use super::bend::{eval_series, Bend, SERIES_ORDER};
use super::params::GLParams;
use super::{on_axis, CurveJet, PlaneCurve};
use crate::curvature::{lower_bound_estimate, scal_revolution_jet};
use crate::fncore::{bump_moment, bump_nodes, bump_rule, BUMP_SUPPORT};
use crate::numerics::{brent, gauss_legendre, linspace};
use crate::report::CurvatureReport;
use crate::tolerances::{AXIS, CLAUSE_SLACK};
use crate::{Error, Result};

const MAX_RETRIES: usize = 6;
const INTERIOR_PANELS: usize = 16;
const WINDOW_PANELS: usize = 4;

fn moments() -> &'static [f64; SERIES_ORDER + 1] {
    static M: OnceLock<[f64; SERIES_ORDER + 1]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [0.0; SERIES_ORDER + 1];
        for (n, v) in m.iter_mut().enumerate() {
            if n % 2 == 0 {
                *v = bump_moment(n as u32);
            }
        }
        m
    })
}

fn cos_exact(th: f64) -> f64 {
    if th == FRAC_PI_2 {
        0.0
    } else {
        th.cos()
    }
}

/// `(sin(t + d) - sin t, cos t - cos(t + d))` without cancellation.
fn angle_diff(th: f64, d: f64) -> [f64; 2] {
    let h = (0.5 * d).sin();
    let m = th + 0.5 * d;
    [2.0 * m.cos() * h, 2.0 * m.sin() * h]
}

fn gl_sum<F: FnMut(f64) -> [f64; 2]>(lo: f64, hi: f64, mut f: F) -> [f64; 2] {
    if lo == hi {
        return [0.0; 2];
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = [0.0; 2];
    for &(x, w) in gauss_legendre(16) {
        let v = f(mid + half * x);
        acc[0] += w * half * v[0];
        acc[1] += w * half * v[1];
    }
    acc
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Line,
    Arc { q: f64 },
    Bend,
}

#[derive(Debug, Clone)]
struct Seg {
    kind: Kind,
    s0: f64,
    len: f64,
    th0: f64,
    th1: f64,
    y0: f64,
    r0: f64,
    y1: f64,
    r1: f64,
    ser0: [f64; SERIES_ORDER + 1],
    ser1: [f64; SERIES_ORDER + 1],
}

/// Position, angle and curvature of the unsmoothed curve.
#[derive(Debug, Clone, Copy)]
struct Local {
    y: f64,
    r: f64,
    th: f64,
    kap: f64,
}

impl Seg {
    fn new(kind: Kind, th0: f64, th1: f64, len: f64, bend: &Bend) -> Self {
        let (ser0, ser1) = if kind == Kind::Bend {
            (bend.series(th0), bend.series(th1))
        } else {
            ([0.0; SERIES_ORDER + 1], [0.0; SERIES_ORDER + 1])
        };
        Self {
            kind,
            s0: 0.0,
            len,
            th0,
            th1,
            y0: 0.0,
            r0: 0.0,
            y1: 0.0,
            r1: 0.0,
            ser0,
            ser1,
        }
    }

    fn place(&mut self, s0: f64, y0: f64, r0: f64, bend: &Bend) {
        self.s0 = s0;
        self.y0 = y0;
        self.r0 = r0;
        match self.kind {
            Kind::Line => {
                self.y1 = y0 + self.len * self.th0.sin();
                self.r1 = r0 - self.len * cos_exact(self.th0);
            }
            Kind::Arc { q } => {
                let (h, m) = (0.5 * (self.th1 - self.th0), 0.5 * (self.th1 + self.th0));
                self.y1 = y0 + 2.0 * m.sin() * h.sin() / q;
                self.r1 = r0 - 2.0 * m.cos() * h.sin() / q;
            }
            Kind::Bend => {
                self.r0 = bend.r(self.th0);
                self.y1 = y0 + bend.y_between(self.th0, self.th1);
                self.r1 = bend.r(self.th1);
            }
        }
    }

    fn kappa_start(&self) -> f64 {
        match self.kind {
            Kind::Line => 0.0,
            Kind::Arc { q } => q,
            Kind::Bend => self.ser0[1],
        }
    }

    fn kappa_end(&self) -> f64 {
        match self.kind {
            Kind::Line => 0.0,
            Kind::Arc { q } => q,
            Kind::Bend => self.ser1[1],
        }
    }

    /// Angle and curvature at arclength `sigma` from the start (short
    /// distances only for the bend).
    fn tk_start(&self, sigma: f64) -> (f64, f64) {
        match self.kind {
            Kind::Line => (self.th0, 0.0),
            Kind::Arc { q } => (self.th0 + q * sigma, q),
            Kind::Bend => eval_series(&self.ser0, sigma),
        }
    }

    fn tk_end(&self, d: f64) -> (f64, f64) {
        match self.kind {
            Kind::Line => (self.th1, 0.0),
            Kind::Arc { q } => (self.th1 - q * d, q),
            Kind::Bend => eval_series(&self.ser1, -d),
        }
    }

    fn at_start(&self, sigma: f64, bend: &Bend) -> Local {
        match self.kind {
            Kind::Line => Local {
                y: self.y0 + sigma * self.th0.sin(),
                r: self.r0 - sigma * cos_exact(self.th0),
                th: self.th0,
                kap: 0.0,
            },
            Kind::Arc { q } => {
                let th = self.th0 + q * sigma;
                let (h, m) = (0.5 * (th - self.th0), 0.5 * (th + self.th0));
                Local {
                    y: self.y0 + 2.0 * m.sin() * h.sin() / q,
                    r: self.r0 - 2.0 * m.cos() * h.sin() / q,
                    th,
                    kap: q,
                }
            }
            Kind::Bend => {
                let (th, kap) = eval_series(&self.ser0, sigma);
                Local {
                    y: self.y0 + bend.y_between(self.th0, th),
                    r: bend.r(th),
                    th,
                    kap,
                }
            }
        }
    }

    fn at_end(&self, d: f64, bend: &Bend) -> Local {
        match self.kind {
            Kind::Line => Local {
                y: self.y1 - d * self.th1.sin(),
                r: self.r1 + d * cos_exact(self.th1),
                th: self.th1,
                kap: 0.0,
            },
            Kind::Arc { q } => {
                let th = self.th1 - q * d;
                let (h, m) = (0.5 * (self.th1 - th), 0.5 * (self.th1 + th));
                Local {
                    y: self.y1 - 2.0 * m.sin() * h.sin() / q,
                    r: self.r1 + 2.0 * m.cos() * h.sin() / q,
                    th,
                    kap: q,
                }
            }
            Kind::Bend => {
                let (th, kap) = eval_series(&self.ser1, -d);
                Local {
                    y: self.y1 - bend.y_between(th, self.th1),
                    r: bend.r(th),
                    th,
                    kap,
                }
            }
        }
    }

    fn at_theta(&self, th: f64, bend: &Bend) -> Local {
        Local {
            y: self.y0 + bend.y_between(self.th0, th),
            r: bend.r(th),
            th,
            kap: bend.kappa(th),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Loc {
    Start(usize, f64),
    End(usize, f64),
}

/// Region near one or more curvature jumps, in offsets from boundary `b`.
/// `cum` holds the offset gained up to each panel edge.
#[derive(Debug, Clone)]
struct Window {
    b: usize,
    offs: Vec<f64>,
    lo: f64,
    hi: f64,
    edges: Vec<f64>,
    cum: Vec<[f64; 2]>,
    d_in: [f64; 2],
    d_out: [f64; 2],
}

/// Bend interior where the convolution is evaluated from the Taylor
/// expansion; panels in `ln(theta)` with the accumulated offset before each.
#[derive(Debug, Clone)]
struct Interior {
    seg: usize,
    th_a: f64,
    th_b: f64,
    v_edges: Vec<f64>,
    cum: Vec<[f64; 2]>,
    d_in: [f64; 2],
}

#[derive(Debug, Clone)]
enum Region {
    Window(Window),
    Interior(Interior),
}

/// Smoothed values at a point: unsmoothed local data plus the angle
/// correction, smoothed curvature and accumulated position offset.
struct Smoothed {
    base: Local,
    dth: f64,
    kappa: f64,
    offset: [f64; 2],
}

impl Smoothed {
    fn jet(&self) -> CurveJet {
        CurveJet {
            y: self.base.y + self.offset[0],
            r: self.base.r + self.offset[1],
            theta: self.base.th + self.dth,
            kappa: self.kappa,
        }
    }
}

fn step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

fn step_integral(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let x = x.min(1.0);
    crate::numerics::integrate_composite(0.0, x, 4, 16, step)
}

/// Nodes and weights on `[0, 1]` with the step integral at each node.
fn blend_rule() -> &'static [(f64, f64, f64)] {
    static R: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    R.get_or_init(|| {
        let mut out = Vec::new();
        for p in 0..4 {
            let (lo, hi) = (p as f64 / 4.0, (p + 1) as f64 / 4.0);
            for &(x, w) in gauss_legendre(16) {
                let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                out.push((t, 0.5 * (hi - lo) * w, step_integral(t)));
            }
        }
        out
    })
}

/// Cap: a curvature blend `-c step(sigma/omega)` followed by the circle
/// through the axis, centred on it.
#[derive(Debug, Clone, Default)]
struct Cap {
    y6: f64,
    r6: f64,
    th6: f64,
    omega: f64,
    c: f64,
    th_b: f64,
    y_b: f64,
    r_b: f64,
    circle_len: f64,
}

impl Cap {
    fn blend_end(th6: f64, omega: f64, c: f64) -> (f64, [f64; 2]) {
        let mut acc = [0.0; 2];
        for &(_, w, i) in blend_rule() {
            let th = th6 - c * omega * i;
            acc[0] += w * th.sin();
            acc[1] += w * th.cos();
        }
        (th6 - c * omega * step_integral(1.0), [omega * acc[0], omega * acc[1]])
    }

    fn new(y6: f64, r6: f64, th6: f64, omega: f64) -> Result<Self> {
        let i1 = step_integral(1.0);
        let c = if th6 == 0.0 {
            0.0
        } else {
            let g = |c: f64| {
                let (th_b, d) = Self::blend_end(th6, omega, c);
                c * (r6 - d[1]) - th_b.sin()
            };
            let c_max = th6 / (omega * i1);
            if !(g(0.0) < 0.0 && g(c_max) > 0.0) {
                return Err(Error::Geometry(format!(
                    "no circle through the axis from r = {r6}, theta = {th6}"
                )));
            }
            brent(0.0, c_max, 1e-15, g)?
        };
        let (th_b, d) = Self::blend_end(th6, omega, c);
        let (y_b, r_b) = (y6 + d[0], r6 - d[1]);
        if !(r_b > 0.0) {
            return Err(Error::Geometry(format!("cap blend reaches the axis (r = {r_b})")));
        }
        let circle_len = if c == 0.0 { r_b } else { th_b / c };
        Ok(Self {
            y6,
            r6,
            th6,
            omega,
            c,
            th_b,
            y_b,
            r_b,
            circle_len,
        })
    }

    fn length(&self) -> f64 {
        self.omega + self.circle_len
    }

    /// Point at fraction `x` of the blend.
    fn blend_at(&self, x: f64) -> CurveJet {
        let c = self.c;
        let th_at = |t: f64| self.th6 - c * self.omega * step_integral(t);
        let d = gl_sum(0.0, x, |t| {
            let th = th_at(t);
            [th.sin(), th.cos()]
        });
        CurveJet {
            y: self.y6 + self.omega * d[0],
            r: self.r6 - self.omega * d[1],
            theta: th_at(x),
            kappa: -c * step(x),
        }
    }

    /// Point on the circle at angle `th`, or at height `th * r_b` for a
    /// straight cap.
    fn circle_at(&self, th: f64) -> CurveJet {
        if self.c == 0.0 {
            let r = th.clamp(0.0, 1.0) * self.r_b;
            return CurveJet {
                y: self.y_b,
                r,
                theta: 0.0,
                kappa: 0.0,
            };
        }
        let c = self.c;
        CurveJet {
            y: self.y_b + 2.0 * (0.5 * (self.th_b + th)).sin() * (0.5 * (self.th_b - th)).sin() / c,
            r: th.sin() / c,
            theta: th,
            kappa: -c,
        }
    }

    /// Point at arclength `a` from the axis.
    fn jet_at_axis_distance(&self, a: f64) -> CurveJet {
        if a <= self.circle_len {
            if self.c == 0.0 {
                self.circle_at(a / self.r_b)
            } else {
                self.circle_at(self.c * a)
            }
        } else {
            self.blend_at(((self.length() - a) / self.omega).clamp(0.0, 1.0))
        }
    }
}

/// A jet with the arclength from the axis at which it was taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub s: f64,
    #[serde(flatten)]
    pub jet: CurveJet,
    /// True on the axis cap.
    #[serde(skip)]
    pub cap: bool,
}

/// One member `Gamma_lambda` of the family.
#[derive(Debug, Clone)]
pub struct GlCurve {
    pub lambda: f64,
    pub u: f64,
    r2: f64,
    rho: f64,
    r0: f64,
    bend: Arc<Bend>,
    segs: Vec<Seg>,
    regions: Vec<Region>,
    d_total: [f64; 2],
    s6: f64,
    cap: Cap,
    kappa_max: f64,
}

struct Template {
    segs: Vec<Seg>,
    s5: f64,
}

fn template(p: &GLParams, bend: &Bend) -> Template {
    let (d, q, th0) = (p.step_delta, p.q, p.theta0);
    let mut a = Seg::new(Kind::Line, 0.0, 0.0, d, bend);
    a.place(0.0, 0.0, p.r2, bend);
    let mut b = Seg::new(Kind::Arc { q }, 0.0, th0, d, bend);
    b.place(d, a.y1, a.r1, bend);
    let len_c = (b.r1 - p.r4) / th0.cos();
    let mut c = Seg::new(Kind::Line, th0, th0, len_c, bend);
    c.place(2.0 * d, b.y1, b.r1, bend);
    let mut bd = Seg::new(Kind::Bend, th0, FRAC_PI_2, bend.length(), bend);
    bd.place(2.0 * d + len_c, c.y1, p.r4, bend);
    let s5 = bd.s0 + bd.len;
    Template {
        segs: vec![a, b, c, bd],
        s5,
    }
}

impl GlCurve {
    fn build(p: &GLParams, bend: Arc<Bend>, tpl: &Template, lambda: f64, u: f64) -> Result<Self> {
        let b = bend.as_ref();
        let mut pieces: Vec<Seg> = Vec::new();
        if lambda >= 0.5 {
            pieces.extend(tpl.segs.iter().cloned());
            let h = p.omega + (2.0 * lambda - 1.0) * (2.0 * p.ell - p.omega);
            pieces.push(Seg::new(Kind::Line, FRAC_PI_2, FRAC_PI_2, h, b));
        } else {
            let st = 2.0 * lambda * tpl.s5;
            let mut th_t = 0.0;
            let mut r_above = p.r2 - p.r5;
            for seg in &tpl.segs {
                if st <= seg.s0 {
                    break;
                }
                let sigma = st - seg.s0;
                if sigma >= seg.len {
                    pieces.push(seg.clone());
                    th_t = seg.th1;
                    r_above = if seg.kind == Kind::Bend { 0.0 } else { seg.r1 - p.r5 };
                    continue;
                }
                let cut = match seg.kind {
                    Kind::Line => {
                        let mut s = Seg::new(Kind::Line, seg.th0, seg.th0, sigma, b);
                        s.place(seg.s0, seg.y0, seg.r0, b);
                        s
                    }
                    Kind::Arc { q } => {
                        let mut s = Seg::new(seg.kind, seg.th0, seg.th0 + q * sigma, sigma, b);
                        s.place(seg.s0, seg.y0, seg.r0, b);
                        s
                    }
                    Kind::Bend => {
                        let th = b.theta_at(sigma);
                        let mut s = Seg::new(Kind::Bend, seg.th0, th, b.s_of(th), b);
                        s.place(seg.s0, seg.y0, seg.r0, b);
                        s
                    }
                };
                th_t = cut.th1;
                r_above = if cut.kind == Kind::Bend {
                    b.r_above_end(cut.th1)
                } else {
                    cut.r1 - p.r5
                };
                pieces.push(cut);
                break;
            }
            let tail = if th_t >= FRAC_PI_2 { 0.0 } else { r_above / th_t.cos() };
            pieces.push(Seg::new(Kind::Line, th_t, th_t, tail + p.omega, b));
        }
        pieces.retain(|s| s.len > 0.0);

        // Lay the pieces end to end.
        let (mut s0, mut y0, mut r0) = (0.0, 0.0, p.r2);
        for seg in pieces.iter_mut() {
            seg.place(s0, y0, r0, b);
            s0 += seg.len;
            y0 = seg.y1;
            r0 = seg.r1;
        }
        let s6 = s0;
        let kappa_max = pieces
            .iter()
            .map(|s| s.kappa_start().max(s.kappa_end()))
            .fold(0.0, f64::max);

        let mut curve = Self {
            lambda,
            u,
            r2: p.r2,
            rho: p.rho,
            r0: p.r0,
            bend,
            segs: pieces,
            regions: Vec::new(),
            d_total: [0.0; 2],
            s6,
            cap: Cap::default(),
            kappa_max,
        };
        curve.build_regions();
        let last = curve.segs.last().expect("at least one piece");
        let (y6, r6) = (last.y1 + curve.d_total[0], last.r1 + curve.d_total[1]);
        curve.cap = Cap::new(y6, r6, last.th1, p.omega)?;
        Ok(curve)
    }

    fn walk(&self, i: usize, x: f64) -> Loc {
        let n = self.segs.len();
        if x >= 0.0 {
            if i >= n {
                return Loc::End(n - 1, -x);
            }
            let (mut j, mut s) = (i, x);
            while j + 1 < n && s > self.segs[j].len {
                s -= self.segs[j].len;
                j += 1;
            }
            Loc::Start(j, s)
        } else {
            if i == 0 {
                return Loc::Start(0, x);
            }
            let (mut j, mut d) = (i - 1, -x);
            while j > 0 && d > self.segs[j].len {
                d -= self.segs[j].len;
                j -= 1;
            }
            Loc::End(j, d)
        }
    }

    fn tk(&self, i: usize, x: f64) -> (f64, f64) {
        match self.walk(i, x) {
            Loc::Start(j, s) => self.segs[j].tk_start(s),
            Loc::End(j, d) => self.segs[j].tk_end(d),
        }
    }

    fn local(&self, i: usize, x: f64) -> Local {
        match self.walk(i, x) {
            Loc::Start(j, s) => self.segs[j].at_start(s, &self.bend),
            Loc::End(j, d) => self.segs[j].at_end(d, &self.bend),
        }
    }

    /// Angle correction and smoothed curvature at offset `x` in a window.
    fn window_tk(&self, w: &Window, x: f64) -> (f64, f64, f64, f64) {
        let u = self.u;
        let splits: Vec<f64> = w.offs.iter().map(|o| (x - o) / u).collect();
        let owned;
        let rule: &[(f64, f64)] = if splits.iter().any(|s| s.abs() < BUMP_SUPPORT) {
            owned = bump_rule(&splits);
            &owned
        } else {
            bump_nodes()
        };
        let (th, kap) = self.tk(w.b, x);
        let (mut dth, mut dk) = (0.0, 0.0);
        for &(xi, wt) in rule {
            let (t, k) = self.tk(w.b, x - u * xi);
            dth += wt * (t - th);
            dk += wt * (k - kap);
        }
        (th, dth, kap, kap + dk)
    }

    fn window_diff(&self, w: &Window, x: f64) -> [f64; 2] {
        let (th, dth, _, _) = self.window_tk(w, x);
        angle_diff(th, dth)
    }

    /// Panel edges between the jumps and the offset gained up to each.
    fn tabulate(&self, w: &mut Window) {
        let mut cuts = vec![w.lo];
        cuts.extend(w.offs.iter().copied().filter(|o| *o > w.lo && *o < w.hi));
        cuts.push(w.hi);
        let mut edges = vec![w.lo];
        for pair in cuts.windows(2) {
            for i in 1..=WINDOW_PANELS {
                edges.push(pair[0] + (pair[1] - pair[0]) * i as f64 / WINDOW_PANELS as f64);
            }
        }
        let mut cum = vec![[0.0; 2]];
        for pair in edges.windows(2) {
            let last = *cum.last().expect("non-empty");
            cum.push(add(last, gl_sum(pair[0], pair[1], |t| self.window_diff(w, t))));
        }
        w.edges = edges;
        w.cum = cum;
    }

    /// Offset accumulated across the window up to `x`.
    fn window_offset(&self, w: &Window, x: f64) -> [f64; 2] {
        let p = w.edges.partition_point(|e| *e <= x).clamp(1, w.edges.len() - 1) - 1;
        add(add(w.d_in, w.cum[p]), gl_sum(w.edges[p], x, |t| self.window_diff(w, t)))
    }

    fn series_tk(&self, th: f64) -> (f64, f64) {
        let t = self.bend.series(th);
        let m = moments();
        let mut dth = 0.0;
        let mut kap = 0.0;
        let mut un = 1.0;
        let u2 = self.u * self.u;
        let mut n = 0;
        while n < SERIES_ORDER {
            if n >= 2 {
                dth += t[n] * un * m[n];
            }
            kap += (n + 1) as f64 * t[n + 1] * un * m[n];
            un *= u2;
            n += 2;
        }
        (dth, kap)
    }

    fn interior_diff_v(&self, v: f64) -> [f64; 2] {
        let th = v.exp();
        let (dth, _) = self.series_tk(th);
        let d = angle_diff(th, dth);
        let w = th * self.bend.ds_dtheta(th);
        [d[0] * w, d[1] * w]
    }

    fn interior_offset(&self, it: &Interior, th: f64) -> [f64; 2] {
        let v = th.ln();
        let p = it.v_edges.partition_point(|e| *e <= v).clamp(1, INTERIOR_PANELS) - 1;
        add(it.cum[p], gl_sum(it.v_edges[p], v, |x| self.interior_diff_v(x)))
    }

    fn boundary_s(&self, i: usize) -> f64 {
        if i < self.segs.len() {
            self.segs[i].s0
        } else {
            self.s6
        }
    }

    fn build_regions(&mut self) {
        let n = self.segs.len();
        let quarter = BUMP_SUPPORT * self.u;
        let jumps: Vec<usize> = (1..n)
            .filter(|&i| self.segs[i - 1].kappa_end() != self.segs[i].kappa_start())
            .collect();
        let mut windows: Vec<Window> = Vec::new();
        for &i in &jumps {
            if let Some(w) = windows.last_mut() {
                // Offsets between boundaries are sums of the short pieces in between.
                let gap: f64 = (w.b..i).map(|j| self.segs[j].len).sum();
                if gap - quarter <= w.hi {
                    w.offs.push(gap);
                    w.hi = gap + quarter;
                    continue;
                }
            }
            windows.push(Window {
                b: i,
                offs: vec![0.0],
                lo: -quarter,
                hi: quarter,
                edges: Vec::new(),
                cum: Vec::new(),
                d_in: [0.0; 2],
                d_out: [0.0; 2],
            });
        }

        // Interleave windows with bend interiors in curve order.
        let mut regions: Vec<(f64, Region)> = windows
            .iter()
            .map(|w| (self.boundary_s(w.b) + w.lo, Region::Window(w.clone())))
            .collect();
        for (j, seg) in self.segs.iter().enumerate() {
            if seg.kind != Kind::Bend {
                continue;
            }
            let after = windows
                .iter()
                .find(|w| {
                    let end: f64 = w.hi - (w.b..j).map(|m| self.segs[m].len).sum::<f64>();
                    w.b <= j && end > 0.0
                })
                .map(|w| w.hi - (w.b..j).map(|m| self.segs[m].len).sum::<f64>())
                .unwrap_or(0.0);
            let before = windows
                .iter()
                .find(|w| w.b == j + 1 || (w.b <= j + 1 && w.offs.len() > 1 && w.b > j))
                .map(|w| -w.lo)
                .unwrap_or(0.0);
            if after + before >= seg.len {
                continue;
            }
            let th_a = seg.tk_start(after).0;
            let th_b = seg.tk_end(before).0;
            if !(th_b > th_a) {
                continue;
            }
            let (va, vb) = (th_a.ln(), th_b.ln());
            let v_edges = linspace(va, vb, INTERIOR_PANELS + 1);
            regions.push((
                seg.s0 + after,
                Region::Interior(Interior {
                    seg: j,
                    th_a,
                    th_b,
                    v_edges,
                    cum: Vec::new(),
                    d_in: [0.0; 2],
                }),
            ));
        }
        regions.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut acc = [0.0; 2];
        let mut out = Vec::with_capacity(regions.len());
        for (_, mut r) in regions {
            match &mut r {
                Region::Window(w) => {
                    w.d_in = acc;
                    self.tabulate(w);
                    acc = add(acc, *w.cum.last().expect("tabulated"));
                    w.d_out = acc;
                }
                Region::Interior(it) => {
                    it.d_in = acc;
                    let mut cum = vec![acc];
                    for p in 0..INTERIOR_PANELS {
                        let (a, b) = (it.v_edges[p], it.v_edges[p + 1]);
                        acc = add(acc, gl_sum(a, b, |x| self.interior_diff_v(x)));
                        cum.push(acc);
                    }
                    it.cum = cum;
                }
            }
            out.push(r);
        }
        self.regions = out;
        self.d_total = acc;
    }

    /// Accumulated offset at global position `s` outside every region.
    fn offset_before(&self, s: f64) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for r in &self.regions {
            match r {
                Region::Window(w) => {
                    if self.boundary_s(w.b) + w.hi <= s {
                        acc = w.d_out;
                    }
                }
                Region::Interior(it) => {
                    let seg = &self.segs[it.seg];
                    if seg.s0 + self.bend.s_of(it.th_b) <= s {
                        acc = it.cum[INTERIOR_PANELS];
                    }
                }
            }
        }
        acc
    }

    fn window_point(&self, w: &Window, x: f64) -> Smoothed {
        let base = self.local(w.b, x);
        let (_, dth, _, kappa) = self.window_tk(w, x);
        Smoothed {
            base,
            dth,
            kappa,
            offset: self.window_offset(w, x),
        }
    }

    fn interior_point(&self, it: &Interior, th: f64) -> Smoothed {
        let base = self.segs[it.seg].at_theta(th, &self.bend);
        let (dth, kappa) = self.series_tk(th);
        Smoothed {
            base,
            dth,
            kappa,
            offset: self.interior_offset(it, th),
        }
    }

    fn plain_point(&self, base: Local, s_global: f64) -> Smoothed {
        Smoothed {
            base,
            dth: 0.0,
            kappa: base.kap,
            offset: self.offset_before(s_global),
        }
    }

    /// Jet at arclength `s` measured along the smoothed curve from `(0, r2)`.
    fn jet_beta(&self, s: f64) -> CurveJet {
        if s <= 0.0 {
            return CurveJet {
                y: 0.0,
                r: self.r2 - s,
                theta: 0.0,
                kappa: 0.0,
            };
        }
        if s >= self.s6 {
            return self.cap.jet_at_axis_distance(self.cap.length() - (s - self.s6));
        }
        for r in &self.regions {
            match r {
                Region::Window(w) => {
                    let b = self.boundary_s(w.b);
                    if s >= b + w.lo && s <= b + w.hi {
                        return self.window_point(w, s - b).jet();
                    }
                }
                Region::Interior(it) => {
                    let seg = &self.segs[it.seg];
                    let th = self.bend.theta_at(s - seg.s0);
                    if th >= it.th_a && th <= it.th_b && s >= seg.s0 && s <= seg.s0 + seg.len {
                        return self.interior_point(it, th).jet();
                    }
                }
            }
        }
        let j = self.segs.partition_point(|g| g.s0 <= s).max(1) - 1;
        let seg = &self.segs[j];
        let base = if seg.kind == Kind::Bend {
            seg.at_theta(self.bend.theta_at(s - seg.s0), &self.bend)
        } else {
            seg.at_start(s - seg.s0, &self.bend)
        };
        self.plain_point(base, s).jet()
    }

    /// Length of the smoothed curve from `(0, r2)` to the axis.
    pub fn beta_length(&self) -> f64 {
        self.s6 + self.cap.length()
    }

    /// Length of the parametrised curve, from the axis up to height `rho`.
    pub fn total_length(&self) -> f64 {
        self.beta_length() + (self.rho - self.r2)
    }

    /// Jet at arclength `s` from the axis, reported with the tangent
    /// pointing towards the axis so that `theta` stays in `[0, pi/2]`.
    pub fn jet_from_axis(&self, s: f64) -> CurveJet {
        let lb = self.beta_length();
        let cap_len = self.cap.length();
        if s <= cap_len {
            return self.cap.jet_at_axis_distance(s);
        }
        self.jet_beta(lb - s)
    }

    /// `Gamma_lambda(s)`: the curve from the axis, reparametrised so that
    /// it is `(0, s)` for `s >= r0`.
    pub fn gamma(&self, s: f64) -> [f64; 2] {
        let shift = self.beta_length() - self.r2;
        let phi = s + shift * step((s - 0.25 * self.r0) / (0.75 * self.r0));
        if phi >= self.beta_length() {
            return [0.0, self.r2 + (phi - self.beta_length())];
        }
        let j = self.jet_from_axis(phi.max(0.0));
        [j.y, j.r]
    }

    /// Height of the final straight run before the cap.
    pub fn run_height(&self) -> f64 {
        self.cap.r6
    }

    /// Length of the exactly horizontal run (zero when the run is slanted).
    pub fn horizontal_length(&self) -> f64 {
        let last = self.segs.last().expect("pieces");
        if last.th0 != FRAC_PI_2 {
            return 0.0;
        }
        let quarter = BUMP_SUPPORT * self.u;
        last.len - quarter
    }

    /// Largest curvature of the unsmoothed pieces.
    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// Jets at about `n` points, denser where the curve turns.
    pub fn samples(&self, n: usize) -> Vec<CurveSample> {
        let n = n.max(80);
        let lb = self.beta_length();
        let mut out = Vec::with_capacity(n + 16);
        let mut push = |s_beta: f64, jet: CurveJet, cap: bool| {
            out.push(CurveSample {
                s: lb - s_beta,
                jet,
                cap,
            })
        };
        let n_cap = n / 10;
        let n_win = n / 16;
        let n_line = n / 40 + 2;
        let windows: Vec<&Window> = self
            .regions
            .iter()
            .filter_map(|r| if let Region::Window(w) = r { Some(w) } else { None })
            .collect();
        let interiors: Vec<&Interior> = self
            .regions
            .iter()
            .filter_map(|r| if let Region::Interior(it) = r { Some(it) } else { None })
            .collect();
        let n_bend = n.saturating_sub(2 * n_cap + windows.len() * n_win + self.segs.len() * n_line) / interiors.len().max(1);

        for i in 1..=4 {
            let s = -(self.rho - self.r2) * i as f64 / 4.0;
            push(s, self.jet_beta(s), false);
        }
        // Straight and circular pieces away from the windows.
        let quarter = BUMP_SUPPORT * self.u;
        for (j, seg) in self.segs.iter().enumerate() {
            if seg.kind == Kind::Bend {
                continue;
            }
            let start_cut = if windows.iter().any(|w| w.b == j || (w.b < j && w.hi > (w.b..j).map(|m| self.segs[m].len).sum::<f64>())) {
                quarter.max(self.covered_after(j))
            } else {
                0.0
            };
            let end_cut = if windows.iter().any(|w| w.b == j + 1) { quarter } else { 0.0 };
            if start_cut + end_cut >= seg.len {
                continue;
            }
            for k in 0..n_line {
                let f = (k as f64 + 0.5) / n_line as f64;
                let avail = seg.len - start_cut - end_cut;
                let (base, s_glob) = if f < 0.5 {
                    let sigma = start_cut + f * avail;
                    (seg.at_start(sigma, &self.bend), seg.s0 + sigma)
                } else {
                    let d = end_cut + (1.0 - f) * avail;
                    (seg.at_end(d, &self.bend), seg.s0 + seg.len - d)
                };
                push(s_glob, self.plain_point(base, s_glob).jet(), false);
            }
        }
        for w in &windows {
            let b = self.boundary_s(w.b);
            for x in linspace(w.lo, w.hi, n_win) {
                push(b + x, self.window_point(w, x).jet(), false);
            }
        }
        for it in &interiors {
            let seg = &self.segs[it.seg];
            for v in linspace(it.th_a.ln(), it.th_b.ln(), n_bend.max(8)) {
                let th = v.exp().clamp(it.th_a, it.th_b);
                push(seg.s0 + self.bend.s_of(th), self.interior_point(it, th).jet(), false);
            }
        }
        // Cap: blend, then circle down to (not including) the axis point.
        for k in 0..n_cap {
            let x = k as f64 / n_cap as f64;
            push(self.s6 + x * self.cap.omega, self.cap.blend_at(x), true);
        }
        for k in (1..=n_cap).rev() {
            let f = k as f64 / n_cap as f64;
            let (jet, a) = if self.cap.c == 0.0 {
                (self.cap.circle_at(f), f * self.cap.r_b)
            } else {
                let th = f * self.cap.th_b;
                (self.cap.circle_at(th), th / self.cap.c)
            };
            push(lb - a, jet, true);
        }
        out.sort_by(|a, b| a.s.total_cmp(&b.s));
        out
    }

    fn covered_after(&self, j: usize) -> f64 {
        let quarter = BUMP_SUPPORT * self.u;
        for r in &self.regions {
            if let Region::Window(w) = r {
                if w.b <= j {
                    let before: f64 = (w.b..j).map(|m| self.segs[m].len).sum();
                    if w.hi > before {
                        return w.hi - before;
                    }
                }
            }
        }
        quarter
    }
}

/// The family on a grid of `lambda` values.
#[derive(Debug, Clone, Serialize)]
pub struct GLFamily {
    pub params: GLParams,
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub curves: Vec<Arc<GlCurve>>,
    /// Height of the horizontal run of the `lambda = 1` member.
    pub r_inf: f64,
    /// Length of the exactly horizontal part of that run.
    pub length_achieved: f64,
    /// Number of times the smoothing radius was halved.
    pub retries: usize,
}

impl GLFamily {
    pub fn curve(&self, i: usize) -> PlaneCurve {
        PlaneCurve::from_family(self.curves[i].clone())
    }
}

fn assemble(params: &GLParams, lambda_grid: &[f64], bend: &Arc<Bend>, tpl: &Template, u: f64) -> Result<GLFamily> {
    let curves: Vec<Arc<GlCurve>> = lambda_grid
        .par_iter()
        .map(|&l| GlCurve::build(params, bend.clone(), tpl, l, u).map(Arc::new))
        .collect::<Result<_>>()?;
    let top = curves
        .iter()
        .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .expect("non-empty grid");
    let (r_inf, length_achieved) = if top.lambda == 1.0 {
        (top.run_height(), top.horizontal_length())
    } else {
        (f64::NAN, 0.0)
    };
    let mut p = params.clone();
    p.moll_u = u;
    Ok(GLFamily {
        params: p,
        lambdas: lambda_grid.to_vec(),
        curves,
        r_inf,
        length_achieved,
        retries: 0,
    })
}

/// Build the family on `lambda_grid` (values in `[0, 1]`). The smoothing
/// radius starts at `params.moll_u` and is halved while the model check
/// fails, at most six times.
pub fn build_gl_family(params: &GLParams, lambda_grid: &[f64]) -> Result<GLFamily> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Parameter("lambda grid must be non-empty and inside [0, 1]".into()));
    }
    let margin = params.ordering_margin();
    if !(margin >= 0.0) {
        return Err(Error::infeasible("radius ordering", format!("worst margin {margin}")));
    }
    if !(params.moll_u > 0.0 && params.moll_u <= params.omega) {
        return Err(Error::Parameter(format!(
            "smoothing radius {} must lie in (0, omega = {}]",
            params.moll_u, params.omega
        )));
    }
    let bend = Arc::new(Bend::new(params.a, params.r5, params.theta0));
    let tpl = template(params, &bend);
    let mut u = params.moll_u;
    let mut fam = assemble(params, lambda_grid, &bend, &tpl, u)?;
    for retry in 1..=MAX_RETRIES {
        let rep = verify_gl_family(&fam, params.k, params.c, params.base_scal, 400);
        if rep.margin >= 0.0 {
            break;
        }
        u *= 0.5;
        fam = assemble(params, lambda_grid, &bend, &tpl, u)?;
        fam.retries = retry;
    }
    Ok(fam)
}

/// Check `scal >= base_scal - eta` over every member at about
/// `samples_per_curve` points, using the exact model value when `c = 0`
/// and the certified lower bound otherwise.
pub fn verify_gl_family(fam: &GLFamily, k: usize, c: f64, base_scal: f64, samples_per_curve: usize) -> CurvatureReport {
    let p = &fam.params;
    let mut rep = CurvatureReport::new("gl_family", base_scal - p.eta);
    let per_curve: Vec<(f64, Vec<CurveSample>)> = fam
        .curves
        .par_iter()
        .map(|cv| (cv.lambda, cv.samples(samples_per_curve)))
        .collect();

    let mut envelope = f64::INFINITY;
    let mut cap_sign = f64::INFINITY;
    let mut axis = f64::INFINITY;
    for ((lambda, samples), cv) in per_curve.iter().zip(&fam.curves) {
        let kmax = cv.kappa_max();
        let mut max_y: f64 = 0.0;
        for smp in samples {
            let j = &smp.jet;
            let value = if c == 0.0 {
                scal_revolution_jet(j, k, base_scal)
            } else {
                lower_bound_estimate(j, k, c, base_scal)
            }
            .unwrap_or(f64::NAN);
            rep.push(&[("lambda", *lambda), ("s", smp.s)], value);
            if smp.cap {
                cap_sign = cap_sign.min(-j.kappa);
            } else if kmax > 0.0 {
                envelope = envelope.min(j.kappa.min(kmax - j.kappa) / kmax);
            }
            max_y = max_y.max(j.y.abs());
        }
        if *lambda == 0.0 {
            axis = axis.min(AXIS - max_y);
            debug_assert!(on_axis(max_y) || max_y > AXIS);
        }
    }
    rep.condition("q_certificate", p.q_certificate());
    rep.condition("r4_certificate", p.r4_certificate());
    rep.condition("kappa_envelope", envelope + CLAUSE_SLACK);
    rep.condition("cap_curvature_nonpositive", cap_sign);
    if axis.is_finite() {
        rep.condition("lambda0_on_axis", axis);
    }
    if fam.r_inf.is_finite() {
        rep.condition("inner_width", p.eps0 - fam.r_inf);
        rep.condition("length", fam.length_achieved - p.ell);
    }
    rep.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glcurve::select_parameters;

    fn family(k: usize, grid: &[f64]) -> GLFamily {
        let p = select_parameters(k, 0.1, 0.1, 2.0, 1.0, 0.0, 0.0).unwrap();
        build_gl_family(&p, grid).unwrap()
    }

    #[test]
    fn lambda_zero_is_the_axis() {
        let f = family(3, &[0.0]);
        for smp in f.curves[0].samples(200) {
            assert!(smp.jet.y.abs() <= 1e-10);
            assert_eq!(smp.jet.theta, 0.0);
        }
    }

    #[test]
    fn full_member_has_long_horizontal_run() {
        let f = family(4, &[1.0]);
        assert!(f.length_achieved >= f.params.ell);
        assert!(f.r_inf <= f.params.eps0);
        let c = &f.curves[0];
        assert!((c.run_height() - f.params.r5).abs() < 1e-3 * f.params.r5);
    }

    #[test]
    fn cap_meets_axis_at_right_angle() {
        let f = family(3, &[0.3, 0.75, 1.0]);
        for c in &f.curves {
            let end = c.jet_from_axis(0.0);
            assert!(end.r.abs() < 1e-20 && end.theta.abs() < 1e-8);
            let near = c.jet_from_axis(0.5 * c.cap.circle_len);
            assert!((near.kappa - end.kappa).abs() <= 1e-6 * end.kappa.abs().max(1e-300));
        }
    }

    #[test]
    fn smoothed_curvature_stays_in_envelope() {
        let f = family(3, &[0.2, 0.45, 0.5, 1.0]);
        for c in &f.curves {
            for smp in c.samples(300).iter().filter(|s| !s.cap) {
                assert!(smp.jet.kappa >= -1e-12 * c.kappa_max());
                assert!(smp.jet.kappa <= c.kappa_max() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn window_offsets_integrate_the_angle_change() {
        for k in [3, 5] {
            let f = family(k, &[0.3, 1.0]);
            for c in &f.curves {
                for r in &c.regions {
                    let Region::Window(w) = r else { continue };
                    // Differences are taken without the offset carried in
                    // from earlier windows, which would swamp them.
                    let w = &Window { d_in: [0.0; 2], ..w.clone() };
                    let h = (w.hi - w.lo) * 1e-3;
                    let xs: Vec<f64> = linspace(w.lo + 2.0 * h, w.hi - 2.0 * h, 9)
                        .into_iter()
                        .filter(|x| w.offs.iter().all(|o| (x - o).abs() > 4.0 * h))
                        .collect();
                    let scale = xs.iter().map(|&x| c.window_point(w, x).dth.abs()).fold(0.0, f64::max);
                    for x in xs {
                        let a = c.window_point(w, x - h).offset;
                        let b = c.window_point(w, x + h).offset;
                        let m = c.window_point(w, x);
                        let want = angle_diff(m.base.th, m.dth);
                        for i in 0..2 {
                            let fd = (b[i] - a[i]) / (2.0 * h);
                            // `dth` carries roundoff from differencing angles of size `th`.
                            let floor = 1e-14 * m.base.th.abs();
                            assert!((fd - want[i]).abs() <= 1e-5 * scale + floor, "k={k} {fd} vs {}", want[i]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_is_the_axis_beyond_r0() {
        let f = family(5, &[0.0, 0.6, 1.0]);
        for c in &f.curves {
            for s in [1.0, 1.5, 2.0, 3.0] {
                let g = c.gamma(s);
                assert!(g[0].abs() < 1e-12 && (g[1] - s).abs() < 1e-12, "{g:?} at {s}");
            }
        }
    }

    #[test]
    fn global_and_local_jets_agree() {
        let f = family(4, &[0.7]);
        let c = &f.curves[0];
        for smp in c.samples(120) {
            if smp.cap || smp.s < 1e-6 {
                continue;
            }
            let g = c.jet_from_axis(smp.s);
            assert!((g.theta - smp.jet.theta).abs() < 1e-5, "{g:?} {smp:?}");
        }
    }
}
