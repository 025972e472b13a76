use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::fncore::SmoothFn1D;
use crate::{Error, Result};

/// A symmetric matrix and its first two `t`-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: DMatrix<f64>,
    pub ddg: DMatrix<f64>,
}

type JetFn = dyn Fn(f64) -> MetricJet + Send + Sync;

/// A path `t -> g(t)` of metrics on a `d`-dimensional fiber of constant
/// scalar curvature `spatial_scal`.
#[derive(Clone)]
pub struct MetricPath {
    pub d: usize,
    pub spatial_scal: f64,
    jet: Arc<JetFn>,
}

impl fmt::Debug for MetricPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricPath")
            .field("d", &self.d)
            .field("spatial_scal", &self.spatial_scal)
            .finish_non_exhaustive()
    }
}

fn symmetrise(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

impl MetricPath {
    pub fn new<F>(d: usize, spatial_scal: f64, jet: F) -> Self
    where
        F: Fn(f64) -> MetricJet + Send + Sync + 'static,
    {
        Self {
            d,
            spatial_scal,
            jet: Arc::new(jet),
        }
    }

    /// Jet at `t`, symmetrised.
    pub fn jet(&self, t: f64) -> MetricJet {
        let j = (self.jet)(t);
        MetricJet {
            g: symmetrise(j.g),
            dg: symmetrise(j.dg),
            ddg: symmetrise(j.ddg),
        }
    }

    pub fn constant(g: DMatrix<f64>, spatial_scal: f64) -> Self {
        let d = g.nrows();
        Self::new(d, spatial_scal, move |_| MetricJet {
            g: g.clone(),
            dg: DMatrix::zeros(d, d),
            ddg: DMatrix::zeros(d, d),
        })
    }

    /// `exp(2 phi(t)) I_d` on a flat torus.
    pub fn conformal(d: usize, phi: SmoothFn1D) -> Self {
        Self::new(d, 0.0, move |t| {
            let p = phi.jet(t);
            let e = (2.0 * p.value).exp();
            let id = DMatrix::<f64>::identity(d, d);
            MetricJet {
                g: &id * e,
                dg: &id * (2.0 * p.d1 * e),
                ddg: &id * ((2.0 * p.d2 + 4.0 * p.d1 * p.d1) * e),
            }
        })
    }

    /// `diag(a_1(t)^2, ..., a_d(t)^2)` on a flat torus.
    pub fn diagonal(a: Vec<SmoothFn1D>) -> Self {
        let d = a.len();
        Self::new(d, 0.0, move |t| {
            let mut g = DMatrix::zeros(d, d);
            let mut dg = DMatrix::zeros(d, d);
            let mut ddg = DMatrix::zeros(d, d);
            for (i, ai) in a.iter().enumerate() {
                let j = ai.jet(t);
                g[(i, i)] = j.value * j.value;
                dg[(i, i)] = 2.0 * j.value * j.d1;
                ddg[(i, i)] = 2.0 * (j.d1 * j.d1 + j.value * j.d2);
            }
            MetricJet { g, dg, ddg }
        })
    }

    /// `(1 - t) g0 + t g1`.
    pub fn linear(g0: DMatrix<f64>, g1: DMatrix<f64>, spatial_scal: f64) -> Self {
        let d = g0.nrows();
        Self::new(d, spatial_scal, move |t| MetricJet {
            g: &g0 * (1.0 - t) + &g1 * t,
            dg: &g1 - &g0,
            ddg: DMatrix::zeros(d, d),
        })
    }

    /// `t -> g(f(t))`.
    pub fn reparametrised(&self, f: SmoothFn1D) -> Self {
        let inner = self.clone();
        Self::new(self.d, self.spatial_scal, move |t| {
            let fj = f.jet(t);
            let j = inner.jet(fj.value);
            MetricJet {
                dg: &j.dg * fj.d1,
                ddg: &j.ddg * (fj.d1 * fj.d1) + &j.dg * fj.d2,
                g: j.g,
            }
        })
    }

    /// `Q^T g(t) Q` for a constant matrix `Q`.
    pub fn conjugated(&self, q: DMatrix<f64>) -> Self {
        let inner = self.clone();
        Self::new(self.d, self.spatial_scal, move |t| {
            let j = inner.jet(t);
            let qt = q.transpose();
            MetricJet {
                g: &qt * j.g * &q,
                dg: &qt * j.dg * &q,
                ddg: &qt * j.ddg * &q,
            }
        })
    }

    /// The full metric `dt^2 + g(t)` on `(t, x_1, ..., x_d)` for the
    /// finite-difference oracle (fibers flat, so `x` is ignored).
    pub fn total_metric(&self, coords: &[f64]) -> DMatrix<f64> {
        let g = self.jet(coords[0]).g;
        let mut m = DMatrix::zeros(self.d + 1, self.d + 1);
        m[(0, 0)] = 1.0;
        m.view_mut((1, 1), (self.d, self.d)).copy_from(&g);
        m
    }
}

fn inverse(g: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("metric is not positive definite at t = {t}")))?;
    Ok(chol.inverse())
}

/// Coefficients `(X, Y)` with `scal(g(f(t)) + dt^2) = s + f'^2 X + f'' Y`.
fn trace_coefficients(j: &MetricJet, t: f64) -> Result<(f64, f64)> {
    let gi = inverse(&j.g, t)?;
    let a = &gi * &j.dg;
    let q1 = (&a * &a).trace();
    let tr_a = a.trace();
    let q2 = tr_a * tr_a;
    let tr_dd = (&gi * &j.ddg).trace();
    Ok((0.75 * q1 - tr_dd - 0.25 * q2, -tr_a))
}

/// Scalar curvature of `dt^2 + g(t)` at `t`.
pub fn scal_trace_path(p: &MetricPath, t: f64) -> Result<f64> {
    let j = p.jet(t);
    if j.g.nrows() != p.d || j.g.ncols() != p.d {
        return Err(Error::Parameter("metric jet has the wrong size".into()));
    }
    let (x, _) = trace_coefficients(&j, t)?;
    Ok(p.spatial_scal + x)
}

/// Cap on the returned slope bound. Keeping `Lambda <= 1` lets the proof's
/// `|f'|^2 <= |f'|` step go through.
pub const GAJER_CAP: f64 = 1.0;

/// `sup max(|X|, |Y|)` over the family sampled on `grid`.
pub fn gajer_constant(family: &[MetricPath], grid: &[f64]) -> Result<f64> {
    let mut c: f64 = 0.0;
    for p in family {
        for &t in grid {
            let (x, y) = trace_coefficients(&p.jet(t), t)?;
            c = c.max(x.abs()).max(y.abs());
        }
    }
    Ok(c)
}

/// `Lambda` such that any reparametrisation `f: R -> [0, 1]` with
/// `|f'|, |f''| <= Lambda` keeps `scal >= B_p - eta` for each path.
/// Paths are sampled on 201 points of `[0, 1]`.
pub fn gajer_bound(family: &[MetricPath], eta: f64) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::Parameter("empty path family".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let grid = crate::numerics::linspace(0.0, 1.0, 201);
    let c = gajer_constant(family, &grid)?;
    if c == 0.0 {
        return Ok(GAJER_CAP);
    }
    Ok(GAJER_CAP.min(eta / (2.0 * c)))
}
