//! Paths of metrics on a fiber: concatenation by a partition of unity and
//! the cylindrical collar built from a path.

use nalgebra::DMatrix;

use crate::curvature::{gajer_bound, scal_trace_path, MetricJet, MetricPath};
use crate::fncore::{integrate_twice, make_piecewise, mollify, Piece, SmoothFn1D};
use crate::numerics::linspace;
use crate::report::CurvatureReport;
use crate::tolerances::FLATNESS;
use crate::{Error, Result};

/// Partition of unity `lambda_{n,i}`, `i = 0..=n`, on the line.
///
/// `lambda_{n,i}` is the indicator of `[(i - 1/2)/n, (i + 1/2)/n)` (the end
/// ones reach to infinity) mollified over radius `1/(8n)`, so its support
/// lies in `((i-1)/n, (i+1)/n)`. Only the `0`-th function is nonzero at
/// `t = 0` and only the `n`-th at `t = 1`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub n: usize,
    /// Mollified unit steps at `(i - 1/2)/n` for `i = 1..=n`.
    steps: Vec<SmoothFn1D>,
}

impl Partition {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("partition needs n >= 1".into()));
        }
        let nf = n as f64;
        let steps = (1..=n)
            .map(|i| {
                let at = (i as f64 - 0.5) / nf;
                let step = make_piecewise(vec![-2.0, at, 3.0], vec![Piece::constant(0.0), Piece::constant(1.0)])?;
                mollify(&step, 0.5 / nf)
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, steps })
    }

    /// Mollification radius.
    pub fn radius(&self) -> f64 {
        0.125 / self.n as f64
    }

    fn step(&self, i: usize, t: f64) -> [f64; 3] {
        if i == 0 {
            return [1.0, 0.0, 0.0];
        }
        if i > self.n {
            return [0.0, 0.0, 0.0];
        }
        let j = self.steps[i - 1].jet(t.clamp(-2.0, 3.0));
        [j.value, j.d1, j.d2]
    }

    /// Nonzero `(i, [lambda, lambda', lambda''])` at `t`.
    pub fn weights(&self, t: f64) -> Vec<(usize, [f64; 3])> {
        let n = self.n;
        let centre = (t * n as f64).round().clamp(0.0, n as f64) as usize;
        let mut out = Vec::with_capacity(3);
        for i in centre.saturating_sub(1)..=(centre + 1).min(n) {
            let (a, b) = (self.step(i, t), self.step(i + 1, t));
            let w = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            if w != [0.0; 3] {
                out.push((i, w));
            }
        }
        out
    }
}

/// `C_n(s, t) = sum_i G(s i/n) lambda_{n,i}(t)` as a path in `t`.
pub fn path_concat_approx(g: &MetricPath, n: usize, s: f64) -> Result<MetricPath> {
    let part = Partition::new(n)?;
    let d = g.d;
    let nodes: Vec<DMatrix<f64>> = (0..=n).map(|i| g.jet(s * i as f64 / n as f64).g).collect();
    Ok(MetricPath::new(d, g.spatial_scal, move |t| {
        let mut j = MetricJet {
            g: DMatrix::zeros(d, d),
            dg: DMatrix::zeros(d, d),
            ddg: DMatrix::zeros(d, d),
        };
        for (i, w) in part.weights(t) {
            j.g += &nodes[i] * w[0];
            j.dg += &nodes[i] * w[1];
            j.ddg += &nodes[i] * w[2];
        }
        j
    }))
}

/// Largest entry of `C_n(s, t) - G(st)` over the two grids.
pub fn concat_sup_distance(g: &MetricPath, n: usize, s_grid: &[f64], t_grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &s in s_grid {
        let c = path_concat_approx(g, n, s)?;
        for &t in t_grid {
            let diff = c.jet(t).g - g.jet(s * t).g;
            worst = worst.max(diff.amax());
        }
    }
    Ok(worst)
}

/// Smooth step `f` with `f = 0` near `(-inf, 0]` and `f = 1` near `[1, inf)`.
#[derive(Debug, Clone)]
pub struct StepProfile {
    pub f: SmoothFn1D,
    /// `sup |f'|`.
    pub d1_max: f64,
    /// `sup |f''|`.
    pub d2_max: f64,
}

/// Second derivative of the collar step: `+-ACCEL` on two halves.
pub const ACCEL: f64 = 5.0;

/// `f'' = ACCEL` on `[c, 1/2]` and `-ACCEL` on `[1/2, 1 - c]` with `c`
/// fixed by `f(1) = 1`, mollified over radius `0.025`.
pub fn step_profile() -> Result<StepProfile> {
    let half = (1.0 / ACCEL).sqrt();
    let c = 0.5 - half;
    let w = make_piecewise(
        vec![-2.0, c, 0.5, 1.0 - c, 3.0],
        vec![
            Piece::constant(0.0),
            Piece::constant(ACCEL),
            Piece::constant(-ACCEL),
            Piece::constant(0.0),
        ],
    )?;
    let f = integrate_twice(&mollify(&w, 0.1)?, -2.0, 0.0, 0.0)?;
    Ok(StepProfile {
        f,
        d1_max: ACCEL * half,
        d2_max: ACCEL,
    })
}

/// One cylinder `dt^2 + C(s, f(t / a(s)))`.
#[derive(Debug, Clone)]
pub struct CollarSlice {
    pub s: f64,
    /// Slope bound from the Gajer estimate.
    pub lambda: f64,
    pub a: f64,
    pub path: MetricPath,
}

#[derive(Debug, Clone)]
pub struct CollarTransition {
    pub slices: Vec<CollarSlice>,
    /// `sup a(s)`; every slice is a product for `t <= 0` and `t >= b`.
    pub b: f64,
    pub report: CurvatureReport,
}

/// Stretch each path `C(s, .)` into a cylinder over `[0, a(s)]` with
/// `a(s) = max(sqrt(M2/Lambda), M1/Lambda) + 1`, where `M1, M2` bound the
/// step profile's derivatives, then check `scal >= min spatial scal - eta`
/// and that the cylinders are products at both ends.
pub fn collar_transition(paths: &[(f64, MetricPath)], eta: f64) -> Result<CollarTransition> {
    if paths.is_empty() {
        return Err(Error::Parameter("no paths".into()));
    }
    let prof = step_profile()?;
    let mut slices = Vec::with_capacity(paths.len());
    for (s, p) in paths {
        let lambda = gajer_bound(std::slice::from_ref(p), eta)?;
        let a = (prof.d2_max / lambda).sqrt().max(prof.d1_max / lambda) + 1.0;
        slices.push(CollarSlice {
            s: *s,
            lambda,
            a,
            path: p.clone(),
        });
    }
    let b = slices.iter().map(|c| c.a).fold(0.0, f64::max);
    let f = prof.f.extend_constant(b + 2.0);
    for c in &mut slices {
        let stretch = SmoothFn1D::identity(-1.0, b + 1.0).affine(1.0 / c.a, 0.0, 0.0, 0.0);
        c.path = c.path.reparametrised(SmoothFn1D::compose(&f, &stretch));
    }

    let floor = paths.iter().map(|(_, p)| p.spatial_scal).fold(f64::INFINITY, f64::min);
    let mut rep = CurvatureReport::new("collar_transition", floor - eta);
    let (mut below, mut above) = (f64::INFINITY, f64::INFINITY);
    for c in &slices {
        for t in linspace(-0.5, b + 0.5, 301) {
            rep.push(&[("s", c.s), ("t", t)], scal_trace_path(&c.path, t)?);
        }
        let moving = |t: f64| {
            let j = c.path.jet(t);
            j.dg.amax().max(j.ddg.amax())
        };
        for t in linspace(-1.0, 0.0, 21) {
            below = below.min(FLATNESS - moving(t));
        }
        for t in linspace(b, b + 1.0, 21) {
            above = above.min(FLATNESS - moving(t));
        }
    }
    rep.condition("cylindrical_for_t_le_0", below);
    rep.condition("cylindrical_for_t_ge_b", above);
    Ok(CollarTransition {
        slices,
        b,
        report: rep.finish(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    fn linear_fixture() -> MetricPath {
        MetricPath::linear(spd(1.0, 0.2, 1.5), spd(2.0, -0.3, 0.8), 0.0)
    }

    #[test]
    fn partition_sums_to_one_and_is_subordinate() {
        for n in [1, 3, 8] {
            let p = Partition::new(n).unwrap();
            for t in linspace(-0.3, 1.3, 801) {
                let w = p.weights(t);
                let sum: f64 = w.iter().map(|(_, v)| v[0]).sum();
                assert!((sum - 1.0).abs() < 1e-13, "t = {t}");
                for (i, v) in w {
                    assert!(v[0] >= -1e-15);
                    let lo = if i == 0 { f64::NEG_INFINITY } else { (i as f64 - 1.0) / n as f64 };
                    let hi = if i == n { f64::INFINITY } else { (i as f64 + 1.0) / n as f64 };
                    assert!(t > lo && t < hi, "lambda_{i} nonzero at {t}");
                }
            }
            assert_eq!(p.weights(0.0), vec![(0, [1.0, 0.0, 0.0])]);
            assert_eq!(p.weights(1.0), vec![(n, [1.0, 0.0, 0.0])]);
        }
    }

    #[test]
    fn constant_path_is_reproduced() {
        let g = MetricPath::constant(spd(1.0, 0.1, 2.0), 0.0);
        for t in linspace(0.0, 1.0, 51) {
            let c = path_concat_approx(&g, 5, 0.7).unwrap().jet(t);
            assert!((c.g - spd(1.0, 0.1, 2.0)).amax() < 1e-15);
            assert!(c.dg.amax() < 1e-12);
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let g = linear_fixture();
        for n in [1, 4, 7] {
            for s in [0.0, 0.3, 1.0] {
                let c = path_concat_approx(&g, n, s).unwrap();
                assert_eq!(c.jet(0.0).g, g.jet(0.0).g);
                assert_eq!(c.jet(1.0).g, g.jet(s).g);
            }
        }
    }

    #[test]
    fn doubling_halves_the_error() {
        let g = linear_fixture();
        let ss = linspace(0.0, 1.0, 5);
        let ts = linspace(0.0, 1.0, 2001);
        let e4 = concat_sup_distance(&g, 4, &ss, &ts).unwrap();
        let e8 = concat_sup_distance(&g, 8, &ss, &ts).unwrap();
        assert!(e8 / e4 <= 0.6 && e8 / e4 > 0.3, "{e4} {e8}");
    }

    #[test]
    fn step_profile_bounds() {
        let p = step_profile().unwrap();
        for t in linspace(-1.0, 2.0, 3001) {
            let j = p.f.jet(t);
            assert!(j.d1.abs() <= p.d1_max + 1e-12 && j.d2.abs() <= p.d2_max + 1e-12);
            if t <= 0.02 {
                assert_eq!((j.value, j.d1), (0.0, 0.0));
            }
            if t >= 0.98 {
                assert!((j.value - 1.0).abs() < 1e-14 && j.d1.abs() < 1e-14);
            }
        }
        assert!(p.d1_max <= 3.0);
    }

    #[test]
    fn constant_path_gives_a_cylinder() {
        let g = MetricPath::constant(spd(1.0, 0.0, 1.0), 2.0);
        let c = collar_transition(&[(0.0, g)], 0.1).unwrap();
        assert!(c.report.pass);
        assert!((c.report.min_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conformal_torus_stays_above_floor() {
        let paths: Vec<(f64, MetricPath)> = linspace(0.0, 1.0, 5)
            .into_iter()
            .map(|s| {
                let phi = SmoothFn1D::sin(-3.0, 3.0).affine(0.4 * s, 0.0, 0.0, 0.0);
                (s, MetricPath::conformal(2, phi))
            })
            .collect();
        let c = collar_transition(&paths, 0.1).unwrap();
        assert!(c.report.pass, "{} {:?}", c.report.min_value, c.report.conditions);
        assert!(c.report.min_value >= -0.1);
        assert!(c.slices.iter().all(|s| s.a <= c.b));
    }
}
