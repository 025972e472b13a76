//! Quadrature, scalar root finding and an adaptive Dormand-Prince integrator.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use roots::{find_root_brent, Convergency};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn rule(n: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(NonZeroUsize::new(n).expect("positive degree"));
    let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, sorted by node.
///
/// Supported degrees are 8, 16, 32 and 64.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    static G8: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static G16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static G32: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static G64: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    match n {
        8 => G8.get_or_init(|| rule(8)),
        16 => G16.get_or_init(|| rule(16)),
        32 => G32.get_or_init(|| rule(32)),
        64 => G64.get_or_init(|| rule(64)),
        _ => panic!("unsupported Gauss-Legendre degree {n}"),
    }
}

/// Composite Gauss-Legendre rule with `panels` equal panels of degree `n`.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
    mut f: F,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let nodes = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut acc = 0.0;
        for &(x, w) in nodes {
            acc += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * acc;
    }
    total
}

/// Adaptive bisection of Gauss-Legendre panels until two resolutions agree
/// to `tol` (absolute plus relative).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    fn panel<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> f64 {
        integrate_composite(a, b, 1, 16, f)
    }
    fn recurse<F: FnMut(f64) -> f64>(a: f64, b: f64, whole: f64, tol: f64, depth: u32, f: &mut F) -> f64 {
        let m = 0.5 * (a + b);
        let left = panel(a, m, f);
        let right = panel(m, b, f);
        let halves = left + right;
        if depth == 0 || (halves - whole).abs() <= tol * (1.0 + halves.abs()) {
            return halves;
        }
        recurse(a, m, left, 0.5 * tol, depth - 1, f) + recurse(m, b, right, 0.5 * tol, depth - 1, f)
    }
    if a == b {
        return 0.0;
    }
    let whole = panel(a, b, &mut f);
    recurse(a, b, whole, tol, 30, &mut f)
}

struct RelativeTolerance {
    rtol: f64,
    atol: f64,
    max_iter: usize,
}

impl Convergency<f64> for RelativeTolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.atol + self.rtol * x1.abs().max(x2.abs())
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Brent's method on a bracketing interval with a relative tolerance on `x`.
pub fn brent<F: FnMut(f64) -> f64>(a: f64, b: f64, rtol: f64, f: F) -> Result<f64> {
    let mut conv = RelativeTolerance {
        rtol,
        atol: 1e-300,
        max_iter: 500,
    };
    find_root_brent(a, b, f, &mut conv).map_err(|e| Error::Solver(format!("brent on [{a}, {b}]: {e}")))
}

/// Plain bisection for predicates that are monotone on `[lo, hi]`.
///
/// Returns the boundary between `pred == true` (at `lo`) and `pred == false`
/// (at `hi`), located to absolute width `tol`.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, mut pred: P) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `n` points evenly spaced on `[a, b]` including both ends.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Right-hand side of a first-order system `y' = F(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// One Dormand-Prince step. Returns the fifth-order solution and the
/// embedded error estimate.
pub fn dp45_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N]) {
    let k1 = sys.rhs(t, y);
    let k2 = sys.rhs(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
    let k3 = sys.rhs(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = sys.rhs(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = sys.rhs(
        t + h,
        &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y5 = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = sys.rhs(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err)
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: crate::tolerances::RK_TOLERANCE,
            atol: crate::tolerances::RK_TOLERANCE,
            h0: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Accepted steps of an adaptive integration. Intermediate values are
/// recovered by a single fifth-order step from the preceding node, which is
/// no longer than an accepted step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory<const N: usize> {
    #[serde(with = "node_serde")]
    pub nodes: Vec<(f64, [f64; N])>,
}

mod node_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[(f64, [f64; N])], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = v
            .iter()
            .map(|(t, y)| std::iter::once(*t).chain(y.iter().copied()).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<Vec<(f64, [f64; N])>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                if r.len() != N + 1 {
                    return Err(serde::de::Error::custom("trajectory row has wrong length"));
                }
                let mut y = [0.0; N];
                y.copy_from_slice(&r[1..]);
                Ok((r[0], y))
            })
            .collect()
    }
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.nodes[0].0
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].0
    }

    /// State at `t`, clamped to the integrated range.
    pub fn state_at<S: OdeSystem<N> + ?Sized>(&self, sys: &S, t: f64) -> [f64; N] {
        let forward = self.t_end() >= self.t_start();
        let idx = if forward {
            self.nodes.partition_point(|(tn, _)| *tn <= t)
        } else {
            self.nodes.partition_point(|(tn, _)| *tn >= t)
        };
        if idx == 0 {
            return self.nodes[0].1;
        }
        let (tn, yn) = self.nodes[idx - 1];
        if t == tn || idx == self.nodes.len() {
            return yn;
        }
        dp45_step(sys, tn, &yn, t - tn).0
    }
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub trajectory: Trajectory<N>,
    /// Location of the terminal event, if one fired.
    pub event: Option<f64>,
}

fn error_norm<const N: usize>(y: &[f64; N], y_new: &[f64; N], err: &[f64; N], opts: &OdeOptions) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        m = m.max((err[i] / sc).abs());
    }
    m
}

/// Integrate from `t0` towards `t_end` (either direction). If `event` is
/// given, integration stops where it changes sign; the crossing is located
/// by bisection on the step length to `event_tol`.
pub fn integrate<const N: usize, S, E>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut event: Option<E>,
    event_tol: f64,
) -> Result<OdeSolution<N>>
where
    S: OdeSystem<N> + ?Sized,
    E: FnMut(f64, &[f64; N]) -> f64,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut nodes = vec![(t0, y0)];
    if span == 0.0 {
        return Ok(OdeSolution {
            trajectory: Trajectory { nodes },
            event: None,
        });
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h0.min(span).min(opts.h_max);
    let mut g_prev = event.as_mut().map(|e| e(t, &y));
    for _ in 0..opts.max_steps {
        let remaining = (t_end - t).abs();
        if remaining <= 1e-15 * (1.0 + t_end.abs()) {
            break;
        }
        h = h.min(remaining);
        let (y_new, err) = dp45_step(sys, t, &y, dir * h);
        let en = error_norm(&y, &y_new, &err, opts);
        if !en.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            if h < 1e-300 {
                return Err(Error::Solver(format!("non-finite state near t = {t}")));
            }
            continue;
        }
        if en <= 1.0 {
            let t_new = if h == remaining { t_end } else { t + dir * h };
            if let (Some(e), Some(gp)) = (event.as_mut(), g_prev) {
                let g_new = e(t_new, &y_new);
                if gp != 0.0 && (g_new == 0.0 || g_new.signum() != gp.signum()) {
                    let (mut lo, mut hi) = (0.0, h);
                    let mut iters = 0;
                    while hi - lo > event_tol {
                        let mid = 0.5 * (lo + hi);
                        let ym = dp45_step(sys, t, &y, dir * mid).0;
                        let gm = e(t + dir * mid, &ym);
                        if gm != 0.0 && gm.signum() == gp.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        iters += 1;
                        if iters > 200 {
                            return Err(Error::Solver("event bisection did not converge".into()));
                        }
                    }
                    let te = t + dir * hi;
                    let ye = dp45_step(sys, t, &y, dir * hi).0;
                    nodes.push((te, ye));
                    return Ok(OdeSolution {
                        trajectory: Trajectory { nodes },
                        event: Some(te),
                    });
                }
                g_prev = Some(g_new);
            }
            t = t_new;
            y = y_new;
            nodes.push((t, y));
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.h_max);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Solver(format!("step size underflow near t = {t}")));
        }
    }
    if (t_end - t).abs() > 1e-15 * (1.0 + t_end.abs()) {
        return Err(Error::Solver("step limit reached".into()));
    }
    Ok(OdeSolution {
        trajectory: Trajectory { nodes },
        event: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl OdeSystem<2> for Harmonic {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let v = integrate_composite(0.0, 2.0, 1, 8, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_kink() {
        let v = integrate_adaptive(-1.0, 2.0, 1e-12, |x: f64| x.abs());
        assert!((v - 2.5).abs() < 1e-10);
    }

    #[test]
    fn brent_finds_cos_root() {
        let r = brent(1.0, 2.0, 1e-15, f64::cos).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let sol = integrate(
            &Harmonic,
            0.0,
            [0.0, 1.0],
            10.0,
            &OdeOptions::default(),
            None::<fn(f64, &[f64; 2]) -> f64>,
            1e-12,
        )
        .unwrap();
        let y = sol.trajectory.state_at(&Harmonic, 7.3);
        assert!((y[0] - 7.3f64.sin()).abs() < 1e-8);
        assert!((y[1] - 7.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn event_locates_first_zero_of_velocity() {
        let sol = integrate(
            &Harmonic,
            0.0,
            [0.0, 1.0],
            10.0,
            &OdeOptions::default(),
            Some(|_t: f64, y: &[f64; 2]| y[1]),
            1e-12,
        )
        .unwrap();
        assert!((sol.event.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn backwards_integration() {
        let sol = integrate(
            &Harmonic,
            1.0,
            [1f64.sin(), 1f64.cos()],
            -2.0,
            &OdeOptions::default(),
            None::<fn(f64, &[f64; 2]) -> f64>,
            1e-12,
        )
        .unwrap();
        let y = sol.trajectory.nodes.last().unwrap().1;
        assert!((y[0] - (-2f64).sin()).abs() < 1e-8);
    }
}
