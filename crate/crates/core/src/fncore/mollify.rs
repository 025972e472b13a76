//! The bump `xi`, its scaled copies and convolution against piecewise data.

use std::sync::OnceLock;

use super::{JetValue, PiecewiseFn};
use crate::numerics::gauss_legendre;

/// Half-width of the bump support in unit coordinates.
pub const SUPPORT: f64 = 0.25;

// Quadrature runs in `s` with `x = tanh(s) / 4`, which turns the flat ends
// of the bump into a doubly exponential decay. Beyond |s| = 3 the weight is
// below exp(-100).
const S_MAX: f64 = 3.0;
const PANELS: usize = 4;
const PANEL_DEGREE: usize = 16;

fn exponent(x: f64) -> f64 {
    -1.0 / (1.0 - 16.0 * x * x)
}

/// Normalisation constant of the bump, computed once with 64-node
/// Gauss-Legendre on the support.
pub fn bump_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let integral: f64 = gauss_legendre(64)
            .iter()
            .map(|&(u, w)| w * S_MAX * substituted(S_MAX * u))
            .sum();
        1.0 / integral
    })
}

/// Value and first two derivatives of the unit bump at `x`.
pub fn bump(x: f64) -> [f64; 3] {
    if x.abs() >= SUPPORT {
        return [0.0; 3];
    }
    let q = 1.0 - 16.0 * x * x;
    let g1 = -32.0 * x / (q * q);
    let g2 = -32.0 / (q * q) - 2048.0 * x * x / (q * q * q);
    let e = bump_constant() * exponent(x).exp();
    [e, e * g1, e * (g2 + g1 * g1)]
}

/// `xi_eps^{(n)}(tau)` for `n` in `0..3`, where `xi_eps(tau) = xi(tau/eps)/eps`.
pub fn scaled_bump(tau: f64, eps: f64) -> [f64; 3] {
    let b = bump(tau / eps);
    [b[0] / eps, b[1] / (eps * eps), b[2] / (eps * eps * eps)]
}

/// `exp(-1/(1-16x^2)) dx/ds` at `x = tanh(s)/4`.
fn substituted(s: f64) -> f64 {
    let c = s.cosh();
    SUPPORT * (-c * c).exp() / (c * c)
}

struct UnitRule {
    nodes: Vec<(f64, f64)>,
}

fn unit_rule() -> &'static UnitRule {
    static R: OnceLock<UnitRule> = OnceLock::new();
    R.get_or_init(|| UnitRule {
        nodes: panel_rule(&[]),
    })
}

/// Nodes `x` and weights on the support, with panels split at the given
/// unit offsets (where the integrand may jump).
pub(crate) fn panel_rule(splits: &[f64]) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(PANEL_DEGREE);
    let c = bump_constant();
    let width = 2.0 * S_MAX / PANELS as f64;
    let split_s: Vec<f64> = splits
        .iter()
        .filter(|x| x.abs() < SUPPORT)
        .map(|x| (x / SUPPORT).atanh())
        .filter(|s| s.abs() < S_MAX)
        .collect();
    let mut out = Vec::with_capacity(PANELS * PANEL_DEGREE * 2);
    for p in 0..PANELS {
        let lo = -S_MAX + width * p as f64;
        let hi = if p + 1 == PANELS { S_MAX } else { lo + width };
        let mut cuts = vec![lo];
        let mut inner: Vec<f64> = split_s.iter().copied().filter(|s| *s > lo && *s < hi).collect();
        inner.sort_by(f64::total_cmp);
        cuts.extend(inner);
        cuts.push(hi);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(u, wt) in gl {
                let sv = mid + half * u;
                out.push((SUPPORT * sv.tanh(), wt * half * c * substituted(sv)));
            }
        }
    }
    out
}

/// Unsplit quadrature rule for the unit bump.
pub(crate) fn unit_nodes() -> &'static [(f64, f64)] {
    &unit_rule().nodes
}

/// `int x^n xi(x) dx` for the unit bump.
pub fn bump_moment(n: u32) -> f64 {
    unit_nodes().iter().map(|&(x, w)| w * x.powi(n as i32)).sum()
}

/// Jet of `xi_eps * f` at `t`, with derivatives of the convolution built
/// from the piecewise derivatives plus the jump contributions at
/// breakpoints inside the support.
pub(crate) fn convolve(f: &PiecewiseFn, eps: f64, t: f64) -> JetValue {
    let reach = SUPPORT * eps;
    let interior = f.interior_breakpoints();
    let first = interior.partition_point(|b| *b <= t - reach);
    let last = interior.partition_point(|b| *b < t + reach);
    let near = &interior[first..last];

    let owned;
    let rule: &[(f64, f64)] = if near.is_empty() {
        &unit_rule().nodes
    } else {
        let splits: Vec<f64> = near.iter().map(|b| (t - b) / eps).collect();
        owned = panel_rule(&splits);
        &owned
    };

    let centre = f.jet(t);
    let c = [centre.value, centre.d1, centre.d2, centre.d3, centre.om1];
    let mut acc = [0.0; 5];
    for &(x, w) in rule {
        let j = f.jet(t - eps * x);
        let v = [j.value, j.d1, j.d2, j.d3, j.om1];
        for k in 0..5 {
            acc[k] += w * (v[k] - c[k]);
        }
    }
    let mut out = [0.0; 5];
    for k in 0..5 {
        out[k] = c[k] + acc[k];
    }

    for (offset, _) in near.iter().enumerate() {
        let i = 1 + first + offset;
        let b = f.breakpoints[i];
        let jump = f.jump(i);
        let xi = scaled_bump(t - b, eps);
        out[1] += jump[0] * xi[0];
        out[4] -= jump[0] * xi[0];
        out[2] += jump[1] * xi[0] + jump[0] * xi[1];
        out[3] += jump[2] * xi[0] + jump[1] * xi[1] + jump[0] * xi[2];
    }

    JetValue {
        value: out[0],
        d1: out[1],
        d2: out[2],
        d3: out[3],
        om1: out[4],
    }
}

/// Direct quadrature of `int xi_eps(tau) g(t - tau) dtau` with a fine
/// composite rule. Used as an independent check of [`convolve`].
pub fn reference_convolution<G: Fn(f64) -> f64>(g: G, eps: f64, t: f64, splits: &[f64]) -> f64 {
    let reach = SUPPORT * eps;
    let mut cuts = vec![-reach];
    let mut inner: Vec<f64> = splits
        .iter()
        .map(|b| t - b)
        .filter(|tau| tau.abs() < reach)
        .collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(reach);
    cuts.windows(2)
        .map(|w| {
            crate::numerics::integrate_composite(w[0], w[1], 32, 32, |tau| {
                scaled_bump(tau, eps)[0] * g(t - tau)
            })
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_has_unit_mass() {
        let m = crate::numerics::integrate_composite(-SUPPORT, SUPPORT, 64, 32, |x| bump(x)[0]);
        assert!((m - 1.0).abs() < 1e-12);
        let rule: f64 = unit_rule().nodes.iter().map(|p| p.1).sum();
        assert!((rule - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        for &x in &[-0.2, -0.05, 0.0, 0.1, 0.22] {
            let h = 1e-6;
            let b = bump(x);
            let d1 = (bump(x + h)[0] - bump(x - h)[0]) / (2.0 * h);
            let d2 = (bump(x + h)[1] - bump(x - h)[1]) / (2.0 * h);
            assert!((b[1] - d1).abs() < 1e-5 * (1.0 + b[1].abs()));
            assert!((b[2] - d2).abs() < 1e-4 * (1.0 + b[2].abs()));
        }
    }

    #[test]
    fn bump_is_even() {
        for &x in &[0.01, 0.1, 0.2, 0.249] {
            assert_eq!(bump(x)[0], bump(-x)[0]);
        }
    }
}
