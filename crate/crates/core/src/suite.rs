//! Seeded cross-module identity checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{fd_oracle_scal, scal_revolution, scal_trace_path, sigma_from_jet, sigma_warp, MetricPath, WarpSpec};
use crate::fncore::{make_piecewise, mollify, scale_warp, JetValue, Piece, SmoothFn1D, Term};
use crate::glcurve::{bend_profile_solve, curve_from_curvature, CurveJet};
use crate::numerics::linspace;
use crate::report::CurvatureReport;
use crate::tolerances::{BEND_DRIFT, MOLLIFY_AFFINE};
use crate::torpedo::build_torpedo;
use crate::Result;

pub const REVOLUTION_TOL: f64 = 1e-8;
pub const SCALING_TOL: f64 = 1e-10;
pub const TERMINAL_TOL: f64 = 1e-6;
pub const ORACLE_TOL: f64 = 1e-5;

/// Worst error of one identity over its seeded instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &str, errors: &[f64], tolerance: f64) -> Self {
        let max_error = errors.iter().copied().map(|e| if e.is_nan() { f64::INFINITY } else { e }).fold(0.0, f64::max);
        Self {
            name: name.into(),
            cases: errors.len(),
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        }
    }

    /// As a report whose margin is `tolerance - max_error`.
    pub fn to_report(&self) -> CurvatureReport {
        let mut r = CurvatureReport::new(self.name.clone(), -self.tolerance);
        r.push(&[("cases", self.cases as f64)], -self.max_error);
        r.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuite {
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

/// Run every identity with instances drawn from `seed`.
pub fn verify_identities(seed: u64) -> Result<IdentitySuite> {
    let (drift, terminal) = conserved_quantity(seed, 20)?;
    let checks = vec![
        revolution_identity(seed, 20)?,
        scaling_identity(seed, 20)?,
        drift,
        terminal,
        mollifier_affine_exactness(seed, 100)?,
        oracle_agreement(seed, 10)?,
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentitySuite { seed, checks, pass })
}

fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Hypersurface curvature `2 sum lambda_i lambda_j` against the warped
/// formula for the radius profile, along random curves and `k = 3, 4, 5`.
pub fn revolution_identity(seed: u64, curves: usize) -> Result<IdentityCheck> {
    let mut rng = stream(seed, 1);
    let s_max = 0.8;
    let mut errors = Vec::new();
    for _ in 0..curves {
        let terms = (0..3)
            .map(|_| Term::Sin {
                amp: rng.random_range(-1.5..1.5),
                freq: rng.random_range(0.5..4.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        let kappa = SmoothFn1D::from_piece(0.0, s_max, Piece::new(terms))?;
        let start = CurveJet {
            y: 0.0,
            r: 1.0,
            theta: rng.random_range(0.2..PI - 0.2),
            kappa: kappa.value(0.0),
        };
        let curve = curve_from_curvature(kappa, start, s_max)?;
        for s in linspace(0.0, s_max, 200) {
            let cj = curve.jet(s)?;
            // r' = -cos(theta), r'' = kappa sin(theta).
            let radius = JetValue {
                value: cj.r,
                d1: -cj.theta.cos(),
                d2: cj.kappa * cj.theta.sin(),
                d3: 0.0,
                om1: 1.0 + cj.theta.cos(),
            };
            for k in 3..=5 {
                let a = scal_revolution(&curve, k, s, 0.0)?;
                errors.push((a - sigma_from_jet(k, &radius)).abs());
            }
        }
    }
    Ok(IdentityCheck::new("revolution_identity", &errors, REVOLUTION_TOL))
}

/// A concave warping function: a torpedo or a scaled sine on a quarter period.
pub fn random_concave_warp(rng: &mut impl Rng) -> Result<SmoothFn1D> {
    if rng.random_bool(0.5) {
        let delta = rng.random_range(0.4..2.0);
        let eps = rng.random_range(0.02..0.1);
        Ok(build_torpedo(delta, eps)?.f)
    } else {
        let c = rng.random_range(0.5..2.0);
        scale_warp(&SmoothFn1D::sin(0.0, 0.5 * PI), c)
    }
}

/// `sigma(f^theta)(theta t) = sigma(f)(t) / theta^2`, relative to `max(1, |rhs|)`.
pub fn scaling_identity(seed: u64, warps: usize) -> Result<IdentityCheck> {
    let mut rng = stream(seed, 2);
    let mut errors = Vec::new();
    for _ in 0..warps {
        let f = random_concave_warp(&mut rng)?;
        let k = rng.random_range(3..8);
        let wf = WarpSpec::new(k, f.clone(), 0.0)?;
        let hi = f.domain().1;
        for theta in [0.3, 1.0, 2.5] {
            let wg = WarpSpec::new(k, scale_warp(&f, theta)?, 0.0)?;
            for t in linspace(0.0, hi, 50) {
                let lhs = sigma_warp(&wg, theta * t)?;
                let rhs = sigma_warp(&wf, t)? / (theta * theta);
                errors.push((lhs - rhs).abs() / rhs.abs().max(1.0));
            }
        }
    }
    Ok(IdentityCheck::new("scaling_identity", &errors, SCALING_TOL))
}

/// Drift of `h^(1/a) / sqrt(1 + h'^2)` along bend solutions, and the
/// relative error of the terminal value against `C^a`.
pub fn conserved_quantity(seed: u64, runs: usize) -> Result<(IdentityCheck, IdentityCheck)> {
    let mut rng = stream(seed, 3);
    let (mut drift, mut terminal) = (Vec::new(), Vec::new());
    for _ in 0..runs {
        let a = rng.random_range(1.5..4.0);
        let f0 = rng.random_range(0.2..2.0);
        let slope = -rng.random_range(0.1..3.0);
        let p = bend_profile_solve(a, f0, slope, 0.0)?;
        drift.push(p.drift);
        let expected = p.conserved.powf(a);
        terminal.push((p.h.value(p.t_end) - expected).abs() / expected);
    }
    Ok((
        IdentityCheck::new("conserved_quantity_drift", &drift, BEND_DRIFT),
        IdentityCheck::new("terminal_value", &terminal, TERMINAL_TOL),
    ))
}

fn random_piece(rng: &mut impl Rng, origin: f64) -> (Piece, bool) {
    match rng.random_range(0..4) {
        0 => (Piece::affine(origin, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)), true),
        1 => (Piece::constant(rng.random_range(-2.0..2.0)), true),
        2 => (
            Piece::poly(origin, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()),
            false,
        ),
        _ => (
            Piece::new(vec![Term::Sin {
                amp: rng.random_range(-1.0..1.0),
                freq: rng.random_range(0.5..3.0),
                phase: rng.random_range(0.0..2.0 * PI),
            }]),
            false,
        ),
    }
}

/// Mollified value and first two derivatives against the base wherever
/// the base is affine on the whole bump support.
pub fn mollifier_affine_exactness(seed: u64, functions: usize) -> Result<IdentityCheck> {
    let mut rng = stream(seed, 4);
    let mut errors = Vec::new();
    for _ in 0..functions {
        let n = rng.random_range(3..7);
        let mut breaks = vec![0.0];
        for _ in 0..n {
            let last = *breaks.last().unwrap();
            breaks.push(last + rng.random_range(0.3..1.5));
        }
        let (pieces, affine): (Vec<Piece>, Vec<bool>) = breaks[..n].iter().map(|&b| random_piece(&mut rng, b)).unzip();
        let base = make_piecewise(breaks.clone(), pieces)?;
        let eps = rng.random_range(0.05..0.45) * base.shortest_piece();
        let m = mollify(&base, eps)?;
        let reach = 0.25 * eps;
        for (i, w) in breaks.windows(2).enumerate() {
            if !affine[i] || w[1] - w[0] <= 2.0 * reach {
                continue;
            }
            for t in linspace(w[0] + reach, w[1] - reach, 25) {
                let (a, b) = (m.jet(t), base.jet(t));
                errors.push((a.value - b.value).abs().max((a.d1 - b.d1).abs()).max((a.d2 - b.d2).abs()));
            }
        }
    }
    Ok(IdentityCheck::new("mollifier_affine_exactness", &errors, MOLLIFY_AFFINE))
}

/// Relative error `|trace - oracle| / max(1, |oracle|)`.
fn oracle_error(p: &MetricPath, t: f64) -> Result<f64> {
    let d = p.d;
    let a = scal_trace_path(p, t)?;
    let mut point = vec![t];
    point.extend((0..d).map(|i| 0.1 * (i + 1) as f64));
    let b = p.spatial_scal + fd_oracle_scal(&|x: &[f64]| p.total_metric(x), &point, d + 1)?;
    Ok((a - b).abs() / b.abs().max(1.0))
}

/// `exp(2 phi) I_d` with `phi = c sin(w t)`.
pub fn conformal_torus(d: usize, c: f64, w: f64) -> Result<MetricPath> {
    let phi = SmoothFn1D::from_piece(
        -10.0,
        10.0,
        Piece::new(vec![Term::Sin {
            amp: c,
            freq: w,
            phase: 0.0,
        }]),
    )?;
    Ok(MetricPath::conformal(d, phi))
}

/// Closed form `-2d phi'' - d(d+1) phi'^2` for [`conformal_torus`].
pub fn conformal_torus_scal(d: usize, c: f64, w: f64, t: f64) -> f64 {
    let d = d as f64;
    let p1 = c * w * (w * t).cos();
    let p2 = -c * w * w * (w * t).sin();
    -2.0 * d * p2 - d * (d + 1.0) * p1 * p1
}

/// `diag(a_i(t)^2)` with `a_i = 1 + b_i sin(w_i t + phi_i)`, `|b_i| < 1/2`.
pub fn random_diagonal_path(rng: &mut impl Rng, d: usize) -> Result<MetricPath> {
    let a = (0..d)
        .map(|_| {
            SmoothFn1D::from_piece(
                -10.0,
                10.0,
                Piece::new(vec![
                    Term::constant(1.0),
                    Term::Sin {
                        amp: rng.random_range(-0.4..0.4),
                        freq: rng.random_range(0.5..2.5),
                        phase: rng.random_range(0.0..2.0 * PI),
                    },
                ]),
            )
        })
        .collect::<Result<_>>()?;
    Ok(MetricPath::diagonal(a))
}

/// Trace formula against the finite-difference oracle on conformal tori
/// (also against their closed form) and random diagonal paths.
pub fn oracle_agreement(seed: u64, diagonal_paths: usize) -> Result<IdentityCheck> {
    let mut rng = stream(seed, 5);
    let mut errors = Vec::new();
    let ts = linspace(-1.0, 1.0, 7);
    for d in 1..=3 {
        for (c, w) in [(0.3, 1.0), (0.5, 2.0)] {
            let p = conformal_torus(d, c, w)?;
            for &t in &ts {
                errors.push(oracle_error(&p, t)?);
                let exact = conformal_torus_scal(d, c, w, t);
                errors.push((scal_trace_path(&p, t)? - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    for _ in 0..diagonal_paths {
        let d = rng.random_range(1..4);
        let p = random_diagonal_path(&mut rng, d)?;
        for &t in &ts {
            errors.push(oracle_error(&p, t)?);
        }
    }
    Ok(IdentityCheck::new("oracle_agreement", &errors, ORACLE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seed_passes() {
        let s = verify_identities(0).unwrap();
        for c in &s.checks {
            assert!(c.pass, "{c:?}");
            assert!(c.cases > 0);
        }
        assert!(s.pass);
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(scaling_identity(9, 3).unwrap(), scaling_identity(9, 3).unwrap());
    }

    #[test]
    fn report_margin_is_the_slack() {
        let c = IdentityCheck::new("x", &[1e-12, 3e-12], 1e-10);
        let r = c.to_report();
        assert!(r.pass && (r.margin - (1e-10 - 3e-12)).abs() < 1e-24);
        assert!(!IdentityCheck::new("y", &[f64::NAN], 1.0).pass);
    }
}
