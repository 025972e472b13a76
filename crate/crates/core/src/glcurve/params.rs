use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Constants of the bent-tube construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLParams {
    pub k: usize,
    pub eta: f64,
    pub eps0: f64,
    pub ell: f64,
    pub r0: f64,
    pub rho: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub base_scal: f64,
    pub a: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub theta0: f64,
    pub q: f64,
    pub step_delta: f64,
    pub omega: f64,
    pub moll_u: f64,
}

/// `-2/a + k - 2`; the bend keeps the curvature bound only when positive.
pub fn variant_feasibility(k: usize, a: f64) -> f64 {
    -2.0 / a + k as f64 - 2.0
}

/// Name used for the bend constraint in infeasibility errors.
pub const BEND_CONSTRAINT: &str = "-2/a+k-2 > 0";

/// Pick constants with `a = 2/(k-2) + 1`.
pub fn select_parameters(k: usize, eta: f64, eps0: f64, ell: f64, r0: f64, c: f64, base_scal: f64) -> Result<GLParams> {
    select_parameters_with(k, eta, eps0, ell, r0, c, base_scal, None)
}

/// As [`select_parameters`], optionally forcing the bend exponent `a`.
#[allow(clippy::too_many_arguments)]
pub fn select_parameters_with(
    k: usize,
    eta: f64,
    eps0: f64,
    ell: f64,
    r0: f64,
    c: f64,
    base_scal: f64,
    force_a: Option<f64>,
) -> Result<GLParams> {
    if k < 3 {
        return Err(Error::Parameter(format!("need k >= 3, got {k}")));
    }
    for (name, v) in [("eta", eta), ("eps0", eps0), ("ell", ell), ("r0", r0)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("C must be non-negative, got {c}")));
    }
    let kf = k as f64;
    let a = force_a.unwrap_or(2.0 / (kf - 2.0) + 1.0);
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("a must be positive, got {a}")));
    }
    let feas = variant_feasibility(k, a);
    if !(feas > 0.0) {
        return Err(Error::infeasible(
            BEND_CONSTRAINT,
            format!("k = {k}, a = {a} gives {feas}; the bend radius bound has no positive value"),
        ));
    }

    let rho = 2.0 * r0;
    let r1 = r0;
    let r2 = if c > 0.0 { r1.min((kf - 1.0) / c) } else { 0.5 * r1 };
    let r3 = 0.5 * r2;
    let step_delta = 0.25 * (r2 - r3);
    let q = eta / (2.0 * (2.0 * (kf - 1.0) / r3 + c));
    let theta0 = q * step_delta;
    if !(theta0 < std::f64::consts::FRAC_PI_2) {
        return Err(Error::infeasible("q delta < pi/2", format!("theta0 = {theta0}")));
    }
    let mut r4 = eps0.min(0.5 * r3);
    if c > 0.0 {
        let s = theta0.sin();
        r4 = r4.min((kf - 1.0) * s * s * feas / (c * (1.0 + 1.0 / a)));
    }
    let r5 = r4 * theta0.sin().powf(a);
    if !(r5 > 0.0) {
        return Err(Error::infeasible("r5 > 0", format!("r4 = {r4}, theta0 = {theta0}, a = {a}")));
    }
    let omega = r5.min(2.0 * step_delta).min(2.0 * ell) / 16.0;
    Ok(GLParams {
        k,
        eta,
        eps0,
        ell,
        r0,
        rho,
        c,
        base_scal,
        a,
        r1,
        r2,
        r3,
        r4,
        r5,
        theta0,
        q,
        step_delta,
        omega,
        moll_u: 0.5 * omega,
    })
}

impl GLParams {
    /// Worst margin of `r5 <= r4 <= min(eps0, r3) < r3 < r2 <= r1 <= r0 < rho`,
    /// `theta0 < pi/2` and `a > 2/(k-2)`. A strict inequality with zero
    /// margin counts as negative, so the chain holds exactly when this is
    /// non-negative.
    pub fn ordering_margin(&self) -> f64 {
        let loose = [
            self.r4 - self.r5,
            self.eps0.min(self.r3) - self.r4,
            self.r1 - self.r2,
            self.r0 - self.r1,
        ];
        let strict = [
            self.r3 - self.r4,
            self.r2 - self.r3,
            self.rho - self.r0,
            std::f64::consts::FRAC_PI_2 - self.theta0,
            self.a - 2.0 / (self.k as f64 - 2.0),
        ];
        let strict = strict
            .into_iter()
            .map(|m| if m > 0.0 { m } else { m.min(-f64::MIN_POSITIVE) })
            .fold(f64::INFINITY, f64::min);
        loose.into_iter().fold(strict, f64::min)
    }

    /// `eta/2 - q (2(k-1)/r3 + C)`.
    pub fn q_certificate(&self) -> f64 {
        0.5 * self.eta - self.q * (2.0 * (self.k as f64 - 1.0) / self.r3 + self.c)
    }

    /// Distance of `r4` below its admissible maximum.
    pub fn r4_certificate(&self) -> f64 {
        let mut bound = self.eps0.min(self.r3);
        if self.c > 0.0 {
            let s = self.theta0.sin();
            let kf = self.k as f64;
            bound = bound.min((kf - 1.0) * s * s * variant_feasibility(self.k, self.a) / (self.c * (1.0 + 1.0 / self.a)));
        }
        bound - self.r4
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_values() {
        assert_eq!(variant_feasibility(3, 2.0), 0.0);
        assert_eq!(variant_feasibility(5, 2.0), 2.0);
        assert_eq!(variant_feasibility(3, 4.0), 0.5);
    }

    #[test]
    fn default_exponent_is_feasible_for_k3() {
        let p = select_parameters(3, 0.1, 0.1, 2.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(p.a, 3.0);
        assert!(p.ordering_margin() >= 0.0);
        assert!(p.q_certificate() >= 0.0 && p.r4_certificate() >= 0.0);
    }

    #[test]
    fn forcing_a2_at_k3_names_the_constraint() {
        match select_parameters_with(3, 0.1, 0.1, 2.0, 1.0, 0.0, 0.0, Some(2.0)) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, BEND_CONSTRAINT),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(select_parameters_with(3, 0.1, 0.1, 2.0, 1.0, 0.0, 0.0, Some(2.5)).is_ok());
        assert!(select_parameters_with(5, 0.1, 0.1, 2.0, 1.0, 0.0, 0.0, Some(2.0)).is_ok());
    }

    #[test]
    fn positive_c_caps_radii() {
        let p = select_parameters(4, 0.1, 0.1, 1.0, 1.0, 5.0, 1.0).unwrap();
        assert!(p.r2 <= 3.0 / 5.0);
        assert!(p.ordering_margin() >= 0.0);
        assert!(p.r4_certificate() >= 0.0);
    }
}
