//! The bend as a function of its angle.
//!
//! Along a solution of `h'' = (1 + h'^2)/(a h)` the quantity
//! `h^(1/a) sin(theta)` is constant, so the bend from angle `theta0` to
//! `pi/2` is `r = r5 / sin^a(theta)` with curvature
//! `kappa = sin^(a+1)(theta) / (a r5)`. Arclength and horizontal extent are
//! tabulated in `v = ln(theta)`.

use std::f64::consts::FRAC_PI_2;

use crate::numerics::gauss_legendre;

const PANELS: usize = 96;
pub(crate) const SERIES_ORDER: usize = 14;

#[derive(Debug, Clone)]
pub(crate) struct Bend {
    pub a: f64,
    pub r5: f64,
    pub theta0: f64,
    v0: f64,
    dv: f64,
    s_cum: Vec<f64>,
    y_cum: Vec<f64>,
}

fn panel_integral<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: &F) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    half * gauss_legendre(16).iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
}

impl Bend {
    pub fn new(a: f64, r5: f64, theta0: f64) -> Self {
        let v0 = theta0.ln();
        let dv = (FRAC_PI_2.ln() - v0) / PANELS as f64;
        let mut b = Self {
            a,
            r5,
            theta0,
            v0,
            dv,
            s_cum: vec![0.0; PANELS + 1],
            y_cum: vec![0.0; PANELS + 1],
        };
        for p in 0..PANELS {
            let (lo, hi) = (b.v(p), b.v(p + 1));
            b.s_cum[p + 1] = b.s_cum[p] + panel_integral(lo, hi, &|v| b.ds_dv(v));
            b.y_cum[p + 1] = b.y_cum[p] + panel_integral(lo, hi, &|v| b.dy_dv(v));
        }
        b
    }

    fn v(&self, p: usize) -> f64 {
        if p == PANELS {
            FRAC_PI_2.ln()
        } else {
            self.v0 + self.dv * p as f64
        }
    }

    pub fn ds_dtheta(&self, theta: f64) -> f64 {
        self.a * self.r5 / theta.sin().powf(self.a + 1.0)
    }

    fn ds_dv(&self, v: f64) -> f64 {
        let th = v.exp();
        th * self.ds_dtheta(th)
    }

    fn dy_dv(&self, v: f64) -> f64 {
        let th = v.exp();
        th * th.sin() * self.ds_dtheta(th)
    }

    pub fn r(&self, theta: f64) -> f64 {
        self.r5 / theta.sin().powf(self.a)
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        theta.sin().powf(self.a + 1.0) / (self.a * self.r5)
    }

    /// `r(theta) - r5` without cancellation.
    pub fn r_above_end(&self, theta: f64) -> f64 {
        self.r5 * (-self.a * theta.sin().ln()).exp_m1()
    }

    fn panel_of(&self, theta: f64) -> usize {
        let p = ((theta.ln() - self.v0) / self.dv).floor();
        (p.max(0.0) as usize).min(PANELS - 1)
    }

    /// Arclength from `theta0` to `theta`.
    pub fn s_of(&self, theta: f64) -> f64 {
        let p = self.panel_of(theta);
        self.s_cum[p] + panel_integral(self.v(p), theta.ln(), &|v| self.ds_dv(v))
    }

    pub fn length(&self) -> f64 {
        self.s_cum[PANELS]
    }

    /// Horizontal extent between two angles.
    pub fn y_between(&self, th_a: f64, th_b: f64) -> f64 {
        let (pa, pb) = (self.panel_of(th_a), self.panel_of(th_b));
        if pa == pb {
            return panel_integral(th_a.ln(), th_b.ln(), &|v| self.dy_dv(v));
        }
        let head = panel_integral(th_a.ln(), self.v(pa + 1), &|v| self.dy_dv(v));
        let tail = panel_integral(self.v(pb), th_b.ln(), &|v| self.dy_dv(v));
        head + (self.y_cum[pb] - self.y_cum[pa + 1]) + tail
    }

    /// Angle reached after arclength `sigma` from `theta0`.
    pub fn theta_at(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return self.theta0;
        }
        if sigma >= self.length() {
            return FRAC_PI_2;
        }
        let p = self.s_cum.partition_point(|s| *s <= sigma).clamp(1, PANELS) - 1;
        let (mut lo, mut hi) = (self.v(p), self.v(p + 1));
        let frac = (sigma - self.s_cum[p]) / (self.s_cum[p + 1] - self.s_cum[p]);
        let mut v = lo + frac * (hi - lo);
        for _ in 0..100 {
            let f = self.s_cum[p] + panel_integral(self.v(p), v, &|x| self.ds_dv(x)) - sigma;
            if f > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let mut next = v - f / self.ds_dv(v);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-16 * v.abs().max(1.0) {
                v = next;
                break;
            }
            v = next;
        }
        v.exp().min(FRAC_PI_2)
    }

    /// Taylor coefficients of `theta(s_c + tau)` in `tau` where
    /// `theta(s_c) = theta_c`, from the recursion for
    /// `theta' = sin^(a+1)(theta) / (a r5)`.
    pub fn series(&self, theta_c: f64) -> [f64; SERIES_ORDER + 1] {
        let n_max = SERIES_ORDER;
        let b = self.a + 1.0;
        let kk = 1.0 / (self.a * self.r5);
        let mut t = [0.0; SERIES_ORDER + 1];
        let mut s = [0.0; SERIES_ORDER + 1];
        let mut c = [0.0; SERIES_ORDER + 1];
        let mut l = [0.0; SERIES_ORDER + 1];
        let mut p = [0.0; SERIES_ORDER + 1];
        t[0] = theta_c;
        s[0] = theta_c.sin();
        c[0] = theta_c.cos();
        l[0] = s[0].ln();
        p[0] = s[0].powf(b);
        t[1] = kk * p[0];
        for n in 1..n_max {
            let nf = n as f64;
            let mut sn = 0.0;
            let mut cn = 0.0;
            for k in 1..=n {
                sn += k as f64 * t[k] * c[n - k];
                cn -= k as f64 * t[k] * s[n - k];
            }
            s[n] = sn / nf;
            c[n] = cn / nf;
            let mut acc = 0.0;
            for k in 1..n {
                acc += k as f64 * l[k] * s[n - k];
            }
            l[n] = (s[n] - acc / nf) / s[0];
            let mut pn = 0.0;
            for k in 1..=n {
                pn += k as f64 * l[k] * p[n - k];
            }
            p[n] = b * pn / nf;
            t[n + 1] = kk * p[n] / (nf + 1.0);
        }
        t
    }
}

/// Value and derivative of a Taylor polynomial at `tau`.
pub(crate) fn eval_series(t: &[f64], tau: f64) -> (f64, f64) {
    let mut v = 0.0;
    for &c in t.iter().rev() {
        v = v * tau + c;
    }
    let mut d = 0.0;
    for n in (1..t.len()).rev() {
        d = d * tau + n as f64 * t[n];
    }
    (v, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glcurve::bend_profile_solve;

    fn bend() -> Bend {
        let (a, r4, th0) = (3.0_f64, 0.1, 0.02_f64);
        Bend::new(a, r4 * th0.sin().powf(a), th0)
    }

    #[test]
    fn starts_at_r4_and_ends_flat() {
        let b = bend();
        assert!((b.r(0.02) - 0.1).abs() < 1e-14);
        assert!((b.r(FRAC_PI_2) - b.r5).abs() < 1e-20);
    }

    #[test]
    fn inversion_round_trip() {
        let b = bend();
        for i in 1..40 {
            let th = 0.02 + (FRAC_PI_2 - 0.02) * i as f64 / 40.0;
            let s = b.s_of(th);
            assert!((b.theta_at(s) - th).abs() < 1e-9, "{th}");
        }
    }

    #[test]
    fn series_matches_inversion() {
        let b = bend();
        let th = 0.6;
        let t = b.series(th);
        let s0 = b.s_of(th);
        let h = 0.05 * b.a * b.r5 / th.sin();
        let (v, d) = eval_series(&t, h);
        assert!((v - b.theta_at(s0 + h)).abs() < 1e-10);
        assert!((d - b.kappa(v)).abs() < 1e-8 * b.kappa(v));
    }

    #[test]
    fn agrees_with_the_ode_graph() {
        let b = bend();
        let th0: f64 = 0.02;
        let prof = bend_profile_solve(b.a, 0.1, -th0.cos() / th0.sin(), 0.0).unwrap();
        let end = prof.h.value(prof.t_end);
        assert!((end - b.r5).abs() < 1e-6 * b.r5);
        let width = b.y_between(th0, FRAC_PI_2);
        assert!((prof.t_end - width).abs() < 1e-6 * width);
    }
}
