//! Sloping and bending reparametrisations.
//!
//! Both are built the same way: a piecewise second derivative, integrated
//! twice from the identity and mollified.

use serde::{Deserialize, Serialize};

use crate::fncore::{integrate_twice, make_piecewise, mollify, Piece, SmoothFn1D, Term};
use crate::numerics::{brent, linspace};
use crate::tolerances::{CLAUSE_EQUALITY, CLAUSE_SLACK};
use crate::{Error, Result};

/// Relative offset of the bending block past `2 alpha`.
pub const BEND_OFFSET: f64 = 0.02;

/// Relative reduction of the bending block height below `C/t`.
pub const BEND_HEADROOM: f64 = 1e-4;

/// Sample points per member in the clause checks.
pub const CLAUSE_SAMPLES: usize = 200;

/// Named clause margins of one member; non-negative means the clause holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub r: f64,
    pub s: f64,
    pub clauses: Vec<(String, f64)>,
}

impl ClauseCheck {
    pub fn worst(&self) -> f64 {
        self.clauses.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.clauses.iter().filter(|c| !(c.1 >= 0.0)).map(|c| c.0.as_str()).collect()
    }
}

/// `(r, s)` grid used to certify a family: five values of each.
pub fn certification_grid(r_positive: bool) -> Vec<(f64, f64)> {
    let rs: Vec<f64> = if r_positive {
        (1..=5).map(|i| i as f64 / 5.0).collect()
    } else {
        linspace(0.0, 1.0, 5)
    };
    let ss = linspace(0.0, 1.0, 5);
    rs.iter().flat_map(|&r| ss.iter().map(move |&s| (r, s))).collect()
}

/// Sample points: half uniform on `[0, hi]`, half geometric from `lo` to `hi`.
fn clause_grid(lo: f64, hi: f64) -> Vec<f64> {
    let half = CLAUSE_SAMPLES / 2;
    let mut g = linspace(0.0, hi, half);
    let (l0, l1) = (lo.ln(), hi.ln());
    g.extend(linspace(l0, l1, CLAUSE_SAMPLES - half).into_iter().map(f64::exp));
    g.sort_by(f64::total_cmp);
    g
}

fn min_over<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

/// Sloping functions with parameters `a, b, p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopingFamily {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    /// Resulting slope `b p / 10`.
    pub q: f64,
    /// Mollification radius.
    pub eps: f64,
}

/// One sloping function `u_{r,s}` with `u(c) = b`.
#[derive(Debug, Clone)]
pub struct SlopingMember {
    pub r: f64,
    pub s: f64,
    pub u: SmoothFn1D,
    pub c: f64,
    /// Point with `v(8e/10) = 8b/10` for the unsmoothed profile.
    pub e: f64,
}

/// Build and certify the sloping family.
pub fn sloping_family(a: f64, b: f64, p: f64) -> Result<SlopingFamily> {
    if !(a > 0.0 && a < 0.8 * b && p > 0.0 && b.is_finite() && p.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < a < 8b/10 and p > 0, got a = {a}, b = {b}, p = {p}")));
    }
    let q = b * p / 10.0;
    if !(q < 1.0) {
        return Err(Error::infeasible("q = bp/10 < 1", format!("q = {q}")));
    }
    let mut fam = SlopingFamily { a, b, p, q, eps: 0.04 * a };
    let mut last = String::new();
    for _ in 0..4 {
        match fam.certify() {
            Ok(()) => return Ok(fam),
            Err(e) => last = e.to_string(),
        }
        fam.eps *= 0.5;
    }
    Err(Error::Construction(format!("sloping family: {last}")))
}

impl SlopingFamily {
    pub fn member(&self, r: f64, s: f64) -> Result<SlopingMember> {
        if !((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&s)) {
            return Err(Error::Parameter(format!("(r, s) = ({r}, {s}) outside the unit square")));
        }
        let (a, b, q) = (self.a, self.b, self.q);
        let sq = s * q;
        let e = (b - 1.125 * a * sq) / (1.0 - sq);
        let hi = 2.0 * e + 2.0 * b;
        let w = make_piecewise(
            vec![-a, 0.85 * a, 0.95 * a, 0.85 * e, 0.95 * e, hi],
            vec![
                Piece::constant(0.0),
                Piece::constant(-sq * 10.0 / a),
                Piece::constant(0.0),
                Piece::constant(r * sq * 10.0 / e),
                Piece::constant(0.0),
            ],
        )?;
        let u = integrate_twice(&mollify(&w, self.eps)?, -a, -a, 1.0)?.with_domain(0.0, hi);
        let c = brent(0.0, hi, 1e-15, |t| u.value(t) - b)?;
        Ok(SlopingMember { r, s, u, c, e })
    }

    /// Margins of the six clauses at [`CLAUSE_SAMPLES`] points.
    pub fn check(&self, m: &SlopingMember) -> ClauseCheck {
        let (a, b, p, q) = (self.a, self.b, self.p, self.q);
        let (r, s, c) = (m.r, m.s, m.c);
        let grid = clause_grid(0.1 * a, 1.25 * c.max(b));
        let jets: Vec<_> = grid.iter().map(|&t| (t, m.u.jet(t))).collect();
        let scale = 1.0 + c;
        let mut out = Vec::new();

        let ident = min_over(
            jets.iter()
                .filter(|(t, _)| s == 0.0 || *t <= 0.8 * a)
                .map(|(t, j)| CLAUSE_EQUALITY * scale - (j.value - t).abs().max((j.d1 - 1.0).abs())),
        );
        out.push(("identity".to_string(), ident));
        out.push(("reaches_b".to_string(), CLAUSE_EQUALITY * scale - (m.u.value(c) - b).abs()));
        out.push((
            "second_derivative_bound".to_string(),
            min_over(jets.iter().map(|(_, j)| p * r - j.d2)) + CLAUSE_SLACK,
        ));
        let support = min_over(jets.iter().map(|(t, j)| {
            if (0.8 * a..=a).contains(t) {
                -j.d2
            } else if (0.8 * c..=c).contains(t) {
                j.d2
            } else {
                -j.d2.abs()
            }
        }));
        out.push(("second_derivative_support".to_string(), support + CLAUSE_SLACK));
        let plateau = min_over(jets.iter().filter_map(|(t, j)| {
            if *t >= a && *t <= 0.8 * c {
                Some(-(j.d1 - (1.0 - s * q)).abs())
            } else if *t >= c {
                Some(-(j.d1 - (1.0 - s * q + r * s * q)).abs())
            } else {
                None
            }
        }));
        out.push(("plateau_slopes".to_string(), plateau + CLAUSE_EQUALITY));
        out.push((
            "slope_in_unit_interval".to_string(),
            min_over(jets.iter().map(|(_, j)| j.d1.min(j.om1))) + CLAUSE_SLACK,
        ));
        ClauseCheck { r, s, clauses: out }
    }

    fn certify(&self) -> Result<()> {
        for (r, s) in certification_grid(false) {
            let m = self.member(r, s)?;
            let chk = self.check(&m);
            if chk.worst() < 0.0 {
                return Err(Error::Construction(format!(
                    "clauses {:?} fail at (r, s) = ({r}, {s})",
                    chk.failed()
                )));
            }
        }
        Ok(())
    }
}

/// Bending functions with parameters `C, beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendingFamily {
    #[serde(rename = "C")]
    pub c: f64,
    pub beta: f64,
    /// Attacking point `(beta/4) exp(-1/C)`.
    pub alpha: f64,
    /// Start of the `C/t` block.
    pub block_start: f64,
    /// End of the `C/t` block; the block integrates to one.
    pub block_end: f64,
    pub eps: f64,
}

/// One bending function `v_{r,s}` with `v(d) = beta`.
#[derive(Debug, Clone)]
pub struct BendingMember {
    pub r: f64,
    pub s: f64,
    pub v: SmoothFn1D,
    pub d: f64,
}

/// Build and certify the bending family.
pub fn bending_family(c: f64, beta: f64) -> Result<BendingFamily> {
    if !(c > 0.0 && beta > 0.0 && c.is_finite() && beta.is_finite()) {
        return Err(Error::Parameter(format!("need C, beta > 0, got C = {c}, beta = {beta}")));
    }
    let alpha = 0.25 * beta * (-1.0 / c).exp();
    if !(alpha > 0.0) {
        return Err(Error::infeasible("alpha = (beta/4) exp(-1/C) > 0", format!("C = {c} underflows")));
    }
    let block_start = 2.0 * alpha * (1.0 + BEND_OFFSET);
    let block_end = block_start * (1.0 / (c * (1.0 - BEND_HEADROOM))).exp();
    if !(block_end < beta) {
        return Err(Error::infeasible("bending block ends before beta", format!("ends at {block_end}")));
    }
    let mut fam = BendingFamily {
        c,
        beta,
        alpha,
        block_start,
        block_end,
        eps: (alpha / 25.0).min(0.25 * (block_end - block_start)),
    };
    let mut last = String::new();
    for _ in 0..4 {
        match fam.certify() {
            Ok(()) => return Ok(fam),
            Err(e) => last = e.to_string(),
        }
        fam.eps *= 0.5;
    }
    Err(Error::Construction(format!("bending family: {last}")))
}

impl BendingFamily {
    pub fn member(&self, r: f64, s: f64) -> Result<BendingMember> {
        if !((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&s)) {
            return Err(Error::Parameter(format!("(r, s) = ({r}, {s}) outside the unit square")));
        }
        let slope = 1.0 - s + r * s;
        if !(slope > 0.0) {
            return Err(Error::Parameter("r = 0 with s = 1 never reaches beta".into()));
        }
        let al = self.alpha;
        let hi = self.block_end + self.beta / slope + self.beta;
        let w = make_piecewise(
            vec![-al, 4.0 * al / 6.0, 5.0 * al / 6.0, self.block_start, self.block_end, hi],
            vec![
                Piece::constant(0.0),
                Piece::constant(-6.0 * s / al),
                Piece::constant(0.0),
                Piece::new(vec![Term::Recip {
                    amp: r * s * self.c * (1.0 - BEND_HEADROOM),
                    origin: 0.0,
                }]),
                Piece::constant(0.0),
            ],
        )?;
        let v = integrate_twice(&mollify(&w, self.eps)?, -al, -al, 1.0)?.with_domain(0.0, hi);
        let d = brent(0.0, hi, 1e-15, |t| v.value(t) - self.beta)?;
        Ok(BendingMember { r, s, v, d })
    }

    /// Margins of the six clauses at [`CLAUSE_SAMPLES`] points.
    pub fn check(&self, m: &BendingMember) -> ClauseCheck {
        let (al, beta) = (self.alpha, self.beta);
        let (r, s, d) = (m.r, m.s, m.d);
        let grid = clause_grid(0.1 * al, 1.25 * d);
        let jets: Vec<_> = grid.iter().map(|&t| (t, m.v.jet(t))).collect();
        let scale = 1.0 + d;
        let mut out = Vec::new();

        let ident = min_over(
            jets.iter()
                .filter(|(t, _)| s == 0.0 || *t <= 0.5 * al)
                .map(|(t, j)| CLAUSE_EQUALITY * scale - (j.value - t).abs().max((j.d1 - 1.0).abs())),
        );
        out.push(("identity".to_string(), ident));
        out.push(("reaches_beta".to_string(), CLAUSE_EQUALITY * scale - (m.v.value(d) - beta).abs()));
        if s == 1.0 {
            let near: Vec<f64> = linspace(0.9 * al, 1.1 * al, 21);
            let flat = min_over(near.iter().map(|&t| -m.v.jet(t).d1.abs()));
            out.push(("flat_near_alpha".to_string(), flat + CLAUSE_EQUALITY));
        }
        let bound = min_over(jets.iter().filter(|(t, _)| *t > 0.0).map(|(t, j)| {
            let cap = if (2.0 * al..=d).contains(t) { self.c * r / t } else { 0.0 };
            cap - j.d2
        }));
        out.push(("second_derivative_bound".to_string(), bound + CLAUSE_SLACK));
        let tail = min_over(jets.iter().filter(|(t, _)| *t >= d).map(|(_, j)| -(j.d1 - (1.0 - s + r * s)).abs()));
        out.push(("final_slope".to_string(), tail + CLAUSE_EQUALITY));
        out.push((
            "slope_in_unit_interval".to_string(),
            min_over(jets.iter().map(|(_, j)| j.d1.min(j.om1))) + CLAUSE_SLACK,
        ));
        ClauseCheck { r, s, clauses: out }
    }

    fn certify(&self) -> Result<()> {
        for (r, s) in certification_grid(true) {
            let m = self.member(r, s)?;
            let chk = self.check(&m);
            if chk.worst() < 0.0 {
                return Err(Error::Construction(format!(
                    "clauses {:?} fail at (r, s) = ({r}, {s})",
                    chk.failed()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sloping_identity_and_plateau() {
        let fam = sloping_family(0.3, 1.0, 0.5).unwrap();
        assert!((fam.q - 0.05).abs() < 1e-15);
        let m0 = fam.member(0.7, 0.0).unwrap();
        for t in linspace(0.0, 2.0, 50) {
            assert!((m0.u.value(t) - t).abs() < 1e-10);
        }
        let m = fam.member(1.0, 1.0).unwrap();
        let mid = 0.5 * (fam.a + 0.8 * m.c);
        assert!((m.u.jet(mid).d1 - (1.0 - fam.q)).abs() < 1e-10);
        assert!((m.u.jet(1.1 * m.c).d1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sloping_root_moves_continuously() {
        let fam = sloping_family(0.3, 1.0, 0.5).unwrap();
        let h = 0.01;
        let cs: Vec<f64> = linspace(0.0, 1.0, 101).into_iter().map(|s| fam.member(1.0, s).unwrap().c).collect();
        for w in cs.windows(2) {
            assert!((w[1] - w[0]).abs() < 10.0 * h);
        }
        let dc = (cs[100] - cs[0]).abs();
        assert!(dc > 0.0);
    }

    #[test]
    fn bending_identity_and_final_slope() {
        let fam = bending_family(0.5, 1.0).unwrap();
        assert!((fam.alpha - 0.25 * (-2.0_f64).exp()).abs() < 1e-15);
        let m0 = fam.member(0.4, 0.0).unwrap();
        assert!((m0.v.value(0.9) - 0.9).abs() < 1e-10);
        for &r in &[0.2, 0.6, 1.0] {
            let m = fam.member(r, 1.0).unwrap();
            assert!((m.v.jet(1.2 * m.d).d1 - r).abs() < 1e-10);
            assert!(m.v.jet(fam.alpha).d1.abs() < 1e-12);
        }
    }

    #[test]
    fn bending_small_r_plateaus_near_alpha() {
        let fam = bending_family(0.5, 1.0).unwrap();
        let m = fam.member(1e-6, 1.0).unwrap();
        let plateau = m.v.value(fam.alpha);
        assert!((plateau - 0.75 * fam.alpha).abs() < 1e-6 * fam.alpha);
        let later = m.v.value(fam.block_end);
        assert!(later - plateau < 1e-5 * fam.beta);
    }

    #[test]
    fn clause_checks_catch_a_broken_member() {
        let fam = sloping_family(0.3, 1.0, 0.5).unwrap();
        let mut m = fam.member(1.0, 1.0).unwrap();
        m.c *= 1.01;
        let chk = fam.check(&m);
        assert!(chk.failed().contains(&"reaches_b"));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sloping_family(0.9, 1.0, 0.5).is_err());
        assert!(sloping_family(0.3, 1.0, 20.0).is_err());
        assert!(bending_family(0.0, 1.0).is_err());
        let fam = bending_family(0.5, 1.0).unwrap();
        assert!(fam.member(0.0, 1.0).is_err());
    }
}
