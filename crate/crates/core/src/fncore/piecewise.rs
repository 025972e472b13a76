use serde::{Deserialize, Serialize};

use super::JetValue;
use crate::{Error, Result};

/// A closed-form building block. Offsets are measured from `origin` where
/// present so that pieces far from zero keep full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Term {
    /// `sum_i coeffs[i] * (t - origin)^i`
    Poly { origin: f64, coeffs: Vec<f64> },
    /// `amp * sin(freq * t + phase)`
    Sin { amp: f64, freq: f64, phase: f64 },
    /// `amp * exp(rate * (t - origin))`
    Exp { amp: f64, rate: f64, origin: f64 },
    /// `amp / (t - origin)`
    Recip { amp: f64, origin: f64 },
    /// `amp * ln(t - origin)`
    Log { amp: f64, origin: f64 },
    /// `amp * ((t - origin) ln(t - origin) - (t - origin))`
    XLog { amp: f64, origin: f64 },
}

impl Term {
    pub fn constant(c: f64) -> Self {
        Term::Poly {
            origin: 0.0,
            coeffs: vec![c],
        }
    }

    /// Value and first three derivatives, plus `1 - d1` evaluated without
    /// cancellation where the closed form allows it.
    pub(crate) fn jet(&self, t: f64) -> ([f64; 4], f64) {
        match self {
            Term::Poly { origin, coeffs } => {
                let x = t - origin;
                let mut d = [0.0; 4];
                for (order, slot) in d.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in (order..coeffs.len()).rev() {
                        let mut fall = 1.0;
                        for j in 0..order {
                            fall *= (i - j) as f64;
                        }
                        acc = acc * x + fall * coeffs[i];
                    }
                    *slot = acc;
                }
                let c1 = coeffs.get(1).copied().unwrap_or(0.0);
                let mut high = 0.0;
                for i in (2..coeffs.len()).rev() {
                    high = high * x + i as f64 * coeffs[i];
                }
                let om1 = (1.0 - c1) - high * x;
                (d, om1)
            }
            Term::Sin { amp, freq, phase } => {
                let x = freq * t + phase;
                let (s, c) = x.sin_cos();
                let aw = amp * freq;
                let half = (0.5 * x).sin();
                let d = [amp * s, aw * c, -aw * freq * s, -aw * freq * freq * c];
                (d, (1.0 - aw) + 2.0 * aw * half * half)
            }
            Term::Exp { amp, rate, origin } => {
                let e = amp * (rate * (t - origin)).exp();
                let d = [e, rate * e, rate * rate * e, rate * rate * rate * e];
                (d, 1.0 - d[1])
            }
            Term::Recip { amp, origin } => {
                let x = t - origin;
                let d = [amp / x, -amp / (x * x), 2.0 * amp / (x * x * x), -6.0 * amp / (x * x * x * x)];
                (d, 1.0 - d[1])
            }
            Term::Log { amp, origin } => {
                let x = t - origin;
                let d = [amp * x.ln(), amp / x, -amp / (x * x), 2.0 * amp / (x * x * x)];
                (d, 1.0 - d[1])
            }
            Term::XLog { amp, origin } => {
                let x = t - origin;
                let l = x.ln();
                let d = [amp * (x * l - x), amp * l, amp / x, -amp / (x * x)];
                (d, 1.0 - d[1])
            }
        }
    }

    /// An antiderivative, if it is again a sum of terms.
    pub fn antiderivative(&self) -> Option<Vec<Term>> {
        match self {
            Term::Poly { origin, coeffs } => {
                let mut c = vec![0.0];
                c.extend(coeffs.iter().enumerate().map(|(i, a)| a / (i + 1) as f64));
                Some(vec![Term::Poly { origin: *origin, coeffs: c }])
            }
            Term::Sin { amp, freq, phase } => {
                if *freq == 0.0 {
                    return Some(vec![Term::Poly {
                        origin: 0.0,
                        coeffs: vec![0.0, amp * phase.sin()],
                    }]);
                }
                Some(vec![Term::Sin {
                    amp: amp / freq,
                    freq: *freq,
                    phase: phase - std::f64::consts::FRAC_PI_2,
                }])
            }
            Term::Exp { amp, rate, origin } => {
                if *rate == 0.0 {
                    Some(vec![Term::Poly {
                        origin: *origin,
                        coeffs: vec![0.0, *amp],
                    }])
                } else {
                    Some(vec![Term::Exp {
                        amp: amp / rate,
                        rate: *rate,
                        origin: *origin,
                    }])
                }
            }
            Term::Recip { amp, origin } => Some(vec![Term::Log { amp: *amp, origin: *origin }]),
            Term::Log { amp, origin } => Some(vec![Term::XLog { amp: *amp, origin: *origin }]),
            Term::XLog { .. } => None,
        }
    }
}

/// A sum of closed-form terms valid on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Piece {
    pub terms: Vec<Term>,
}

impl Piece {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Term::constant(c)])
    }

    /// `value + slope * (t - origin)`
    pub fn affine(origin: f64, value: f64, slope: f64) -> Self {
        Self::new(vec![Term::Poly {
            origin,
            coeffs: vec![value, slope],
        }])
    }

    pub fn poly(origin: f64, coeffs: Vec<f64>) -> Self {
        Self::new(vec![Term::Poly { origin, coeffs }])
    }

    pub fn sin() -> Self {
        Self::new(vec![Term::Sin {
            amp: 1.0,
            freq: 1.0,
            phase: 0.0,
        }])
    }

    pub fn jet(&self, t: f64) -> JetValue {
        let mut d = [0.0; 4];
        // The term whose derivative is closest to one carries the 1 - d1 channel.
        let mut best: Option<(usize, f64)> = None;
        let mut slopes = Vec::with_capacity(self.terms.len());
        for (i, term) in self.terms.iter().enumerate() {
            let (td, om1) = term.jet(t);
            for k in 0..4 {
                d[k] += td[k];
            }
            slopes.push(td[1]);
            if best.is_none_or(|(_, b)| om1.abs() < b.abs()) {
                best = Some((i, om1));
            }
        }
        let om1 = match best {
            Some((i, om1)) => {
                let others: f64 = slopes.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s).sum();
                om1 - others
            }
            None => 1.0,
        };
        JetValue {
            value: d[0],
            d1: d[1],
            d2: d[2],
            d3: d[3],
            om1,
        }
    }

    pub fn antiderivative(&self) -> Option<Piece> {
        let mut out = Vec::new();
        for t in &self.terms {
            out.extend(t.antiderivative()?);
        }
        Some(Piece::new(out))
    }

    /// Add `value + slope * (t - origin)`.
    pub fn plus_affine(mut self, origin: f64, value: f64, slope: f64) -> Piece {
        self.terms.push(Term::Poly {
            origin,
            coeffs: vec![value, slope],
        });
        self
    }
}

/// Closed-form pieces on consecutive intervals `[b_i, b_{i+1})`. The last
/// interval is closed. Outside the domain the first and last pieces extend
/// by their formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
}

/// Build a piecewise function. Continuity is not enforced.
pub fn make_piecewise(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<PiecewiseFn> {
    if breakpoints.len() < 2 {
        return Err(Error::Construction("need at least two breakpoints".into()));
    }
    if pieces.len() + 1 != breakpoints.len() {
        return Err(Error::Construction(format!(
            "{} breakpoints need {} pieces, got {}",
            breakpoints.len(),
            breakpoints.len() - 1,
            pieces.len()
        )));
    }
    if breakpoints.iter().any(|b| !b.is_finite()) {
        return Err(Error::Construction("breakpoints must be finite".into()));
    }
    if let Some(w) = breakpoints.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Construction(format!(
            "breakpoints must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(PiecewiseFn { breakpoints, pieces })
}

impl PiecewiseFn {
    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], self.breakpoints[self.breakpoints.len() - 1])
    }

    pub fn single(lo: f64, hi: f64, piece: Piece) -> Result<Self> {
        make_piecewise(vec![lo, hi], vec![piece])
    }

    pub fn piece_index(&self, t: f64) -> usize {
        let n = self.pieces.len();
        let idx = self.breakpoints.partition_point(|b| *b <= t);
        idx.saturating_sub(1).min(n - 1)
    }

    /// Jet of the piece governing `t`, extended beyond the domain.
    pub fn jet(&self, t: f64) -> JetValue {
        self.pieces[self.piece_index(t)].jet(t)
    }

    pub fn interior_breakpoints(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// Right piece minus left piece at interior breakpoint `i` (1-based
    /// index into `breakpoints`).
    pub fn jump(&self, i: usize) -> [f64; 3] {
        let b = self.breakpoints[i];
        let r = self.pieces[i].jet(b);
        let l = self.pieces[i - 1].jet(b);
        [r.value - l.value, r.d1 - l.d1, r.d2 - l.d2]
    }

    pub fn shortest_piece(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Twice-integrated function with `u(t0) = value0`, `u'(t0) = slope0`,
    /// if every piece has closed-form antiderivatives. Value and slope are
    /// carried continuously across breakpoints.
    pub fn integrate_twice(&self, t0: f64, value0: f64, slope0: f64) -> Option<PiecewiseFn> {
        let n = self.pieces.len();
        let mut raw = Vec::with_capacity(n);
        for p in &self.pieces {
            raw.push(p.antiderivative()?.antiderivative()?);
        }
        let i0 = self.piece_index(t0);
        let mut out: Vec<Option<Piece>> = vec![None; n];
        let fit = |p: &Piece, at: f64, v: f64, s: f64| {
            let j = p.jet(at);
            p.clone().plus_affine(at, v - j.value, s - j.d1)
        };
        out[i0] = Some(fit(&raw[i0], t0, value0, slope0));
        for i in i0 + 1..n {
            let b = self.breakpoints[i];
            let j = out[i - 1].as_ref().expect("filled").jet(b);
            out[i] = Some(fit(&raw[i], b, j.value, j.d1));
        }
        for i in (0..i0).rev() {
            let b = self.breakpoints[i + 1];
            let j = out[i + 1].as_ref().expect("filled").jet(b);
            out[i] = Some(fit(&raw[i], b, j.value, j.d1));
        }
        Some(PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            pieces: out.into_iter().map(|p| p.expect("filled")).collect(),
        })
    }
}
