use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One sampled curvature value and the parameters it was taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
    pub value: f64,
}

/// A named side condition with its worst margin (non-negative when it holds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub margin: f64,
    pub pass: bool,
}

/// Sampled values of a curvature functional against a lower bound.
///
/// `pass` requires `margin >= 0` and every listed condition to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub name: String,
    pub samples: Vec<Sample>,
    pub bound: f64,
    pub min_value: f64,
    pub margin: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Condition>,
}

impl CurvatureReport {
    pub fn new(name: impl Into<String>, bound: f64) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
            bound,
            min_value: f64::INFINITY,
            margin: f64::INFINITY,
            pass: true,
            conditions: Vec::new(),
        }
    }

    pub fn push(&mut self, params: &[(&str, f64)], value: f64) {
        self.samples.push(Sample {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
        });
    }

    /// Add a condition; `margin >= 0` means it holds.
    pub fn condition(&mut self, name: impl Into<String>, margin: f64) {
        let pass = margin >= 0.0;
        self.conditions.push(Condition {
            name: name.into(),
            margin,
            pass,
        });
    }

    pub fn condition_margin(&self, name: &str) -> Option<f64> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.margin)
    }

    /// Recompute `min_value`, `margin` and `pass` from the samples.
    pub fn finish(mut self) -> Self {
        self.min_value = self
            .samples
            .iter()
            .map(|s| if s.value.is_nan() { f64::NEG_INFINITY } else { s.value })
            .fold(f64::INFINITY, f64::min);
        self.margin = self.min_value - self.bound;
        self.pass = self.margin >= 0.0 && self.conditions.iter().all(|c| c.pass);
        self
    }

    /// Drop all but every `stride`-th sample (the summary is unchanged).
    pub fn thinned(mut self, keep: usize) -> Self {
        if keep > 0 && self.samples.len() > keep {
            let stride = self.samples.len().div_ceil(keep);
            let worst = self
                .samples
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
                .map(|(i, _)| i);
            self.samples = self
                .samples
                .into_iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || Some(*i) == worst)
                .map(|(_, s)| s)
                .collect();
        }
        self
    }

    /// Parameters of the sample with the smallest value.
    pub fn worst_sample(&self) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| a.value.total_cmp(&b.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_margin_and_conditions() {
        let mut r = CurvatureReport::new("t", 1.0);
        r.push(&[("t", 0.0)], 2.0);
        r.push(&[("t", 1.0)], 1.5);
        let r = r.finish();
        assert_eq!(r.min_value, 1.5);
        assert_eq!(r.margin, 0.5);
        assert!(r.pass);

        let mut r2 = CurvatureReport::new("t", 1.0);
        r2.push(&[("t", 0.0)], 2.0);
        r2.condition("side", -1e-3);
        assert!(!r2.finish().pass);
    }

    #[test]
    fn round_trips_through_json() {
        let mut r = CurvatureReport::new("round", -0.1);
        r.push(&[("lambda", 0.25), ("s", 1.0 / 3.0)], 0.1 + 0.2);
        r.condition("c", 0.0);
        let r = r.finish();
        let text = serde_json::to_string(&r).unwrap();
        let back: CurvatureReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
