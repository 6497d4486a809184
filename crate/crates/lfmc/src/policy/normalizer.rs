//! Running observation normalization (Welford's online moments).
//!
//! Statistics update during rollout collection and freeze for the policy
//! update and for evaluation. Before any update the transform is the
//! identity, so cold-start observations pass through unchanged.

use crate::{Error, Result};

/// Variance floor under the square root; keeps constant dimensions from
/// dividing by zero.
const VAR_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    clip: f64,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            clip: 10.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per dimension.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 1.0 {
            vec![1.0; self.dim()]
        } else {
            self.m2.iter().map(|m| m / self.count).collect()
        }
    }

    /// Rebuilds a normalizer from serialized statistics.
    pub fn from_stats(count: f64, mean: Vec<f64>, variance: Vec<f64>, clip: f64) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::Contract("mean/variance length mismatch".into()));
        }
        if !(count >= 0.0) || !(clip > 0.0) {
            return Err(Error::Contract("bad normalizer statistics".into()));
        }
        let m2 = variance.iter().map(|v| v * count.max(1.0)).collect();
        Ok(Self {
            count,
            mean,
            m2,
            clip,
        })
    }

    /// Folds one observation into the running moments.
    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "observation dimension mismatch");
        self.count += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    fn std(&self, i: usize) -> f64 {
        if self.count < 1.0 {
            1.0
        } else {
            (self.m2[i] / self.count + VAR_EPS).sqrt()
        }
    }

    /// Normalized, clipped copy of `x`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "observation dimension mismatch");
        (0..x.len())
            .map(|i| ((x[i] - self.mean[i]) / self.std(i)).clamp(-self.clip, self.clip))
            .collect()
    }

    /// d(normalized_i)/d(raw_i): 1/std inside the clip band, 0 outside.
    /// This is the factor that carries network input gradients back to raw
    /// observation units.
    pub fn input_scale(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let s = self.std(i);
                let z = (x[i] - self.mean[i]) / s;
                if z.abs() >= self.clip {
                    0.0
                } else {
                    1.0 / s
                }
            })
            .collect()
    }
}
