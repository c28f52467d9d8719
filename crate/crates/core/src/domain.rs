//! Parameter-space box domain and the affine normalization onto [-1, 1]^m.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in parameter space, lower[i] < upper[i].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid_argument(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::invalid_argument("box must have dimension >= 1"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid_argument(format!(
                    "box component {i}: lower {lo} must be < upper {hi}"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn midpoint(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| 0.5 * (self.lower[i] + self.upper[i]))
    }

    pub fn contains(&self, mu: &DVector<f64>) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .enumerate()
                .all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    /// Affine map of a physical parameter vector onto [-1, 1]^m.
    pub fn normalize(&self, mu: &DVector<f64>) -> Result<DVector<f64>> {
        if mu.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "parameter has dimension {}, box has {}",
                mu.len(),
                self.dim()
            )));
        }
        if !self.contains(mu) {
            return Err(Error::invalid_argument(format!(
                "parameter {:?} lies outside the box",
                mu.as_slice()
            )));
        }
        Ok(DVector::from_fn(self.dim(), |i, _| {
            2.0 * (mu[i] - self.lower[i]) / self.width(i) - 1.0
        }))
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            self.lower[i] + 0.5 * (z[i] + 1.0) * self.width(i)
        })
    }

    /// Chain-rule factor turning d/d(mu_physical) into d/d(z_normalized):
    /// grad_z f = grad_mu f * (upper - lower) / 2, componentwise.
    pub fn gradient_scale(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| 0.5 * self.width(i))
    }

    /// Clips a point into the box, componentwise.
    pub fn clip(&self, mu: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| mu[i].clamp(self.lower[i], self.upper[i]))
    }

    /// The symmetric unit box [-1, 1]^m.
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lower: vec![-1.0; dim],
            upper: vec![1.0; dim],
        }
    }
}
