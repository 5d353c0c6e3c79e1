//! Restricted potential (barrier Lyapunov) functions on `[0, μ)`.
//!
//! `potential_derivative` is the derivative with respect to the *squared*
//! argument, so `dΥ/dz = 2z · Υ_d(z)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("barrier: argument {z} outside the admissible set [0, {mu})")]
    DomainExceeded { z: f64, mu: f64 },
    #[error("barrier: mu must be positive and finite (got {0})")]
    InvalidMu(f64),
    #[error("barrier: weight matrix is not positive definite (yᵀHy = {0})")]
    NonPDWeight(f64),
    #[error("barrier: dimension mismatch (vector {vec}, weight {rows}x{cols})")]
    DimensionMismatch { vec: usize, rows: usize, cols: usize },
}

/// Analytic form of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierForm {
    /// `Υ(z) = z² / (μ² − z²)`.
    #[default]
    Rational,
    /// `Υ(z) = ln(μ² / (μ² − z²))`.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierFunction {
    mu: f64,
    form: BarrierForm,
}

impl BarrierFunction {
    pub fn new(mu: f64, form: BarrierForm) -> Result<Self, BarrierError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(BarrierError::InvalidMu(mu));
        }
        Ok(Self { mu, form })
    }

    pub fn rational(mu: f64) -> Result<Self, BarrierError> {
        Self::new(mu, BarrierForm::Rational)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn form(&self) -> BarrierForm {
        self.form
    }

    fn gap(&self, z: f64) -> Result<f64, BarrierError> {
        if !(z >= 0.0) || !(z < self.mu) {
            return Err(BarrierError::DomainExceeded { z, mu: self.mu });
        }
        let gap = self.mu * self.mu - z * z;
        if gap > 0.0 {
            Ok(gap)
        } else {
            Err(BarrierError::DomainExceeded { z, mu: self.mu })
        }
    }

    pub fn potential(&self, z: f64) -> Result<f64, BarrierError> {
        let gap = self.gap(z)?;
        Ok(match self.form {
            BarrierForm::Rational => z * z / gap,
            BarrierForm::Logarithmic => (self.mu * self.mu / gap).ln(),
        })
    }

    /// `dΥ / d(z²)`.
    pub fn potential_derivative(&self, z: f64) -> Result<f64, BarrierError> {
        let gap = self.gap(z)?;
        Ok(match self.form {
            BarrierForm::Rational => self.mu * self.mu / (gap * gap),
            BarrierForm::Logarithmic => 1.0 / gap,
        })
    }
}

/// `‖y‖_H = √(yᵀHy)`.
pub fn weighted_norm(y: &DVector<f64>, h: &DMatrix<f64>) -> Result<f64, BarrierError> {
    if h.nrows() != y.len() || h.ncols() != y.len() {
        return Err(BarrierError::DimensionMismatch {
            vec: y.len(),
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let quad = y.dot(&(h * y));
    quad_to_norm(quad, y.norm_squared() * h.amax())
}

/// Same as [`weighted_norm`] for a diagonal weight given by its diagonal.
pub fn weighted_norm_diag(y: &DVector<f64>, h_diag: &DVector<f64>) -> Result<f64, BarrierError> {
    if h_diag.len() != y.len() {
        return Err(BarrierError::DimensionMismatch {
            vec: y.len(),
            rows: h_diag.len(),
            cols: h_diag.len(),
        });
    }
    let quad: f64 = y.iter().zip(h_diag.iter()).map(|(a, w)| w * a * a).sum();
    quad_to_norm(quad, y.norm_squared() * h_diag.amax())
}

fn quad_to_norm(quad: f64, scale: f64) -> Result<f64, BarrierError> {
    if quad >= 0.0 {
        Ok(quad.sqrt())
    } else if quad >= -1e-12 * scale {
        Ok(0.0)
    } else {
        Err(BarrierError::NonPDWeight(quad))
    }
}
