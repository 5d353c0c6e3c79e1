//! Sliding-mode consensus control law with network compensation, and the
//! design-time gain certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnn::BoundEstimates;
use crate::graph::GraphMatrices;
use crate::sliding::{ErrorState, SlidingDesign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("controller: follower {0} has d_i + b_i = 0 (no incoming information)")]
    ZeroRowGain(usize),
    #[error("controller: gamma1 and gamma2 must be positive (got {gamma1}, {gamma2})")]
    InvalidGains { gamma1: f64, gamma2: f64 },
    #[error("controller: boundary layer must be nonnegative (got {0})")]
    InvalidBoundaryLayer(f64),
    #[error("controller: dimension mismatch ({0})")]
    DimensionMismatch(String),
    #[error("controller: missing bound estimate '{0}'")]
    MissingBound(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Width of the linear zone replacing `sgn`; zero keeps the exact signum.
    #[serde(default)]
    pub boundary_layer: f64,
}

impl ControllerGains {
    pub fn new(gamma1: f64, gamma2: f64, boundary_layer: f64) -> Result<Self, ControlError> {
        if !(gamma1 > 0.0 && gamma2 > 0.0) || !gamma1.is_finite() || !gamma2.is_finite() {
            return Err(ControlError::InvalidGains { gamma1, gamma2 });
        }
        if !(boundary_layer >= 0.0) || !boundary_layer.is_finite() {
            return Err(ControlError::InvalidBoundaryLayer(boundary_layer));
        }
        Ok(Self {
            gamma1,
            gamma2,
            boundary_layer,
        })
    }

    /// `sgn(r)` with `sgn(0) = 0`, or the saturated ramp `r / ε` when a
    /// boundary layer is configured.
    pub fn switching(&self, r: f64) -> f64 {
        if self.boundary_layer > 0.0 {
            (r / self.boundary_layer).clamp(-1.0, 1.0)
        } else if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// `c = -(L + B)⁻¹ A f̂`.
pub fn corrective_signal(gm: &GraphMatrices, f_hat: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
    if f_hat.len() != gm.n() {
        return Err(ControlError::DimensionMismatch(format!(
            "f_hat has {} entries for {} followers",
            f_hat.len(),
            gm.n()
        )));
    }
    Ok(-(&gm.coupling * f_hat))
}

/// Per-agent control law
/// `u_i = (Σ_m λ_m e_i^{m+1}) / (d_i + b_i) + γ₁ r_i + γ₂ sgn(r_i) − f̂_i + c_i`.
pub fn control_law(
    errors: &ErrorState,
    gm: &GraphMatrices,
    f_hat: &DVector<f64>,
    gains: &ControllerGains,
) -> Result<DVector<f64>, ControlError> {
    let c = corrective_signal(gm, f_hat)?;
    let n = gm.n();
    if errors.n() != n {
        return Err(ControlError::DimensionMismatch(format!(
            "errors cover {} followers, topology has {n}",
            errors.n()
        )));
    }
    let mut u = DVector::zeros(n);
    for i in 0..n {
        let db = gm.db_diag[i];
        if db == 0.0 {
            return Err(ControlError::ZeroRowGain(i + 1));
        }
        let r = errors.r[i];
        u[i] = errors.eta[i] / db + gains.gamma1 * r + gains.gamma2 * gains.switching(r) - f_hat[i] + c[i];
    }
    Ok(u)
}

/// Stacked form `u = (D + B)⁻¹η + γ₁r + γ₂ sgn(r) − f̂ + c`, evaluated with
/// explicit matrices. Used to cross-check [`control_law`].
pub fn control_law_global(
    errors: &ErrorState,
    design: &SlidingDesign,
    gm: &GraphMatrices,
    f_hat: &DVector<f64>,
    gains: &ControllerGains,
) -> Result<DVector<f64>, ControlError> {
    if let Some(i) = gm.db_diag.iter().position(|&d| d == 0.0) {
        return Err(ControlError::ZeroRowGain(i + 1));
    }
    let db_inv = DMatrix::from_diagonal(&gm.db_diag.map(|d| 1.0 / d));
    let eta = errors.e2() * DVector::from_column_slice(design.lambda());
    let sgn = errors.r.map(|r| gains.switching(r));
    let c = -(gm.lb.clone().lu().solve(&(&gm.adjacency * f_hat)).ok_or_else(|| {
        ControlError::DimensionMismatch("L + B not invertible".into())
    })?);
    Ok(db_inv * eta + &errors.r * gains.gamma1 + sgn * gains.gamma2 - f_hat + c)
}

/// Echo of every quantity entering the certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateInputs {
    pub sigma_max_a: f64,
    pub sigma_max_lb: f64,
    pub sigma_min_db: f64,
    pub sigma_max_db: f64,
    pub sigma_max_p1: f64,
    pub sigma_min_p: f64,
    pub lambda_norm: f64,
    pub companion_frobenius: f64,
    pub alpha: f64,
    pub bounds: BoundEstimates,
    pub k: usize,
    pub psi_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCertificate {
    pub gamma1_min: f64,
    pub gamma2_min: f64,
    pub inputs: CertificateInputs,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma1_ok: bool,
    pub gamma2_ok: bool,
    /// `γ₂` sits exactly on the threshold (non-strict inequality only).
    pub gamma2_at_threshold: bool,
    pub verdict: bool,
}

/// Sufficient gain thresholds:
///
/// ```text
/// γ₁_min = σ̄(A)‖λ̄‖ / (σ̄(L+B) σ̲(D+B))
///        + (σ̄(A)‖Λ‖_F‖λ̄‖ / σ̲(D+B) + σ̄(P₁)/σ̲(P))² / (2α)
/// γ₂_min = σ̄(D+B)/σ̄(L+B) · (W_m ρ̂_m + 2(k+1) V_m ψ(μ))
///        + W_m ρ_m + ε_m + ω_m + f_m
/// ```
pub fn gain_certificate(
    gm: &GraphMatrices,
    design: &SlidingDesign,
    bounds: &BoundEstimates,
    k: usize,
    psi_mu: f64,
    gains: &ControllerGains,
) -> GainCertificate {
    let sv = &gm.sv_summary;
    let lambda_norm = design.lambda().iter().map(|l| l * l).sum::<f64>().sqrt();
    let companion_frobenius = design.companion().norm();
    let sigma_max_p1 = crate::linalg::sigma_max(design.p1());
    let alpha = design.alpha();

    let coupling = sv.a_max / sv.db_min;
    let gamma1_min = coupling * lambda_norm / sv.lb_max
        + (coupling * companion_frobenius * lambda_norm + sigma_max_p1 / sv.p_min).powi(2) / (2.0 * alpha);
    let gamma2_min = sv.db_max / sv.lb_max
        * (bounds.w_m * bounds.rho_hat_m + 2.0 * (k as f64 + 1.0) * bounds.v_m * psi_mu)
        + bounds.w_m * bounds.rho_m
        + bounds.eps_m
        + bounds.omega_m
        + bounds.f_m;

    let gamma1_ok = gains.gamma1 > gamma1_min;
    let gamma2_ok = gains.gamma2 >= gamma2_min;
    GainCertificate {
        gamma1_min,
        gamma2_min,
        inputs: CertificateInputs {
            sigma_max_a: sv.a_max,
            sigma_max_lb: sv.lb_max,
            sigma_min_db: sv.db_min,
            sigma_max_db: sv.db_max,
            sigma_max_p1,
            sigma_min_p: sv.p_min,
            lambda_norm,
            companion_frobenius,
            alpha,
            bounds: *bounds,
            k,
            psi_mu,
        },
        gamma1: gains.gamma1,
        gamma2: gains.gamma2,
        gamma1_ok,
        gamma2_ok,
        gamma2_at_threshold: gains.gamma2 == gamma2_min,
        verdict: gamma1_ok && gamma2_ok,
    }
}

/// Bound estimates as read from a file, where any field may be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialBounds {
    pub w_m: Option<f64>,
    pub v_m: Option<f64>,
    pub rho_m: Option<f64>,
    pub rho_hat_m: Option<f64>,
    pub eps_m: Option<f64>,
    pub omega_m: Option<f64>,
    pub f_m: Option<f64>,
}

impl PartialBounds {
    pub fn complete(&self) -> Result<BoundEstimates, ControlError> {
        Ok(BoundEstimates {
            w_m: self.w_m.ok_or(ControlError::MissingBound("w_m"))?,
            v_m: self.v_m.ok_or(ControlError::MissingBound("v_m"))?,
            rho_m: self.rho_m.ok_or(ControlError::MissingBound("rho_m"))?,
            rho_hat_m: self.rho_hat_m.ok_or(ControlError::MissingBound("rho_hat_m"))?,
            eps_m: self.eps_m.ok_or(ControlError::MissingBound("eps_m"))?,
            omega_m: self.omega_m.ok_or(ControlError::MissingBound("omega_m"))?,
            f_m: self.f_m.ok_or(ControlError::MissingBound("f_m"))?,
        })
    }
}
