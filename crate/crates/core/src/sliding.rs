//! Sliding-surface design and synchronization errors.
//!
//! For an order-`M` chain the sliding variable of follower `i` is
//! `r_i = λ_1 e_i¹ + … + λ_{M-1} e_i^{M-1} + e_i^M`. The coefficients must make
//! `s^{M-1} + λ_{M-1} s^{M-2} + … + λ_1` Hurwitz; the companion matrix of that
//! polynomial and the solution of `ΛᵀP₁ + P₁Λ = -αI` certify the decay of the
//! lower-order errors once `r = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::graph::GraphMatrices;
use crate::linalg;

pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlidingError {
    #[error("sliding: root beta_{index} = {value} must be positive")]
    NonPositiveRoot { index: usize, value: f64 },
    #[error("sliding: lambda must have at least one coefficient (order M >= 2)")]
    EmptyLambda,
    #[error("sliding: polynomial with lambda {lambda:?} is not Hurwitz (max eigenvalue real part {max_re})")]
    NotHurwitz { lambda: Vec<f64>, max_re: f64 },
    #[error("sliding: alpha must be positive and finite (got {0})")]
    InvalidAlpha(f64),
    #[error("sliding: Lyapunov linear system is singular")]
    SolveFailure,
    #[error("sliding: Lyapunov solution failed verification (residual {residual:e}, min eigenvalue {min_eig:e})")]
    LyapunovCheck { residual: f64, min_eig: f64 },
    #[error("sliding: dimension mismatch ({0})")]
    DimensionMismatch(String),
}

/// Coefficients `[λ_1, …, λ_{M-1}]` of `∏ (s + β_k)` in ascending order,
/// with the monic leading coefficient dropped.
pub fn lambdas_from_roots(betas: &[f64]) -> Result<Vec<f64>, SlidingError> {
    if betas.is_empty() {
        return Err(SlidingError::EmptyLambda);
    }
    for (k, &b) in betas.iter().enumerate() {
        if !(b > 0.0) || !b.is_finite() {
            return Err(SlidingError::NonPositiveRoot { index: k + 1, value: b });
        }
    }
    // coeffs[d] multiplies s^d.
    let mut coeffs = vec![1.0];
    for &b in betas {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (d, &c) in coeffs.iter().enumerate() {
            next[d] += b * c;
            next[d + 1] += c;
        }
        coeffs = next;
    }
    coeffs.pop();
    Ok(coeffs)
}

/// Companion matrix: identity on the superdiagonal, `-λ̄ᵀ` on the last row.
pub fn companion(lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        c[(i, i + 1)] = 1.0;
    }
    for (j, &l) in lambda.iter().enumerate() {
        c[(n - 1, j)] = -l;
    }
    c
}

/// Largest real part among the eigenvalues of the companion matrix.
pub fn spectral_abscissa(lambda: &[f64]) -> f64 {
    if lambda.len() == 1 {
        return -lambda[0];
    }
    companion(lambda)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(lambda: &[f64]) -> bool {
    !lambda.is_empty() && lambda.iter().all(|l| l.is_finite()) && spectral_abscissa(lambda) < 0.0
}

/// Solves `ΛᵀX + XΛ = -αI` through `(I⊗Λᵀ + Λᵀ⊗I) vec(X) = -α vec(I)` and
/// symmetrizes the result.
pub fn solve_lyapunov(lambda_mat: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>, SlidingError> {
    let n = lambda_mat.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let lt = lambda_mat.transpose();
    let system = eye.kronecker(&lt) + lt.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, (-alpha * &eye).iter().copied());
    let sol = system.lu().solve(&rhs).ok_or(SlidingError::SolveFailure)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

pub fn lyapunov_residual(lambda_mat: &DMatrix<f64>, p1: &DMatrix<f64>, alpha: f64) -> f64 {
    let n = lambda_mat.nrows();
    (lambda_mat.transpose() * p1 + p1 * lambda_mat + DMatrix::identity(n, n) * alpha).norm()
}

/// A validated sliding surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlidingDesign {
    lambda: Vec<f64>,
    #[serde(skip)]
    companion: DMatrix<f64>,
    alpha: f64,
    #[serde(skip)]
    p1: DMatrix<f64>,
    lyapunov_residual: f64,
}

impl SlidingDesign {
    /// Validates Hurwitz-ness and solves the Lyapunov equation.
    pub fn new(lambda: Vec<f64>, alpha: f64) -> Result<Self, SlidingError> {
        if lambda.is_empty() {
            return Err(SlidingError::EmptyLambda);
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(SlidingError::InvalidAlpha(alpha));
        }
        let max_re = spectral_abscissa(&lambda);
        if !(max_re < 0.0) {
            return Err(SlidingError::NotHurwitz { lambda, max_re });
        }
        let companion = companion(&lambda);
        let p1 = solve_lyapunov(&companion, alpha)?;
        let residual = lyapunov_residual(&companion, &p1, alpha);
        let min_eig = linalg::min_symmetric_eigenvalue(&p1);
        if !(residual < LYAPUNOV_RESIDUAL_TOL * (1.0 + alpha)) || !(min_eig > 0.0) {
            return Err(SlidingError::LyapunovCheck { residual, min_eig });
        }
        Ok(Self {
            lambda,
            companion,
            alpha,
            p1,
            lyapunov_residual: residual,
        })
    }

    pub fn from_roots(betas: &[f64], alpha: f64) -> Result<Self, SlidingError> {
        Self::new(lambdas_from_roots(betas)?, alpha)
    }

    /// System order `M`.
    pub fn order(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn companion(&self) -> &DMatrix<f64> {
        &self.companion
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p1(&self) -> &DMatrix<f64> {
        &self.p1
    }

    pub fn lyapunov_residual(&self) -> f64 {
        self.lyapunov_residual
    }

    /// `l = [0, …, 0, 1]`.
    pub fn selector(&self) -> DVector<f64> {
        let mut l = DVector::zeros(self.lambda.len());
        l[self.lambda.len() - 1] = 1.0;
        l
    }

    /// Precondition of the error bound `‖e^m‖_P < μ`: `Σ λ_i > 1`.
    pub fn lambda_sum_exceeds_one(&self) -> bool {
        self.lambda.iter().sum::<f64>() > 1.0
    }
}

/// Synchronization errors and sliding quantities at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    /// `N × M`, column `m` is `e^{m+1}`.
    pub e: DMatrix<f64>,
    pub r: DVector<f64>,
    pub eta: DVector<f64>,
}

impl ErrorState {
    pub fn new(e: DMatrix<f64>, lambda: &[f64]) -> Result<Self, SlidingError> {
        let (r, eta) = sliding_variable(&e, lambda)?;
        Ok(Self { e, r, eta })
    }

    pub fn from_states(
        x: &DMatrix<f64>,
        x0: &DVector<f64>,
        gm: &GraphMatrices,
        lambda: &[f64],
    ) -> Result<Self, SlidingError> {
        Self::new(sync_errors(x, x0, gm)?, lambda)
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn order(&self) -> usize {
        self.e.ncols()
    }

    /// `[e¹ … e^{M-1}]`.
    pub fn e1(&self) -> DMatrix<f64> {
        self.e.columns(0, self.order() - 1).into_owned()
    }

    /// `[e² … e^M]`.
    pub fn e2(&self) -> DMatrix<f64> {
        self.e.columns(1, self.order() - 1).into_owned()
    }

    /// Max-abs residual of `E₂ = E₁Λᵀ + r lᵀ`.
    pub fn identity_residual(&self, design: &SlidingDesign) -> f64 {
        let rl = &self.r * design.selector().transpose();
        (self.e2() - self.e1() * design.companion().transpose() - rl).amax()
    }
}

/// `e^m = -(L + B)(x^m - 1 x_0^m)` for every derivative order `m`.
pub fn sync_errors(
    x: &DMatrix<f64>,
    x0: &DVector<f64>,
    gm: &GraphMatrices,
) -> Result<DMatrix<f64>, SlidingError> {
    let n = gm.n();
    if x.nrows() != n || x.ncols() != x0.len() {
        return Err(SlidingError::DimensionMismatch(format!(
            "states are {}x{}, leader has {} entries, topology has {n} followers",
            x.nrows(),
            x.ncols(),
            x0.len()
        )));
    }
    let mut dev = x.clone();
    for (m, mut col) in dev.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x0[m]);
    }
    Ok(-(&gm.lb * dev))
}

/// Returns `(r, η)` with `η = Σ_m λ_m e^{m+1}`.
pub fn sliding_variable(
    e: &DMatrix<f64>,
    lambda: &[f64],
) -> Result<(DVector<f64>, DVector<f64>), SlidingError> {
    if e.ncols() != lambda.len() + 1 {
        return Err(SlidingError::DimensionMismatch(format!(
            "errors have {} orders, lambda implies {}",
            e.ncols(),
            lambda.len() + 1
        )));
    }
    let order = e.ncols();
    let mut r = e.column(order - 1).into_owned();
    let mut eta = DVector::zeros(e.nrows());
    for (m, &l) in lambda.iter().enumerate() {
        r.axpy(l, &e.column(m), 1.0);
        eta.axpy(l, &e.column(m + 1), 1.0);
    }
    Ok((r, eta))
}
