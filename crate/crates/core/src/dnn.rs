//! Per-agent deep network estimator and its online adaptation laws.
//!
//! The inner layers map the agent state through
//! `Φ̂(x) = V̂_kᵀ φ(… V̂_1ᵀ φ(V̂_0ᵀ x))`, the output layer applies `ρ̂` and the
//! estimate is `f̂ = Ŵᵀ ρ̂(Φ̂(x))`. Parameters live in one flat buffer
//! (`Ŵ` first, then each `V̂_j` column-major) so the integrator can treat a
//! network as a slice of the global state.

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierError, BarrierFunction};
use crate::linalg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DnnError {
    #[error("dnn: {0}")]
    Architecture(String),
    #[error("dnn: {0}")]
    Config(String),
    #[error("dnn: parameter buffer has {got} entries, architecture needs {need}")]
    BufferSize { got: usize, need: usize },
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("dnn: inner law bound violated on layer {layer} at r = {r} (‖v‖_F = {lhs}, ψ·|√p r| = {rhs})")]
    BoundViolated { layer: usize, r: f64, lhs: f64, rhs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Bound on `|act(z)|` over the reals.
    pub fn magnitude_bound(self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeepNetworkArch {
    pub input_dim: usize,
    /// `[L_1, …, L_k]`; `k = layer_widths.len()` inner layers.
    pub layer_widths: Vec<usize>,
    pub output_width: usize,
    pub inner_activation: Activation,
    pub output_activation: Activation,
}

impl DeepNetworkArch {
    pub fn new(
        input_dim: usize,
        layer_widths: Vec<usize>,
        output_width: usize,
        inner_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, DnnError> {
        if input_dim == 0 || output_width == 0 || layer_widths.contains(&0) {
            return Err(DnnError::Architecture(format!(
                "all widths must be positive (input {input_dim}, inner {layer_widths:?}, output {output_width})"
            )));
        }
        Ok(Self {
            input_dim,
            layer_widths,
            output_width,
            inner_activation,
            output_activation,
        })
    }

    /// Builds from the widths after each inner weight matrix, the last of
    /// which is the output width `p`.
    pub fn from_stacked_widths(
        input_dim: usize,
        widths: &[usize],
        inner_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, DnnError> {
        let (&p, inner) = widths
            .split_last()
            .ok_or_else(|| DnnError::Architecture("widths must not be empty".into()))?;
        Self::new(input_dim, inner.to_vec(), p, inner_activation, output_activation)
    }

    /// Number of inner layers `k`; there are `k + 1` matrices `V̂_0 … V̂_k`.
    pub fn k(&self) -> usize {
        self.layer_widths.len()
    }

    pub fn n_weight_layers(&self) -> usize {
        self.k() + 1
    }

    /// `(L_j, L_{j+1})` for `V̂_j`.
    pub fn layer_shape(&self, j: usize) -> (usize, usize) {
        let rows = if j == 0 { self.input_dim } else { self.layer_widths[j - 1] };
        let cols = if j == self.k() { self.output_width } else { self.layer_widths[j] };
        (rows, cols)
    }

    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.n_weight_layers()).map(|j| self.layer_shape(j)).collect()
    }

    /// Offsets of `V̂_j` inside the flat buffer, plus the total length.
    fn offsets(&self) -> (Vec<usize>, usize) {
        let mut offs = Vec::with_capacity(self.n_weight_layers());
        let mut at = self.output_width;
        for (r, c) in self.layer_shapes() {
            offs.push(at);
            at += r * c;
        }
        (offs, at)
    }

    pub fn param_len(&self) -> usize {
        self.offsets().1
    }

    /// Bound on `‖ρ̂‖` implied by the output activation.
    pub fn rho_bound(&self) -> f64 {
        self.output_activation.magnitude_bound() * (self.output_width as f64).sqrt()
    }
}

/// Borrowed view of a network's parameters.
#[derive(Debug, Clone, Copy)]
pub struct NetworkView<'a> {
    arch: &'a DeepNetworkArch,
    params: &'a [f64],
    offsets: &'a [usize],
}

/// Owned parameters of one follower's network.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNetwork {
    arch: DeepNetworkArch,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

impl AgentNetwork {
    pub fn zeros(arch: &DeepNetworkArch) -> Self {
        let (offsets, len) = arch.offsets();
        Self {
            arch: arch.clone(),
            params: vec![0.0; len],
            offsets,
        }
    }

    pub fn from_params(arch: &DeepNetworkArch, params: Vec<f64>) -> Result<Self, DnnError> {
        let (offsets, len) = arch.offsets();
        if params.len() != len {
            return Err(DnnError::BufferSize { got: params.len(), need: len });
        }
        Ok(Self {
            arch: arch.clone(),
            params,
            offsets,
        })
    }

    /// Builds from `Ŵ` and the matrices `V̂_0 … V̂_k`.
    pub fn from_parts(
        arch: &DeepNetworkArch,
        w_hat: &DVector<f64>,
        v_hat: &[DMatrix<f64>],
    ) -> Result<Self, DnnError> {
        let mut net = Self::zeros(arch);
        if w_hat.len() != arch.output_width || v_hat.len() != arch.n_weight_layers() {
            return Err(DnnError::Architecture(format!(
                "expected {} output weights and {} layers",
                arch.output_width,
                arch.n_weight_layers()
            )));
        }
        net.params[..arch.output_width].copy_from_slice(w_hat.as_slice());
        for (j, v) in v_hat.iter().enumerate() {
            if v.shape() != arch.layer_shape(j) {
                return Err(DnnError::Architecture(format!(
                    "layer {j} is {:?}, expected {:?}",
                    v.shape(),
                    arch.layer_shape(j)
                )));
            }
            let off = net.offsets[j];
            net.params[off..off + v.len()].copy_from_slice(v.as_slice());
        }
        Ok(net)
    }

    /// Every parameter drawn independently from `U[lo, hi]`.
    pub fn random_uniform<R: Rng + ?Sized>(arch: &DeepNetworkArch, lo: f64, hi: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for p in &mut net.params {
            *p = rng.random_range(lo..=hi);
        }
        net
    }

    pub fn arch(&self) -> &DeepNetworkArch {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn view(&self) -> NetworkView<'_> {
        NetworkView {
            arch: &self.arch,
            params: &self.params,
            offsets: &self.offsets,
        }
    }

    pub fn w_hat(&self) -> DVector<f64> {
        DVector::from_column_slice(self.view().w_hat())
    }

    pub fn v_hat(&self, j: usize) -> DMatrix<f64> {
        self.view().v_hat(j).into_owned()
    }

    pub fn forward(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let mut rho = vec![0.0; self.arch.output_width];
        let f = self.view().forward_into(x, &mut rho);
        (f, DVector::from_vec(rho))
    }

    /// Layout offsets shared by every network with this architecture.
    pub fn layout(&self) -> &[usize] {
        &self.offsets
    }
}

impl<'a> NetworkView<'a> {
    pub fn new(arch: &'a DeepNetworkArch, offsets: &'a [usize], params: &'a [f64]) -> Self {
        debug_assert_eq!(params.len(), arch.param_len());
        Self { arch, params, offsets }
    }

    pub fn w_hat(&self) -> &'a [f64] {
        &self.params[..self.arch.output_width]
    }

    pub fn v_hat(&self, j: usize) -> DMatrixView<'a, f64> {
        let (r, c) = self.arch.layer_shape(j);
        let off = self.offsets[j];
        DMatrixView::from_slice(&self.params[off..off + r * c], r, c)
    }

    pub fn v_slice(&self, j: usize) -> &'a [f64] {
        let (r, c) = self.arch.layer_shape(j);
        let off = self.offsets[j];
        &self.params[off..off + r * c]
    }

    pub fn w_norm(&self) -> f64 {
        norm(self.w_hat())
    }

    pub fn v_norm(&self, j: usize) -> f64 {
        norm(self.v_slice(j))
    }

    /// Writes `ρ̂(Φ̂(x))` into `rho` and returns `Ŵᵀρ̂`.
    pub fn forward_into(&self, x: &[f64], rho: &mut [f64]) -> f64 {
        let arch = self.arch;
        let mut h: Vec<f64> = x.to_vec();
        for j in 0..arch.n_weight_layers() {
            if j > 0 {
                for v in &mut h {
                    *v = arch.inner_activation.apply(*v);
                }
            }
            let (rows, cols) = arch.layer_shape(j);
            let v = self.v_slice(j);
            let next: Vec<f64> = (0..cols)
                .map(|c| {
                    let col = &v[c * rows..(c + 1) * rows];
                    col.iter().zip(&h).map(|(a, b)| a * b).sum()
                })
                .collect();
            h = next;
        }
        for (dst, z) in rho.iter_mut().zip(&h) {
            *dst = arch.output_activation.apply(*z);
        }
        self.w_hat().iter().zip(rho.iter()).map(|(w, r)| w * r).sum()
    }
}

fn norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// What happens after every layer has had its window once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchSchedule {
    #[default]
    Cyclic,
    OneShot,
}

/// Argument fed to `Υ_d` in the update laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierArgument {
    /// `|√p_i r_i|`, local to each follower.
    #[default]
    PerAgent,
    /// `‖r‖_P`, shared by all followers.
    Global,
}

/// Shape of the user-defined inner-layer law `v_ij(r_i, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerLaw {
    /// `v = scale · K_V · exp(-r²/2) · √p · r`.
    Gaussian { scale: f64 },
}

impl Default for InnerLaw {
    fn default() -> Self {
        InnerLaw::Gaussian { scale: 1.0 }
    }
}

impl InnerLaw {
    /// Scalar multiplying `K_V` in `v_ij`.
    pub fn factor(&self, r: f64, p: f64) -> f64 {
        match *self {
            InnerLaw::Gaussian { scale } => scale * (-0.5 * r * r).exp() * p.sqrt() * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub k_w: DMatrix<f64>,
    pub k_v: Vec<DMatrix<f64>>,
    pub v_lower: Vec<f64>,
    pub v_upper: Vec<f64>,
    pub switch_period: f64,
    pub schedule: SwitchSchedule,
    pub barrier_arg: BarrierArgument,
    pub inner_law: InnerLaw,
}

impl AdaptationConfig {
    /// Checks shapes against `arch`, the band ordering, and that `K_W` is
    /// symmetric positive semidefinite with a positive diagonal.
    pub fn validate(&self, arch: &DeepNetworkArch, v_max: Option<f64>) -> Result<(), DnnError> {
        let p = arch.output_width;
        if self.k_w.shape() != (p, p) {
            return Err(DnnError::Config(format!(
                "k_w is {:?}, expected {p}x{p}",
                self.k_w.shape()
            )));
        }
        if linalg::asymmetry(&self.k_w) > 1e-12 * (1.0 + self.k_w.amax()) {
            return Err(DnnError::Config("k_w must be symmetric".into()));
        }
        if self.k_w.diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(DnnError::Config("k_w must have a positive diagonal".into()));
        }
        let min_eig = linalg::min_symmetric_eigenvalue(&self.k_w);
        if min_eig < -1e-9 * self.k_w.amax() {
            return Err(DnnError::Config(format!(
                "k_w must be positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        let layers = arch.n_weight_layers();
        if self.k_v.len() != layers || self.v_lower.len() != layers || self.v_upper.len() != layers {
            return Err(DnnError::Config(format!(
                "k_v and the band need one entry per weight layer ({layers})"
            )));
        }
        for j in 0..layers {
            if self.k_v[j].shape() != arch.layer_shape(j) {
                return Err(DnnError::Config(format!(
                    "k_v[{j}] is {:?}, expected {:?}",
                    self.k_v[j].shape(),
                    arch.layer_shape(j)
                )));
            }
            if self.k_v[j].iter().any(|v| !v.is_finite()) {
                return Err(DnnError::Config(format!("k_v[{j}] has non-finite entries")));
            }
            let (lo, hi) = (self.v_lower[j], self.v_upper[j]);
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                return Err(DnnError::Config(format!(
                    "band for layer {j} must satisfy 0 <= lower < upper (got [{lo}, {hi}])"
                )));
            }
            if let Some(vm) = v_max {
                if hi > vm {
                    return Err(DnnError::Config(format!(
                        "band upper {hi} for layer {j} exceeds V_m = {vm}"
                    )));
                }
            }
        }
        if !(self.switch_period > 0.0) || !self.switch_period.is_finite() {
            return Err(DnnError::Config(format!(
                "switch_period must be positive (got {})",
                self.switch_period
            )));
        }
        Ok(())
    }

    pub fn is_k_w_positive_definite(&self) -> bool {
        linalg::min_symmetric_eigenvalue(&self.k_w) > 0.0
    }

    /// Layer whose update window contains `t`, if any. Windows are
    /// half-open: layer `j` owns `[j·T, (j+1)·T)` within each cycle.
    pub fn active_layer(&self, t: f64, n_layers: usize) -> Option<usize> {
        if !(t >= 0.0) || n_layers == 0 {
            return None;
        }
        let slot = (t / self.switch_period).floor();
        match self.schedule {
            SwitchSchedule::Cyclic => Some((slot % n_layers as f64) as usize),
            SwitchSchedule::OneShot => {
                let s = slot as usize;
                (slot < n_layers as f64).then_some(s)
            }
        }
    }

    /// `s_ij(t) ∈ {0, 1}`.
    pub fn switch_signal(&self, t: f64, j: usize, n_layers: usize) -> u8 {
        u8::from(self.active_layer(t, n_layers) == Some(j))
    }

    /// `ψ` for the configured inner law: `max_j ‖K_Vj‖_F`.
    pub fn psi(&self) -> f64 {
        self.k_v.iter().map(|k| k.norm()).fold(0.0, f64::max)
    }
}

/// Per-follower scalars the update laws need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSignal {
    pub r: f64,
    pub p: f64,
    /// `d_i + b_i`.
    pub db: f64,
    /// Argument passed to `Υ_d`.
    pub barrier_arg: f64,
}

impl AgentSignal {
    pub fn new(r: f64, p: f64, db: f64) -> Self {
        Self {
            r,
            p,
            db,
            barrier_arg: (p.sqrt() * r).abs(),
        }
    }

    pub fn with_barrier_arg(mut self, z: f64) -> Self {
        self.barrier_arg = z;
        self
    }
}

/// `dŴ_i/dt = -K_W ρ̂ Υ_d r_i p_i (d_i + b_i)`, written into `out`.
pub fn outer_update_into(
    k_w: &DMatrix<f64>,
    rho: &[f64],
    sig: &AgentSignal,
    barrier: &BarrierFunction,
    out: &mut [f64],
) -> Result<(), DnnError> {
    let ud = barrier.potential_derivative(sig.barrier_arg)?;
    let scale = -ud * sig.r * sig.p * sig.db;
    let p = rho.len();
    for (i, o) in out.iter_mut().enumerate().take(p) {
        let mut acc = 0.0;
        for (c, &rc) in rho.iter().enumerate() {
            acc += k_w[(i, c)] * rc;
        }
        *o = scale * acc;
    }
    Ok(())
}

pub fn outer_update(
    cfg: &AdaptationConfig,
    rho: &DVector<f64>,
    sig: &AgentSignal,
    barrier: &BarrierFunction,
) -> Result<DVector<f64>, DnnError> {
    let mut out = vec![0.0; rho.len()];
    outer_update_into(&cfg.k_w, rho.as_slice(), sig, barrier, &mut out)?;
    Ok(DVector::from_vec(out))
}

/// `dV̂_ij/dt = -s_ij v_ij 𝟙{band} Υ_d (d_i + b_i)`, written into `out`
/// (column-major). Returns whether the update was live.
#[allow(clippy::too_many_arguments)]
pub fn inner_update_into(
    cfg: &AdaptationConfig,
    layer: usize,
    current_norm: f64,
    switch_on: bool,
    sig: &AgentSignal,
    barrier: &BarrierFunction,
    out: &mut [f64],
) -> Result<bool, DnnError> {
    let ud = barrier.potential_derivative(sig.barrier_arg)?;
    let in_band = cfg.v_lower[layer] <= current_norm && current_norm <= cfg.v_upper[layer];
    if !switch_on || !in_band {
        out.fill(0.0);
        return Ok(false);
    }
    let scale = -cfg.inner_law.factor(sig.r, sig.p) * ud * sig.db;
    for (o, k) in out.iter_mut().zip(cfg.k_v[layer].iter()) {
        *o = scale * k;
    }
    Ok(true)
}

pub fn inner_update(
    cfg: &AdaptationConfig,
    net: &AgentNetwork,
    layer: usize,
    t: f64,
    sig: &AgentSignal,
    barrier: &BarrierFunction,
) -> Result<DMatrix<f64>, DnnError> {
    let n_layers = net.arch().n_weight_layers();
    let (rows, cols) = net.arch().layer_shape(layer);
    let mut out = vec![0.0; rows * cols];
    inner_update_into(
        cfg,
        layer,
        net.view().v_norm(layer),
        cfg.switch_signal(t, layer, n_layers) == 1,
        sig,
        barrier,
        &mut out,
    )?;
    Ok(DMatrix::from_vec(rows, cols, out))
}

/// Outcome of the numerical check `‖v_ij(r)‖_F ≤ ψ·|√p r|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VBoundReport {
    pub psi: f64,
    /// Smallest `ψ|√p r| − ‖v‖_F` over the grid.
    pub tightest_margin: f64,
    pub tightest_r: f64,
    pub samples: usize,
}

pub fn check_v_bound(cfg: &AdaptationConfig, p: f64, r_grid: &[f64]) -> Result<VBoundReport, DnnError> {
    let psi = cfg.psi();
    let mut report = VBoundReport {
        psi,
        tightest_margin: f64::INFINITY,
        tightest_r: f64::NAN,
        samples: 0,
    };
    for &r in r_grid {
        let rhs = psi * (p.sqrt() * r).abs();
        for (layer, k) in cfg.k_v.iter().enumerate() {
            let lhs = cfg.inner_law.factor(r, p).abs() * k.norm();
            let margin = rhs - lhs;
            // Relative slack absorbs rounding when both sides coincide.
            if margin < -1e-12 * rhs.max(lhs) {
                return Err(DnnError::BoundViolated { layer, r, lhs, rhs });
            }
            if margin < report.tightest_margin {
                report.tightest_margin = margin;
                report.tightest_r = r;
            }
            report.samples += 1;
        }
    }
    Ok(report)
}

/// Positive bounds used by the gain certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimates {
    pub w_m: f64,
    pub v_m: f64,
    pub rho_m: f64,
    pub rho_hat_m: f64,
    pub eps_m: f64,
    pub omega_m: f64,
    pub f_m: f64,
}

impl BoundEstimates {
    pub fn validate(&self) -> Result<(), DnnError> {
        let fields = [
            ("w_m", self.w_m),
            ("v_m", self.v_m),
            ("rho_m", self.rho_m),
            ("rho_hat_m", self.rho_hat_m),
            ("eps_m", self.eps_m),
            ("omega_m", self.omega_m),
            ("f_m", self.f_m),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DnnError::Config(format!("bound {name} must be finite and nonnegative (got {v})")));
            }
        }
        Ok(())
    }
}
