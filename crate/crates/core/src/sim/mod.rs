//! Fixed-step simulation of the closed loop.
//!
//! The integrated state is one flat vector: follower states (agent-major),
//! then the leader state, then every follower's network parameters in the
//! layout used by [`AgentNetwork`].

pub mod integrator;
pub mod monitor;
pub mod trace;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::BarrierFunction;
use crate::controller::ControllerGains;
use crate::dnn::{
    inner_update_into, outer_update_into, AdaptationConfig, AgentNetwork, AgentSignal, BarrierArgument,
    DeepNetworkArch, NetworkView,
};
use crate::graph::{DirectedTopology, GraphMatrices};
use crate::plant::{chain_derivative, EvalError, FollowerModel, LeaderModel};
use crate::sliding::{ErrorState, SlidingDesign};
pub use integrator::Method;
pub use monitor::{monitor, MonitorContext, MonitorReport};
pub use trace::{TraceRecord, TraceShape};

/// RNG streams derived from the run seed.
pub mod streams {
    pub const DISTURBANCE: u64 = 0;
    pub const ESTIMATES: u64 = 1;
    pub const IDEAL: u64 = 2;
    pub const PERTURBATION: u64 = 3;
}

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("sim: initial condition violates the barrier (‖r(0)‖_P = {r_norm} ≥ μ = {mu})")]
    InitialBarrierViolation { r_norm: f64, mu: f64 },
    #[error("sim: barrier breached at t = {t} (‖r‖_P = {r_norm} ≥ μ = {mu})")]
    BarrierBreach { t: f64, r_norm: f64, mu: f64 },
    #[error("sim: non-finite state at t = {t}")]
    NumericOverflow { t: f64 },
    #[error("sim: dynamics evaluation failed at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("sim: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Standard,
    SyntheticTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    pub decimation: usize,
}

impl IntegratorSettings {
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// A fully resolved experiment: every random draw has already been made.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: DirectedTopology,
    pub graph: GraphMatrices,
    pub design: SlidingDesign,
    pub barrier: BarrierFunction,
    pub arch: DeepNetworkArch,
    pub adaptation: AdaptationConfig,
    pub gains: ControllerGains,
    pub followers: Vec<FollowerModel>,
    pub leader: LeaderModel,
    pub initial_networks: Vec<AgentNetwork>,
    /// Present in synthetic-truth mode only.
    pub ideal_networks: Option<Vec<AgentNetwork>>,
    pub integrator: IntegratorSettings,
    pub seed: u64,
    /// Width of the `|r_i|` zone excluded from the decrease check.
    pub chatter_band: f64,
}

impl Scenario {
    pub fn mode(&self) -> Mode {
        if self.ideal_networks.is_some() {
            Mode::SyntheticTruth
        } else {
            Mode::Standard
        }
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.followers.iter().map(|f| f.disturbance.amplitude).collect()
    }

    pub fn n(&self) -> usize {
        self.followers.len()
    }

    pub fn order(&self) -> usize {
        self.design.order()
    }

    pub fn trace_shape(&self) -> TraceShape {
        TraceShape {
            n: self.n(),
            m: self.order(),
            layers: self.arch.n_weight_layers(),
            full_lyapunov: self.ideal_networks.is_some(),
        }
    }

    pub fn monitor_context(&self) -> MonitorContext {
        MonitorContext {
            mu: self.barrier.mu(),
            order: self.order(),
            n_followers: self.n(),
            layers: self.arch.n_weight_layers(),
            v_upper: self.adaptation.v_upper.clone(),
            chatter_band: self.chatter_band,
            lambda_sum_exceeds_one: self.design.lambda_sum_exceeds_one(),
        }
    }

    /// `‖r(0)‖_P` for the configured initial states.
    pub fn initial_r_norm(&self) -> Result<f64, SimError> {
        let model = Model::new(self)?;
        let y = model.initial_state(self);
        let mut scratch = Scratch::new(&model);
        model.errors(&y, &mut scratch);
        Ok(scratch.r_norm)
    }
}

/// Ideal and estimated networks for synthetic-truth runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNetworks {
    pub ideal: Vec<AgentNetwork>,
    pub estimates: Vec<AgentNetwork>,
}

/// Draws a seeded ideal network per follower (entries in `±ideal_range`)
/// and starts each estimate at the ideal weights plus a uniform
/// perturbation in `±perturbation`.
pub fn synthetic_truth_setup(
    arch: &DeepNetworkArch,
    n: usize,
    seed: u64,
    ideal_range: f64,
    perturbation: f64,
) -> SyntheticNetworks {
    let mut ideal_rng = seeded_rng(seed, streams::IDEAL);
    let mut pert_rng = seeded_rng(seed, streams::PERTURBATION);
    let ideal: Vec<AgentNetwork> = (0..n)
        .map(|_| AgentNetwork::random_uniform(arch, -ideal_range, ideal_range, &mut ideal_rng))
        .collect();
    let estimates = ideal
        .iter()
        .map(|net| {
            let mut est = net.clone();
            if perturbation > 0.0 {
                let noise = AgentNetwork::random_uniform(arch, -perturbation, perturbation, &mut pert_rng);
                for (p, d) in est.params_mut().iter_mut().zip(noise.params()) {
                    *p += d;
                }
            }
            est
        })
        .collect();
    SyntheticNetworks { ideal, estimates }
}

/// Why a run stopped before `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortInfo {
    pub t: f64,
    pub reason: String,
    pub barrier_breach: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub report: MonitorReport,
    pub abort: Option<AbortInfo>,
    pub amplitudes: Vec<f64>,
}

/// Precomputed, read-only pieces of the right-hand side.
struct Model<'a> {
    sc: &'a Scenario,
    n: usize,
    m: usize,
    layers: usize,
    plen: usize,
    offsets: Vec<usize>,
    p_diag: Vec<f64>,
    db: Vec<f64>,
    lb: DMatrix<f64>,
    coupling: DMatrix<f64>,
    k_w_inv: Option<DMatrix<f64>>,
}

/// Buffers filled by the last right-hand-side evaluation.
struct Scratch {
    dev: Vec<f64>,
    e: Vec<f64>,
    r: Vec<f64>,
    eta: Vec<f64>,
    r_norm: f64,
    f_hat: Vec<f64>,
    rho: Vec<f64>,
    u: Vec<f64>,
}

impl Scratch {
    fn new(model: &Model) -> Self {
        let (n, m) = (model.n, model.m);
        Self {
            dev: vec![0.0; n * m],
            e: vec![0.0; n * m],
            r: vec![0.0; n],
            eta: vec![0.0; n],
            r_norm: 0.0,
            f_hat: vec![0.0; n],
            rho: vec![0.0; n * model.sc.arch.output_width],
            u: vec![0.0; n],
        }
    }
}

impl<'a> Model<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        let n = sc.n();
        let m = sc.order();
        if sc.graph.n() != n || sc.initial_networks.len() != n {
            return Err(SimError::Setup(format!(
                "{n} followers but topology has {} and {} networks are given",
                sc.graph.n(),
                sc.initial_networks.len()
            )));
        }
        if sc.arch.input_dim != m {
            return Err(SimError::Setup(format!("network input is {} but the order is {m}", sc.arch.input_dim)));
        }
        let offsets = sc.initial_networks[0].layout().to_vec();
        let k_w_inv = match &sc.ideal_networks {
            Some(_) => Some(
                sc.adaptation
                    .k_w
                    .clone()
                    .cholesky()
                    .ok_or_else(|| SimError::Setup("synthetic mode needs a positive definite k_w".into()))?
                    .inverse(),
            ),
            None => None,
        };
        Ok(Self {
            sc,
            n,
            m,
            layers: sc.arch.n_weight_layers(),
            plen: sc.arch.param_len(),
            offsets,
            p_diag: sc.graph.p_diag.iter().copied().collect(),
            db: sc.graph.db_diag.iter().copied().collect(),
            lb: sc.graph.lb.clone(),
            coupling: sc.graph.coupling.clone(),
            k_w_inv,
        })
    }

    fn state_len(&self) -> usize {
        self.n * self.m + self.m + self.n * self.plen
    }

    fn params_base(&self) -> usize {
        self.n * self.m + self.m
    }

    fn initial_state(&self, sc: &Scenario) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.state_len());
        for f in &sc.followers {
            y.extend_from_slice(&f.x_init);
        }
        y.extend_from_slice(&sc.leader.x_init);
        for net in &sc.initial_networks {
            y.extend_from_slice(net.params());
        }
        y
    }

    fn view<'b>(&'b self, y: &'b [f64], i: usize) -> NetworkView<'b> {
        let base = self.params_base() + i * self.plen;
        NetworkView::new(&self.sc.arch, &self.offsets, &y[base..base + self.plen])
    }

    /// Synchronization errors, `r`, `η` and `‖r‖_P`.
    fn errors(&self, y: &[f64], s: &mut Scratch) {
        let (n, m) = (self.n, self.m);
        let x0 = &y[n * m..n * m + m];
        for i in 0..n {
            for k in 0..m {
                s.dev[i * m + k] = y[i * m + k] - x0[k];
            }
        }
        for i in 0..n {
            for k in 0..m {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.lb[(i, j)] * s.dev[j * m + k];
                }
                s.e[i * m + k] = -acc;
            }
        }
        let lambda = self.sc.design.lambda();
        let mut quad = 0.0;
        for i in 0..n {
            let row = &s.e[i * m..(i + 1) * m];
            let mut r = row[m - 1];
            let mut eta = 0.0;
            for (k, &l) in lambda.iter().enumerate() {
                r += l * row[k];
                eta += l * row[k + 1];
            }
            s.r[i] = r;
            s.eta[i] = eta;
            quad += self.p_diag[i] * r * r;
        }
        s.r_norm = quad.sqrt();
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], s: &mut Scratch) -> Result<(), SimError> {
        let (n, m) = (self.n, self.m);
        let sc = self.sc;
        let mu = sc.barrier.mu();
        self.errors(y, s);
        if !(s.r_norm < mu) {
            return Err(SimError::BarrierBreach { t, r_norm: s.r_norm, mu });
        }

        let p_out = sc.arch.output_width;
        for i in 0..n {
            let x_i = &y[i * m..(i + 1) * m];
            s.f_hat[i] = self.view(y, i).forward_into(x_i, &mut s.rho[i * p_out..(i + 1) * p_out]);
        }
        let gains = &sc.gains;
        for i in 0..n {
            let mut c = 0.0;
            for j in 0..n {
                c -= self.coupling[(i, j)] * s.f_hat[j];
            }
            let r = s.r[i];
            s.u[i] = s.eta[i] / self.db[i] + gains.gamma1 * r + gains.gamma2 * gains.switching(r) - s.f_hat[i] + c;
        }

        let x0 = &y[n * m..n * m + m];
        let top0 = sc.leader.top_derivative(x0, t).map_err(|source| SimError::Eval { t, source })?;
        chain_derivative(x0, top0, &mut dy[n * m..n * m + m]);
        for (i, f) in sc.followers.iter().enumerate() {
            let x_i = &y[i * m..(i + 1) * m];
            let fi = f.f.eval(x_i, x0, t).map_err(|source| SimError::Eval { t, source })?;
            let top = fi + s.u[i] + f.disturbance.value(t);
            chain_derivative(x_i, top, &mut dy[i * m..(i + 1) * m]);
        }

        let cfg = &sc.adaptation;
        let active = cfg.active_layer(t, self.layers);
        let breach = |_| SimError::BarrierBreach { t, r_norm: s.r_norm, mu };
        for i in 0..n {
            let mut sig = AgentSignal::new(s.r[i], self.p_diag[i], self.db[i]);
            if cfg.barrier_arg == BarrierArgument::Global {
                sig = sig.with_barrier_arg(s.r_norm);
            }
            let base = self.params_base() + i * self.plen;
            let d_net = &mut dy[base..base + self.plen];
            outer_update_into(&cfg.k_w, &s.rho[i * p_out..(i + 1) * p_out], &sig, &sc.barrier, &mut d_net[..p_out])
                .map_err(breach)?;
            let view = self.view(y, i);
            for j in 0..self.layers {
                let off = self.offsets[j];
                let len = view.v_slice(j).len();
                let out = &mut d_net[off..off + len];
                if active == Some(j) {
                    inner_update_into(cfg, j, view.v_norm(j), true, &sig, &sc.barrier, out).map_err(breach)?;
                } else {
                    out.fill(0.0);
                }
            }
        }
        Ok(())
    }

    fn record(&self, t: f64, y: &[f64], s: &Scratch) -> TraceRecord {
        let (n, m) = (self.n, self.m);
        let sc = self.sc;
        let e_norms = (0..m)
            .map(|k| (0..n).map(|i| self.p_diag[i] * s.e[i * m + k].powi(2)).sum::<f64>().sqrt())
            .collect();
        let barrier_value = sc.barrier.potential(s.r_norm).unwrap_or(f64::INFINITY);
        let p1 = sc.design.p1();
        let mut quad = 0.0;
        for i in 0..n {
            let row = &s.e[i * m..i * m + m - 1];
            for a in 0..m - 1 {
                for b in 0..m - 1 {
                    quad += row[a] * p1[(a, b)] * row[b];
                }
            }
        }
        let v_obs = 0.5 * barrier_value + 0.5 * quad;

        let mut w_norms = Vec::with_capacity(n);
        let mut v_norms = Vec::with_capacity(n * self.layers);
        for i in 0..n {
            let view = self.view(y, i);
            w_norms.push(view.w_norm());
            for j in 0..self.layers {
                v_norms.push(view.v_norm(j));
            }
        }

        let v_full = match (&sc.ideal_networks, &self.k_w_inv) {
            (Some(ideal), Some(k_inv)) => {
                let p_out = sc.arch.output_width;
                let mut extra = 0.0;
                for (i, net) in ideal.iter().enumerate() {
                    let est = self.view(y, i);
                    let w_err = DVector::from_iterator(
                        p_out,
                        est.w_hat().iter().zip(net.view().w_hat()).map(|(a, b)| b - a),
                    );
                    extra += 0.5 * w_err.dot(&(k_inv * &w_err));
                    let base = self.params_base() + i * self.plen;
                    let v_err: f64 = y[base + p_out..base + self.plen]
                        .iter()
                        .zip(&net.params()[p_out..])
                        .map(|(a, b)| (b - a).powi(2))
                        .sum();
                    extra += 0.5 * v_err;
                }
                Some(v_obs + extra)
            }
            _ => None,
        };

        let sliding_residual = DMatrix::from_row_slice(n, m, &s.e);
        let errors = ErrorState {
            e: sliding_residual,
            r: DVector::from_column_slice(&s.r),
            eta: DVector::from_column_slice(&s.eta),
        };

        TraceRecord {
            t,
            x: y[..n * m].to_vec(),
            x0: y[n * m..n * m + m].to_vec(),
            e_norms,
            r: s.r.clone(),
            r_norm: s.r_norm,
            barrier_value,
            u: s.u.clone(),
            w_norms,
            v_norms,
            active_layer: sc.adaptation.active_layer(t, self.layers),
            v_obs,
            v_full,
            sliding_residual: errors.identity_residual(&sc.design),
        }
    }
}

/// Integrates the scenario to `t_final`. A barrier breach or overflow
/// mid-run ends the run early with `abort` set; the partial trace is kept.
pub fn run(sc: &Scenario) -> Result<RunOutcome, SimError> {
    let model = Model::new(sc)?;
    let mut y = model.initial_state(sc);
    if y.len() != model.state_len() {
        return Err(SimError::Setup("initial state has the wrong length".into()));
    }
    let mut scratch = Scratch::new(&model);
    model.errors(&y, &mut scratch);
    let mu = sc.barrier.mu();
    if !(scratch.r_norm < mu) {
        return Err(SimError::InitialBarrierViolation { r_norm: scratch.r_norm, mu });
    }

    let settings = sc.integrator;
    let n_steps = settings.n_steps();
    let decimation = settings.decimation.max(1);
    let mut ws = integrator::Workspace::new(y.len());
    let mut probe = vec![0.0; y.len()];
    let mut trace = Vec::with_capacity(n_steps / decimation + 1);
    let mut abort = None;

    for step in 0..=n_steps {
        let t = step as f64 * settings.dt;
        if step % decimation == 0 {
            // Evaluate once at the sample so u, r and ρ̂ match the state.
            match model.rhs(t, &y, &mut probe, &mut scratch) {
                Ok(()) => trace.push(model.record(t, &y, &scratch)),
                Err(err) => {
                    abort = Some(abort_info(t, &err));
                    break;
                }
            }
        }
        if step == n_steps {
            break;
        }
        let mut rhs = |tt: f64, yy: &[f64], dy: &mut [f64]| model.rhs(tt, yy, dy, &mut scratch);
        if let Err(err) = integrator::step(settings.method, &mut rhs, t, &mut y, settings.dt, &mut ws) {
            abort = Some(abort_info(t, &err));
            break;
        }
        if y.iter().any(|v| !v.is_finite()) {
            let err = SimError::NumericOverflow { t: t + settings.dt };
            abort = Some(abort_info(t + settings.dt, &err));
            break;
        }
    }

    let report = monitor(&trace, &sc.monitor_context());
    Ok(RunOutcome {
        trace,
        report,
        abort,
        amplitudes: sc.amplitudes(),
    })
}

fn abort_info(t: f64, err: &SimError) -> AbortInfo {
    AbortInfo {
        t,
        reason: err.to_string(),
        barrier_breach: matches!(err, SimError::BarrierBreach { .. }),
    }
}
