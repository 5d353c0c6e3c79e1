//! Follower and leader dynamics.
//!
//! Every agent is a chain of `M` integrators whose top derivative is driven
//! by a single nonlinearity (plus control and disturbance for followers):
//! `ẋ^m = x^{m+1}` for `m < M`, `ẋ^M = f(x, t) + u + ω(t)`.

pub mod expr;

use serde::{Deserialize, Serialize};

use crate::dnn::AgentNetwork;
pub use expr::{parse_dynamics, DynamicsExpr, EvalError, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    CosT,
    SinT,
    ExpNegT,
    SinCosT,
    #[default]
    None,
}

impl DisturbanceKind {
    /// `ω(t)` for amplitude `g`; every basis is bounded by one in magnitude.
    pub fn value(self, t: f64, g: f64) -> f64 {
        match self {
            DisturbanceKind::CosT => g * t.cos(),
            DisturbanceKind::SinT => g * t.sin(),
            DisturbanceKind::ExpNegT => g * (-t).exp(),
            DisturbanceKind::SinCosT => g * t.sin() * t.cos(),
            DisturbanceKind::None => 0.0,
        }
    }
}

/// Disturbance applied to one follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub amplitude: f64,
}

impl DisturbanceModel {
    pub fn value(&self, t: f64) -> f64 {
        self.kind.value(t, self.amplitude)
    }
}

/// The unknown nonlinearity `f_i` of one follower.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Expr(DynamicsExpr),
    /// Exact output of a fixed network (synthetic ground truth).
    Network(Box<AgentNetwork>),
}

impl Nonlinearity {
    pub fn eval(&self, x: &[f64], leader: &[f64], t: f64) -> Result<f64, EvalError> {
        match self {
            Nonlinearity::Expr(e) => e.eval(x, leader, t),
            Nonlinearity::Network(net) => Ok(net.forward(x).0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerModel {
    pub f: Nonlinearity,
    pub x_init: Vec<f64>,
    pub disturbance: DisturbanceModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    pub f0: DynamicsExpr,
    pub x_init: Vec<f64>,
}

impl LeaderModel {
    /// Leader expressions read their own state through `x_m` or `x0_m`.
    pub fn top_derivative(&self, x0: &[f64], t: f64) -> Result<f64, EvalError> {
        self.f0.eval(x0, x0, t)
    }
}

/// Writes the chain-of-integrators derivative of `x` into `out`, with `top`
/// as the highest derivative.
pub fn chain_derivative(x: &[f64], top: f64, out: &mut [f64]) {
    let m = x.len();
    out[..m - 1].copy_from_slice(&x[1..]);
    out[m - 1] = top;
}
