//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys: `seed` (required), `mode`,
//! and the tables `topology`, `sliding`, `barrier`, `dnn`, `controller`,
//! `leader`, `agents` (array of tables), `disturbance`, `integrator`,
//! `monitor` and `synthetic`. See `scenarios/reference_sec5.cfg` for a full
//! example.
//!
//! Gain matrices are either explicit row lists or a shorthand string:
//! `"c * ones"`, `"c * ones(a,b)"`, `"c * eye"` or `"c * eye(n)"`. Without
//! explicit dimensions the shape is taken from the slot being filled.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierForm, BarrierFunction};
use crate::controller::ControllerGains;
use crate::dnn::{
    Activation, AdaptationConfig, AgentNetwork, BarrierArgument, DeepNetworkArch, InnerLaw, SwitchSchedule,
};
use crate::graph::{build_matrices, DirectedTopology};
use crate::plant::{parse_dynamics, DisturbanceKind, DisturbanceModel, FollowerModel, LeaderModel, Nonlinearity};
use crate::sim::{seeded_rng, streams, synthetic_truth_setup, IntegratorSettings, Method, Mode, Scenario};
use crate::sliding::SlidingDesign;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A violated invariant, tagged with the module that owns it.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario [{module}]: {message}")]
pub struct ValidationError {
    pub module: &'static str,
    pub message: String,
}

fn invalid(module: &'static str, message: impl ToString) -> ValidationError {
    ValidationError {
        module,
        message: message.to_string(),
    }
}

/// A gain matrix as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Shorthand(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerGains {
    Shared(GainSpec),
    PerLayer(Vec<GainSpec>),
}

impl GainSpec {
    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<f64>, String> {
        let m = match self {
            GainSpec::Matrix(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(format!("explicit gain must be {rows}x{cols}"));
                }
                DMatrix::from_fn(rows, cols, |i, j| r[i][j])
            }
            GainSpec::Shorthand(s) => parse_shorthand(s, rows, cols)?,
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err("gain entries must be finite".into());
        }
        Ok(m)
    }
}

/// Parses `c * ones`, `c * ones(a,b)`, `c * eye`, `c * eye(n)`.
pub fn parse_shorthand(text: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, String> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (scale, kind) = match compact.split_once('*') {
        Some((c, k)) => (
            c.parse::<f64>().map_err(|_| format!("'{c}' is not a number in gain '{text}'"))?,
            k,
        ),
        None => (1.0, compact.as_str()),
    };
    let (name, dims) = match kind.split_once('(') {
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parenthesis in gain '{text}'"))?;
            let dims = inner
                .split(',')
                .map(|d| d.parse::<usize>().map_err(|_| format!("bad dimension '{d}' in gain '{text}'")))
                .collect::<Result<Vec<_>, _>>()?;
            (name, Some(dims))
        }
        None => (kind, None),
    };
    let (r, c) = match (name, dims.as_deref()) {
        ("ones", None) | ("eye", None) => (rows, cols),
        ("ones", Some([a, b])) => (*a, *b),
        ("eye", Some([n])) => (*n, *n),
        _ => return Err(format!("unknown gain shorthand '{text}'")),
    };
    if (r, c) != (rows, cols) {
        return Err(format!("gain '{text}' is {r}x{c}, expected {rows}x{cols}"));
    }
    Ok(match name {
        "ones" => DMatrix::from_element(r, c, scale),
        _ => {
            if r != c {
                return Err(format!("'eye' needs a square slot, got {rows}x{cols}"));
            }
            DMatrix::identity(r, c) * scale
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub adjacency: Vec<Vec<f64>>,
    pub pinning: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub mu: f64,
    #[serde(default)]
    pub form: BarrierForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnConfig {
    /// Widths after each weight matrix; the last one is `p`.
    pub widths: Vec<usize>,
    #[serde(default)]
    pub inner_activation: Activation,
    #[serde(default)]
    pub output_activation: Activation,
    pub k_w: GainSpec,
    pub k_v: LayerGains,
    /// `[V̲, V̄]` applied to every layer.
    pub band: [f64; 2],
    /// Assumption bound `V_m`; band uppers may not exceed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default = "two")]
    pub switch_period: f64,
    #[serde(default)]
    pub schedule: SwitchSchedule,
    #[serde(default)]
    pub barrier_arg: BarrierArgument,
    #[serde(default = "one")]
    pub inner_scale: f64,
    pub init_range: [f64; 2],
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(default)]
    pub boundary_layer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderConfig {
    pub f0: String,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Ignored in synthetic-truth mode, where the ideal network is the plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub disturbance: DisturbanceKind,
    /// Overrides the seeded draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub range: [f64; 2],
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self { range: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one_usize")]
    pub decimation: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Defaults to `10 · dt · γ₂`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chatter_band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub ideal_range: f64,
    #[serde(default)]
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    pub topology: TopologyConfig,
    pub sliding: SlidingConfig,
    pub barrier: BarrierConfig,
    pub dnn: DnnConfig,
    pub controller: ControllerConfig,
    pub leader: LeaderConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ScenarioConfig {
    /// Parses without validating cross-references.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ParseError {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    /// Parses and validates every invariant checkable before a run.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.to_scenario().map(|_| ())
    }

    pub fn n_followers(&self) -> usize {
        self.topology.pinning.len()
    }

    pub fn order(&self) -> usize {
        self.leader.x0.len()
    }

    pub fn topology(&self) -> Result<DirectedTopology, ValidationError> {
        DirectedTopology::from_rows(&self.topology.adjacency, &self.topology.pinning).map_err(|e| invalid("graph", e))
    }

    pub fn sliding_design(&self) -> Result<SlidingDesign, ValidationError> {
        let s = &self.sliding;
        let design = match (&s.lambda, &s.roots) {
            (Some(l), None) => SlidingDesign::new(l.clone(), s.alpha),
            (None, Some(r)) => SlidingDesign::from_roots(r, s.alpha),
            _ => return Err(invalid("sliding", "exactly one of 'lambda' or 'roots' must be given")),
        }
        .map_err(|e| invalid("sliding", e))?;
        if design.order() != self.order() {
            return Err(invalid(
                "sliding",
                format!(
                    "lambda implies order {} but the leader state has {} entries",
                    design.order(),
                    self.order()
                ),
            ));
        }
        Ok(design)
    }

    pub fn architecture(&self) -> Result<DeepNetworkArch, ValidationError> {
        let d = &self.dnn;
        DeepNetworkArch::from_stacked_widths(self.order(), &d.widths, d.inner_activation, d.output_activation)
            .map_err(|e| invalid("dnn", e))
    }

    pub fn adaptation(&self, arch: &DeepNetworkArch) -> Result<AdaptationConfig, ValidationError> {
        let d = &self.dnn;
        let p = arch.output_width;
        let k_w = d.k_w.to_matrix(p, p).map_err(|e| invalid("dnn", format!("k_w: {e}")))?;
        let shapes = arch.layer_shapes();
        let specs: Vec<&GainSpec> = match &d.k_v {
            LayerGains::Shared(g) => vec![g; shapes.len()],
            LayerGains::PerLayer(list) => {
                if list.len() != shapes.len() {
                    return Err(invalid(
                        "dnn",
                        format!("k_v lists {} layers, the network has {}", list.len(), shapes.len()),
                    ));
                }
                list.iter().collect()
            }
        };
        let k_v = specs
            .iter()
            .zip(&shapes)
            .enumerate()
            .map(|(j, (g, &(r, c)))| g.to_matrix(r, c).map_err(|e| invalid("dnn", format!("k_v[{j}]: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if !(d.inner_scale > 0.0) || !d.inner_scale.is_finite() {
            return Err(invalid("dnn", "inner_scale must be positive"));
        }
        let cfg = AdaptationConfig {
            k_w,
            k_v,
            v_lower: vec![d.band[0]; shapes.len()],
            v_upper: vec![d.band[1]; shapes.len()],
            switch_period: d.switch_period,
            schedule: d.schedule,
            barrier_arg: d.barrier_arg,
            inner_law: InnerLaw::Gaussian { scale: d.inner_scale },
        };
        cfg.validate(arch, d.v_max).map_err(|e| invalid("dnn", e))?;
        Ok(cfg)
    }

    pub fn gains(&self) -> Result<ControllerGains, ValidationError> {
        let c = &self.controller;
        ControllerGains::new(c.gamma1, c.gamma2, c.boundary_layer).map_err(|e| invalid("controller", e))
    }

    pub fn integrator_settings(&self) -> Result<IntegratorSettings, ValidationError> {
        let i = &self.integrator;
        if !(i.dt > 0.0) || !i.dt.is_finite() {
            return Err(invalid("sim", format!("dt must be positive (got {})", i.dt)));
        }
        if !(i.t_final > 0.0) || !i.t_final.is_finite() {
            return Err(invalid("sim", format!("t_final must be positive (got {})", i.t_final)));
        }
        if i.decimation == 0 {
            return Err(invalid("sim", "decimation must be at least 1"));
        }
        Ok(IntegratorSettings {
            method: i.method,
            dt: i.dt,
            t_final: i.t_final,
            decimation: i.decimation,
        })
    }

    /// Resolves every random draw and builds the runnable scenario.
    pub fn to_scenario(&self) -> Result<Scenario, ValidationError> {
        let n = self.n_followers();
        let m = self.order();
        if m < 2 {
            return Err(invalid("plant", "agent order M must be at least 2"));
        }
        let topology = self.topology()?;
        let graph = build_matrices(&topology).map_err(|e| invalid("graph", e))?;
        let design = self.sliding_design()?;
        let barrier = BarrierFunction::new(self.barrier.mu, self.barrier.form).map_err(|e| invalid("barrier", e))?;
        let arch = self.architecture()?;
        let adaptation = self.adaptation(&arch)?;
        let gains = self.gains()?;
        let integrator = self.integrator_settings()?;

        if self.agents.len() != n {
            return Err(invalid(
                "plant",
                format!("{} agents declared but the topology has {n} followers", self.agents.len()),
            ));
        }
        let leader = LeaderModel {
            f0: parse_dynamics(&self.leader.f0, m).map_err(|e| invalid("plant", format!("leader f0: {e}")))?,
            x_init: self.leader.x0.clone(),
        };
        if leader.x_init.iter().any(|v| !v.is_finite()) {
            return Err(invalid("plant", "leader initial state must be finite"));
        }

        let [g_lo, g_hi] = self.disturbance.range;
        if !(g_lo <= g_hi) || !g_lo.is_finite() || !g_hi.is_finite() {
            return Err(invalid("plant", "disturbance range must satisfy lo <= hi"));
        }
        let mut g_rng = seeded_rng(self.seed, streams::DISTURBANCE);
        let drawn: Vec<f64> = (0..n)
            .map(|_| if g_lo < g_hi { g_rng.random_range(g_lo..g_hi) } else { g_lo })
            .collect();

        let synthetic = match self.mode {
            Mode::Standard => None,
            Mode::SyntheticTruth => {
                let s = self
                    .synthetic
                    .as_ref()
                    .ok_or_else(|| invalid("sim", "synthetic_truth mode needs a [synthetic] table"))?;
                if !(s.ideal_range > 0.0) || !(s.perturbation >= 0.0) {
                    return Err(invalid("sim", "synthetic ideal_range must be positive and perturbation nonnegative"));
                }
                if !adaptation.is_k_w_positive_definite() {
                    return Err(invalid("dnn", "synthetic_truth mode needs a positive definite k_w"));
                }
                Some(synthetic_truth_setup(&arch, n, self.seed, s.ideal_range, s.perturbation))
            }
        };

        let mut followers = Vec::with_capacity(n);
        for (i, a) in self.agents.iter().enumerate() {
            if a.x0.len() != m || a.x0.iter().any(|v| !v.is_finite()) {
                return Err(invalid(
                    "plant",
                    format!("agent {} initial state must have {m} finite entries", i + 1),
                ));
            }
            let f = match &synthetic {
                Some(s) => Nonlinearity::Network(Box::new(s.ideal[i].clone())),
                None => {
                    let src = a
                        .f
                        .as_deref()
                        .ok_or_else(|| invalid("plant", format!("agent {} has no dynamics expression 'f'", i + 1)))?;
                    Nonlinearity::Expr(
                        parse_dynamics(src, m).map_err(|e| invalid("plant", format!("agent {} f: {e}", i + 1)))?,
                    )
                }
            };
            followers.push(FollowerModel {
                f,
                x_init: a.x0.clone(),
                disturbance: DisturbanceModel {
                    kind: a.disturbance,
                    amplitude: a.amplitude.unwrap_or(drawn[i]),
                },
            });
        }

        let (initial_networks, ideal_networks) = match synthetic {
            Some(s) => (s.estimates, Some(s.ideal)),
            None => {
                let [lo, hi] = self.dnn.init_range;
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(invalid("dnn", "init_range must satisfy lo <= hi"));
                }
                let mut rng = seeded_rng(self.seed, streams::ESTIMATES);
                let nets = (0..n).map(|_| AgentNetwork::random_uniform(&arch, lo, hi, &mut rng)).collect();
                (nets, None)
            }
        };
        for (i, net) in initial_networks.iter().enumerate() {
            for j in 0..arch.n_weight_layers() {
                let norm = net.view().v_norm(j);
                if !(adaptation.v_lower[j] <= norm && norm <= adaptation.v_upper[j]) {
                    return Err(invalid(
                        "dnn",
                        format!(
                            "initial ‖V_{}{}‖_F = {norm:.4} lies outside the band [{}, {}]",
                            i + 1,
                            j,
                            adaptation.v_lower[j],
                            adaptation.v_upper[j]
                        ),
                    ));
                }
            }
        }

        let chatter_band = self
            .monitor
            .chatter_band
            .unwrap_or(10.0 * integrator.dt * gains.gamma2);
        if !(chatter_band >= 0.0) {
            return Err(invalid("sim", "chatter_band must be nonnegative"));
        }

        Ok(Scenario {
            topology,
            graph,
            design,
            barrier,
            arch,
            adaptation,
            gains,
            followers,
            leader,
            initial_networks,
            ideal_networks,
            integrator,
            seed: self.seed,
            chatter_band,
        })
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
seed = 3

[topology]
adjacency = [[0.0, 0.0], [1.0, 0.0]]
pinning = [1.0, 0.0]

[sliding]
lambda = [1.0]

[barrier]
mu = 50.0

[dnn]
widths = [3, 2]
k_w = "1 * eye"
k_v = "0.5 * ones"
band = [0.0, 100.0]
init_range = [-1.0, 1.0]

[controller]
gamma1 = 10.0
gamma2 = 0.5

[leader]
f0 = "0"
x0 = [0.0, 1.0]

[[agents]]
f = "x1"
x0 = [0.5, 0.0]
disturbance = "cos_t"

[[agents]]
f = "sin(x2)"
x0 = [-0.5, 0.0]

[disturbance]
range = [-1.0, 1.0]

[integrator]
dt = 0.01
t_final = 1.0
"#;

    #[test]
    fn small_config_loads() {
        let cfg = ScenarioConfig::from_toml(SMALL).unwrap();
        assert_eq!(cfg.n_followers(), 2);
        assert_eq!(cfg.order(), 2);
        let sc = cfg.to_scenario().unwrap();
        assert_eq!(sc.arch.layer_shapes(), vec![(2, 3), (3, 2)]);
        assert_eq!(sc.adaptation.k_v[1], DMatrix::from_element(3, 2, 0.5));
        assert!((sc.chatter_band - 10.0 * 0.01 * 0.5).abs() < 1e-15);
        let g = sc.amplitudes();
        assert!(g.iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ScenarioConfig::from_toml(SMALL).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn shorthand_forms() {
        assert_eq!(parse_shorthand("10 * ones", 2, 3).unwrap(), DMatrix::from_element(2, 3, 10.0));
        assert_eq!(parse_shorthand("10*ones(2,3)", 2, 3).unwrap(), DMatrix::from_element(2, 3, 10.0));
        assert_eq!(parse_shorthand("2 * eye(2)", 2, 2).unwrap(), DMatrix::identity(2, 2) * 2.0);
        assert!(parse_shorthand("10 * ones(3,3)", 2, 3).is_err());
        assert!(parse_shorthand("10 * twos", 2, 3).is_err());
        assert!(parse_shorthand("eye", 2, 3).is_err());
    }

    fn replaced(from: &str, to: &str) -> String {
        assert!(SMALL.contains(from), "{from}");
        SMALL.replacen(from, to, 1)
    }

    #[test]
    fn validation_names_the_invariant() {
        let cases = [
            (replaced("lambda = [1.0]", "lambda = [-1.0]"), "sliding", "Hurwitz"),
            (replaced("pinning = [1.0, 0.0]", "pinning = [0.0, 0.0]"), "graph", "pinned"),
            (replaced("band = [0.0, 100.0]", "band = [5.0, 1.0]"), "dnn", "band"),
            (replaced("gamma2 = 0.5", "gamma2 = 0.0"), "controller", "positive"),
            (replaced("f = \"x1\"", "f = \"x3\""), "plant", "unknown variable"),
            (replaced("dt = 0.01", "dt = -0.01"), "sim", "dt"),
        ];
        for (text, module, needle) in cases {
            match ScenarioConfig::from_toml(&text) {
                Err(ConfigError::Validation(v)) => {
                    assert_eq!(v.module, module, "{v}");
                    assert!(v.to_string().contains(needle), "{v}");
                }
                other => panic!("expected validation error for {module}, got {other:?}"),
            }
        }
    }

    #[test]
    fn parse_error_has_position() {
        let text = "seed = 1\n[topology]\nadjacency = [[0.0]\n";
        match ScenarioConfig::parse(text) {
            Err(e) => {
                assert_eq!(e.line, 3);
                assert!(e.column >= 1);
            }
            Ok(_) => panic!("expected a parse error"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let text = SMALL.replacen("seed = 3", "", 1);
        let err = ScenarioConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("seed"), "{err}");
    }

    #[test]
    fn unreachable_follower_rejected() {
        let text = replaced("adjacency = [[0.0, 0.0], [1.0, 0.0]]", "adjacency = [[0.0, 0.0], [0.0, 0.0]]");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("[2]"), "{err}");
    }
}
