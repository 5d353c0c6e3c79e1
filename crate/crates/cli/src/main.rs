use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use simlab_core::config::{load_config, ConfigError, ScenarioConfig};
use simlab_core::controller::{gain_certificate, PartialBounds};
use simlab_core::dnn::check_v_bound;
use simlab_core::graph::{build_matrices, check_reachability};
use simlab_core::linalg;
use simlab_core::output::{self, emit_outputs, Formats, RunSummary, CORRECTIVE_NOTE};
use simlab_core::sim::{run, SimError};
use thiserror::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BARRIER: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "simlab", version, about = "Leader-follower consensus simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write trace.csv, summary.json and plots.
    Run {
        config: PathBuf,
        /// Output directory [default: $SIMLAB_OUTPUT_ROOT/<config stem>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma list of csv, json, svg.
        #[arg(long, default_value = "csv,json,svg")]
        format: String,
    },
    /// Evaluate the sufficient gain conditions for a scenario.
    CheckGains {
        config: PathBuf,
        /// TOML file with w_m, v_m, rho_m, rho_hat_m, eps_m, omega_m, f_m.
        #[arg(long)]
        bounds: PathBuf,
    },
    /// Print the derived graph matrices as JSON.
    GraphInfo { config: PathBuf },
    /// Run one scenario per value of a parameter axis, in parallel.
    Sweep {
        config: PathBuf,
        /// `name=v1,v2,...` with name one of gamma1, gamma2, mu, dt, t_final, seed.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv,json")]
        format: String,
    },
    /// Redraw the SVG panels from a trace CSV.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draws the barrier level on the ‖r‖_P panel.
        #[arg(long)]
        mu: Option<f64>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] output::OutputError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => EXIT_OTHER,
            CliError::Config(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Output(_) | CliError::Other(_) => EXIT_OTHER,
        }
    }
}

fn default_out(config: &Path) -> PathBuf {
    let root = std::env::var_os("SIMLAB_OUTPUT_ROOT").map_or_else(|| PathBuf::from("simlab-out"), PathBuf::from);
    let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    root.join(stem)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Runs one scenario and writes its outputs; returns the exit code.
fn run_one(cfg: &ScenarioConfig, out: &Path, formats: Formats) -> Result<u8, CliError> {
    let sc = cfg.to_scenario().map_err(ConfigError::from)?;
    let shape = sc.trace_shape();
    let mut summary = RunSummary {
        seed: sc.seed,
        mode: format!("{:?}", sc.mode()),
        n_followers: sc.n(),
        order: sc.order(),
        initial_r_norm: sc.initial_r_norm().map_err(|e| CliError::Other(e.to_string()))?,
        disturbance_amplitudes: sc.amplitudes(),
        completed: false,
        abort: None,
        report: None,
        corrective_signal: CORRECTIVE_NOTE,
        config: cfg.to_toml(),
    };
    let mu = sc.barrier.mu();
    match run(&sc) {
        Ok(outcome) => {
            summary.completed = outcome.abort.is_none();
            let breach = outcome.abort.as_ref().is_some_and(|a| a.barrier_breach);
            let aborted = outcome.abort.is_some();
            summary.abort = outcome.abort;
            summary.report = Some(outcome.report);
            emit_outputs(out, &shape, &outcome.trace, &summary, mu, formats)?;
            if let Some(a) = &summary.abort {
                eprintln!("run aborted at t = {}: {}", a.t, a.reason);
            }
            Ok(if breach {
                EXIT_BARRIER
            } else if aborted {
                EXIT_OTHER
            } else {
                0
            })
        }
        Err(err @ SimError::InitialBarrierViolation { .. }) => {
            eprintln!("{err}");
            summary.abort = Some(simlab_core::sim::AbortInfo {
                t: 0.0,
                reason: err.to_string(),
                barrier_breach: true,
            });
            emit_outputs(out, &shape, &[], &summary, mu, formats)?;
            Ok(EXIT_BARRIER)
        }
        Err(err) => Err(CliError::Other(err.to_string())),
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>, seed: Option<u64>, format: &str) -> Result<u8, CliError> {
    let formats = Formats::parse(format).map_err(CliError::Usage)?;
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out.unwrap_or_else(|| default_out(config));
    let code = run_one(&cfg, &out, formats)?;
    eprintln!("outputs written to {}", out.display());
    Ok(code)
}

fn cmd_check_gains(config: &Path, bounds: &Path) -> Result<u8, CliError> {
    let cfg = load_config(config)?;
    let text = std::fs::read_to_string(bounds)
        .map_err(|e| CliError::Other(format!("cannot read {}: {e}", bounds.display())))?;
    let partial: PartialBounds =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bounds file {}: {e}", bounds.display())))?;
    let bounds = partial.complete().map_err(|e| CliError::Usage(e.to_string()))?;
    bounds.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let sc = cfg.to_scenario().map_err(ConfigError::from)?;
    let p_max = sc.graph.p_diag.max();
    let mu = sc.barrier.mu();
    let grid: Vec<f64> = (0..=400).map(|k| -mu + 2.0 * mu * k as f64 / 400.0).collect();
    let v_bound = check_v_bound(&sc.adaptation, p_max, &grid);
    let cert = gain_certificate(&sc.graph, &sc.design, &bounds, sc.arch.k(), sc.adaptation.psi(), &sc.gains);
    let verdict = cert.verdict && v_bound.is_ok();
    print_json(&json!({
        "certificate": cert,
        "inner_law_bound": match &v_bound {
            Ok(r) => json!(r),
            Err(e) => json!({ "violated": e.to_string() }),
        },
        "sliding": {
            "lambda": sc.design.lambda(),
            "hurwitz": true,
            "p1": sc.design.p1().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "lyapunov_residual": sc.design.lyapunov_residual(),
            "lambda_sum_exceeds_one": sc.design.lambda_sum_exceeds_one(),
        },
        "verdict": verdict,
    }));
    Ok(if verdict { 0 } else { EXIT_CERTIFICATE })
}

fn cmd_graph_info(config: &Path) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(config).map_err(|source| ConfigError::Io {
        path: config.display().to_string(),
        source,
    })?;
    let cfg = ScenarioConfig::parse(&text).map_err(ConfigError::from)?;
    let topo = cfg.topology().map_err(ConfigError::from)?;
    let reach = check_reachability(topo.adjacency(), topo.pinning());
    let gm = build_matrices(&topo).map_err(|e| {
        ConfigError::from(simlab_core::config::ValidationError {
            module: "graph",
            message: e.to_string(),
        })
    })?;
    let eig_range = |m: &nalgebra::DMatrix<f64>| {
        let e = linalg::symmetric_eigenvalues(m);
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        [lo, hi]
    };
    print_json(&json!({
        "n_followers": gm.n(),
        "reachability": reach,
        "q": gm.q.iter().copied().collect::<Vec<_>>(),
        "q_residual": gm.q_residual,
        "p_diag": gm.p_diag.iter().copied().collect::<Vec<_>>(),
        "p_eigenvalue_range": eig_range(&gm.p_matrix),
        "q_matrix_eigenvalue_range": eig_range(&gm.q_matrix),
        "singular_values": gm.sv_summary,
    }));
    Ok(0)
}

fn parse_axis(spec: &str) -> Result<(String, Vec<String>), CliError> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("axis '{spec}' must look like name=v1,v2")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::Usage(format!("axis '{name}' has no values")));
    }
    Ok((name.trim().to_string(), values))
}

fn apply_axis(base: &ScenarioConfig, name: &str, value: &str) -> Result<ScenarioConfig, CliError> {
    let mut cfg = base.clone();
    let num = || value.parse::<f64>().map_err(|_| CliError::Usage(format!("'{value}' is not a number")));
    match name {
        "gamma1" => cfg.controller.gamma1 = num()?,
        "gamma2" => cfg.controller.gamma2 = num()?,
        "mu" => cfg.barrier.mu = num()?,
        "dt" => cfg.integrator.dt = num()?,
        "t_final" => cfg.integrator.t_final = num()?,
        "seed" => {
            cfg.seed = value
                .parse()
                .map_err(|_| CliError::Usage(format!("'{value}' is not a seed")))?
        }
        other => return Err(CliError::Usage(format!("unknown sweep axis '{other}'"))),
    }
    cfg.validate().map_err(ConfigError::from)?;
    Ok(cfg)
}

fn cmd_sweep(config: &Path, axis: &str, out: Option<PathBuf>, format: &str) -> Result<u8, CliError> {
    let formats = Formats::parse(format).map_err(CliError::Usage)?;
    let base = load_config(config)?;
    let (name, values) = parse_axis(axis)?;
    let configs = values
        .iter()
        .map(|v| apply_axis(&base, &name, v).map(|c| (v.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;
    let out = out.unwrap_or_else(|| default_out(config));
    let results: Vec<(String, Result<u8, CliError>)> = configs
        .par_iter()
        .map(|(v, cfg)| {
            let dir = out.join(format!("{name}={v}"));
            (v.clone(), run_one(cfg, &dir, formats))
        })
        .collect();
    let mut worst = 0u8;
    let mut index = Vec::new();
    for (v, res) in &results {
        let (code, error) = match res {
            Ok(c) => (*c, None),
            Err(e) => (e.exit_code(), Some(e.to_string())),
        };
        worst = worst.max(code);
        index.push(json!({ "value": v, "dir": format!("{name}={v}"), "exit_code": code, "error": error }));
    }
    std::fs::create_dir_all(&out).map_err(|e| CliError::Other(e.to_string()))?;
    let index = json!({ "axis": name, "runs": index });
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&index).expect("json"))
        .map_err(|e| CliError::Other(e.to_string()))?;
    print_json(&index);
    Ok(worst)
}

fn cmd_plot(trace: &Path, out: &Path, mu: Option<f64>) -> Result<u8, CliError> {
    let table = output::read_trace(trace)?;
    if table.is_empty() {
        return Err(CliError::Other(format!("{} has no samples to plot", trace.display())));
    }
    for path in output::plot_panels(&table, mu, out, trace)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, format } => cmd_run(&config, out, seed, &format),
        Command::CheckGains { config, bounds } => cmd_check_gains(&config, &bounds),
        Command::GraphInfo { config } => cmd_graph_info(&config),
        Command::Sweep { config, axis, out, format } => cmd_sweep(&config, &axis, out, &format),
        Command::Plot { trace, out, mu } => cmd_plot(&trace, &out, mu),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
