//! Acceptance gate. Prints one line per criterion and exits nonzero only when
//! a criterion outside `KNOWN_RED` fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simlab_core::barrier::{BarrierError, BarrierForm, BarrierFunction};
use simlab_core::config::{load_config, ScenarioConfig};
use simlab_core::controller::{gain_certificate, ControllerGains, PartialBounds};
use simlab_core::dnn::BoundEstimates;
use simlab_core::graph::{build_matrices, check_reachability, DirectedTopology, GraphError};
use simlab_core::linalg;
use simlab_core::plant::{parse_dynamics, DisturbanceKind};
use simlab_core::sim::integrator::{step, Workspace};
use simlab_core::sim::trace::write_csv;
use simlab_core::sim::{run, Method, RunOutcome};
use simlab_core::sliding::{lambdas_from_roots, SlidingDesign};

/// Criteria expected to fail; see the README section on the graph weighting.
const KNOWN_RED: &[u32] = &[1];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> ScenarioConfig {
    load_config(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_cfg(cfg: &ScenarioConfig) -> (RunOutcome, Duration) {
    let sc = cfg.to_scenario().expect("scenario");
    let t0 = Instant::now();
    let out = run(&sc).expect("run");
    (out, t0.elapsed())
}

fn csv_bytes(cfg: &ScenarioConfig, out: &RunOutcome) -> Vec<u8> {
    let shape = cfg.to_scenario().expect("scenario").trace_shape();
    let mut buf = Vec::new();
    write_csv(&mut buf, &shape, &out.trace).expect("csv");
    buf
}

/// Random digraph with N ≤ 10 whose followers are all reachable from a
/// pinned node. Only reachability is filtered.
fn random_reachable_topology(rng: &mut ChaCha8Rng) -> DirectedTopology {
    loop {
        let n = rng.random_range(2..=10);
        let density = rng.random_range(0.15..0.6);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(density) {
                    a[(i, j)] = rng.random_range(0.1..3.0);
                }
            }
        }
        let mut b = DVector::zeros(n);
        for i in 0..n {
            if rng.random_bool(0.3) {
                b[i] = rng.random_range(0.1..3.0);
            }
        }
        if b.iter().all(|&v| v == 0.0) {
            b[rng.random_range(0..n)] = rng.random_range(0.1..3.0);
        }
        if check_reachability(&a, &b).all_reachable {
            return DirectedTopology::new(a, b).expect("topology");
        }
    }
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let total = 200;
    let mut failures = 0;
    let mut worst_q = f64::INFINITY;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..total {
        let topo = random_reachable_topology(&mut rng);
        match build_matrices(&topo) {
            Ok(gm) => {
                let ok_sym = linalg::asymmetry(&gm.p_matrix) == 0.0 && linalg::asymmetry(&gm.q_matrix) == 0.0;
                let min_p = linalg::min_symmetric_eigenvalue(&gm.p_matrix);
                let min_q = linalg::min_symmetric_eigenvalue(&gm.q_matrix);
                worst_q = worst_q.min(min_q);
                worst_residual = worst_residual.max(gm.q_residual);
                if !(ok_sym && min_p > 1e-10 && min_q > 1e-10 && gm.q_residual < 1e-12) {
                    failures += 1;
                }
            }
            Err(GraphError::NotPositiveDefinite { min_eig, .. }) => {
                worst_q = worst_q.min(min_eig);
                failures += 1;
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        failures == 0 && elapsed < Duration::from_secs(5),
        format!(
            "{failures}/{total} topologies without a PD Q, worst min eig {worst_q:.3e}, \
             max q residual {worst_residual:.1e}, {elapsed:.2?}"
        ),
    )
}

fn criterion_2() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let total = 100;
    let mut failures = 0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_min_eig = f64::INFINITY;
    for _ in 0..total {
        let order = rng.random_range(2..=6);
        let roots: Vec<f64> = (0..order - 1).map(|_| rng.random_range(0.2..3.0)).collect();
        let alpha = rng.random_range(0.1..5.0);
        let lambda = lambdas_from_roots(&roots).expect("roots");
        match SlidingDesign::new(lambda, alpha) {
            Ok(design) => {
                let residual = design.lyapunov_residual();
                let min_eig = linalg::min_symmetric_eigenvalue(design.p1());
                worst_residual = worst_residual.max(residual);
                worst_min_eig = worst_min_eig.min(min_eig);
                if !(residual < 1e-10 && min_eig > 0.0) {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        failures == 0 && elapsed < Duration::from_secs(5),
        format!(
            "{failures}/{total} failures, max residual {worst_residual:.1e}, \
             min eig(P1) {worst_min_eig:.3e}, {elapsed:.2?}"
        ),
    )
}

fn criterion_3(out: &RunOutcome, elapsed: Duration, mu: f64, v_upper: f64) -> Verdict {
    let rep = &out.report;
    let completed = out.abort.is_none();
    let contracted = rep.tail_position_error < 0.05 * rep.initial_position_error;
    let max_v = rep.max_v_norm_ratio * v_upper;
    let band_ok = rep.band_violations == 0 && max_v <= v_upper * (1.0 + 1e-3);
    Verdict::new(
        completed && rep.max_r_norm < mu && contracted && band_ok && elapsed < Duration::from_secs(120),
        format!(
            "completed {completed}, max r {:.3} < {mu}, tail error {:.4} vs initial {:.3}, \
             max V norm {max_v:.2} <= {v_upper}, {elapsed:.2?}",
            rep.max_r_norm, rep.tail_position_error, rep.initial_position_error
        ),
    )
}

fn criterion_4() -> Verdict {
    let cfg = load("synthetic_truth.cfg");
    let sc = cfg.to_scenario().expect("scenario");
    let text = std::fs::read_to_string(scenario_path("synthetic_truth_bounds.toml")).expect("bounds");
    let bounds: BoundEstimates = toml::from_str::<PartialBounds>(&text).expect("bounds").complete().expect("bounds");
    let cert = gain_certificate(&sc.graph, &sc.design, &bounds, sc.arch.k(), sc.adaptation.psi(), &sc.gains);
    let out = run(&sc).expect("run");
    let rep = &out.report;

    // Negative control: a disturbance larger than γ₂ must show increases.
    let mut disturbed = cfg.clone();
    for agent in &mut disturbed.agents {
        agent.disturbance = DisturbanceKind::CosT;
        agent.amplitude = Some(10.0);
    }
    let (control, _) = run_cfg(&disturbed);

    let pass = cert.verdict
        && out.abort.is_none()
        && rep.lyapunov_kind == "full"
        && rep.lyapunov_checked_intervals > 0
        && rep.lyapunov_increases == 0
        && control.report.lyapunov_increases > 0;
    Verdict::new(
        pass,
        format!(
            "certificate {} (gamma1_min {:.3}, gamma2_min {:.3}), {} increases over {} checked intervals; \
             disturbed control shows {} increases",
            cert.verdict,
            cert.gamma1_min,
            cert.gamma2_min,
            rep.lyapunov_increases,
            rep.lyapunov_checked_intervals,
            control.report.lyapunov_increases
        ),
    )
}

fn criterion_5(out: &RunOutcome, mu: f64) -> Verdict {
    let rep = &out.report;
    let all_below = out.trace.iter().all(|rec| rec.e_norms.iter().all(|&e| e < mu));
    Verdict::new(
        rep.error_bound_precondition && all_below && rep.error_bound_violations == 0,
        format!(
            "lambda sum > 1: {}, max ||e^m||_P = {:.3?} over {} samples",
            rep.error_bound_precondition, rep.max_e_norms, rep.samples
        ),
    )
}

fn criterion_6() -> Verdict {
    // A = [[0,0],[1,0]], b = [1,0]: L + B = [[1,0],[-1,1]] has σ̄ = φ.
    // D + B = I, q = [1,2], P = diag(1, 1/2), λ̄ = [1], P₁ = [1/2].
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let hand_g1 = 1.0 / phi + (1.0f64 * 1.0 * 1.0 / 1.0 + 0.5 / 0.5).powi(2) / 2.0;
    let hand_g2 = (1.0 / phi) * (1.0 * 1.0 + 2.0 * 2.0 * 1.0 * 1.0) + 1.0 * 1.0 + 0.1 + 5.0 + 3.0;
    let topo = DirectedTopology::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]).expect("topology");
    let gm = build_matrices(&topo).expect("matrices");
    let design = SlidingDesign::new(vec![1.0], 1.0).expect("design");
    let bounds = BoundEstimates {
        w_m: 1.0,
        v_m: 1.0,
        rho_m: 1.0,
        rho_hat_m: 1.0,
        eps_m: 0.1,
        omega_m: 5.0,
        f_m: 3.0,
    };
    let gains = ControllerGains::new(3.0, 13.0, 0.0).expect("gains");
    let cert = gain_certificate(&gm, &design, &bounds, 1, 1.0, &gains);
    let d1 = (cert.gamma1_min - hand_g1).abs();
    let d2 = (cert.gamma2_min - hand_g2).abs();
    Verdict::new(
        d1 < 1e-6 && d2 < 1e-6 && (cert.gamma1_min - 2.618).abs() < 1e-3 && (cert.gamma2_min - 12.19).abs() < 1e-2,
        format!("gamma1_min {:.6} (hand {hand_g1:.6}), gamma2_min {:.6} (hand {hand_g2:.6})", cert.gamma1_min, cert.gamma2_min),
    )
}

type Builtin = fn(&[f64], f64) -> f64;

fn criterion_7() -> Verdict {
    let cases: [(&str, Builtin); 5] = [
        ("x2*sin(x1) + cos(x3)^2", |x, _| x[1] * x[0].sin() + x[2].cos().powi(2)),
        ("x1 + cos(x2) + x3^2", |x, _| x[0] + x[1].cos() + x[2] * x[2]),
        ("x2 + sin(x3)", |x, _| x[1] + x[2].sin()),
        ("sin(x1) + x2^2 + x3^2", |x, _| x[0].sin() + x[1] * x[1] + x[2] * x[2]),
        ("-sin(x2^2) - cos(x3) - exp(-t)", |x, t| -(x[1] * x[1]).sin() - x[2].cos() - (-t).exp()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for (src, builtin) in cases {
        let parsed = parse_dynamics(src, 3).expect("parse");
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let leader: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let t = rng.random_range(0.0..20.0);
            let got = parsed.eval(&x, &leader, t).expect("eval");
            worst = worst.max((got - builtin(&x, t)).abs());
        }
    }
    Verdict::new(worst < 1e-12, format!("5 formulas x 1000 points, max abs diff {worst:.1e}"))
}

fn criterion_8(cfg: &ScenarioConfig, first: &RunOutcome) -> Verdict {
    let (second, _) = run_cfg(cfg);
    let a = csv_bytes(cfg, first);
    let b = csv_bytes(cfg, &second);
    Verdict::new(a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b))
}

fn chain_position(method: Method, x0: [f64; 3], dt: f64) -> f64 {
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ()> {
        dy[0] = y[1];
        dy[1] = y[2];
        dy[2] = 0.0;
        Ok(())
    };
    let mut y = x0.to_vec();
    let mut ws = Workspace::new(3);
    let steps = (1.0 / dt).round() as usize;
    for k in 0..steps {
        step(method, &mut rhs, k as f64 * dt, &mut y, dt, &mut ws).expect("step");
    }
    y[0]
}

fn criterion_9() -> Verdict {
    let exact = |x0: [f64; 3]| x0[0] + x0[1] + 0.5 * x0[2];
    let mut rk4_err: f64 = 0.0;
    for x0 in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.5, -2.0, 3.0]] {
        for dt in [1e-1, 1e-2, 1e-3] {
            rk4_err = rk4_err.max((chain_position(Method::Rk4, x0, dt) - exact(x0)).abs());
        }
    }
    let x0 = [0.0, 0.0, 1.0];
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| (chain_position(Method::Euler, x0, dt) - exact(x0)).abs())
        .collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let halves = ratios.iter().all(|r| (r - 2.0).abs() <= 0.2);
    Verdict::new(
        rk4_err < 1e-12 && halves,
        format!("rk4 max error {rk4_err:.1e}, euler error ratios {:.4} {:.4}", ratios[0], ratios[1]),
    )
}

fn criterion_10() -> Verdict {
    let mut worst_fd: f64 = 0.0;
    let mut monotone = true;
    let mut domain = true;
    for form in [BarrierForm::Rational, BarrierForm::Logarithmic] {
        for mu in [0.5, 3.0, 300.0] {
            let bf = BarrierFunction::new(mu, form).expect("barrier");
            let mut prev = bf.potential(0.0).expect("zero");
            monotone &= prev == 0.0;
            for k in 1..200 {
                let z = mu * k as f64 / 200.0;
                let v = bf.potential(z).expect("inside");
                monotone &= v > prev;
                prev = v;
                // d/dz Υ = 2z Υ_d, checked by central differences.
                let h = 1e-6 * mu;
                let fd = (bf.potential(z + h).expect("inside") - bf.potential(z - h).expect("inside")) / (2.0 * h);
                let analytic = 2.0 * z * bf.potential_derivative(z).expect("inside");
                worst_fd = worst_fd.max((fd - analytic).abs() / analytic.abs().max(1.0));
            }
            for z in [mu, mu * (1.0 + 1e-12), 2.0 * mu, f64::INFINITY] {
                domain &= matches!(bf.potential(z), Err(BarrierError::DomainExceeded { .. }));
                domain &= matches!(bf.potential_derivative(z), Err(BarrierError::DomainExceeded { .. }));
            }
        }
    }
    Verdict::new(
        worst_fd < 1e-5 && monotone && domain,
        format!("max relative fd error {worst_fd:.1e}, monotone {monotone}, DomainExceeded at z >= mu {domain}"),
    )
}

fn main() -> ExitCode {
    let reference = load("reference_sec5.cfg");
    let mu = reference.barrier.mu;
    let v_upper = reference.dnn.band[1];
    let (ref_out, ref_elapsed) = run_cfg(&reference);

    let results: Vec<(u32, &str, Verdict)> = vec![
        (1, "graph weighting certificate", criterion_1()),
        (2, "Lyapunov equation suite", criterion_2()),
        (3, "reference run", criterion_3(&ref_out, ref_elapsed, mu, v_upper)),
        (4, "synthetic-truth decrease", criterion_4()),
        (5, "error bound from sliding bound", criterion_5(&ref_out, mu)),
        (6, "gain certificate golden values", criterion_6()),
        (7, "parser oracle", criterion_7()),
        (8, "determinism", criterion_8(&reference, &ref_out)),
        (9, "integrator order", criterion_9()),
        (10, "barrier properties", criterion_10()),
    ];

    let mut unexpected = 0;
    for (id, name, v) in &results {
        let known_red = KNOWN_RED.contains(id);
        let tag = match (v.pass, known_red) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known red)",
            (false, false) => "FAIL",
        };
        if !v.pass && !known_red {
            unexpected += 1;
        }
        println!("criterion {id:>2} {tag}: {name}: {}", v.detail);
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
