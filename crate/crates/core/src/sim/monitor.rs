//! Post-run checks computed purely from a trace.

use serde::Serialize;

use super::trace::TraceRecord;

/// Relative overshoot allowed above a layer's band before it counts as a
/// violation (one integration step may cross the gate).
pub const BAND_OVERSHOOT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorContext {
    pub mu: f64,
    pub order: usize,
    pub n_followers: usize,
    pub layers: usize,
    pub v_upper: Vec<f64>,
    pub chatter_band: f64,
    /// `Σ λ_i > 1`.
    pub lambda_sum_exceeds_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub samples: usize,
    pub max_r_norm: f64,
    /// `max_t ‖e^m‖_P` per order.
    pub max_e_norms: Vec<f64>,
    pub max_e_norm: f64,
    pub barrier_respected: bool,
    /// Samples where `‖e^m‖_P ≥ μ` although `‖r‖_P < μ` held up to then.
    pub error_bound_violations: usize,
    pub error_bound_precondition: bool,
    /// Which Lyapunov quantity the decrease check used.
    pub lyapunov_kind: &'static str,
    pub lyapunov_increases: usize,
    pub lyapunov_checked_intervals: usize,
    pub lyapunov_max_increase: f64,
    pub final_tracking_errors: Vec<f64>,
    pub initial_position_error: f64,
    /// `max_i |x_i¹ − x_0¹|` over the last 10% of samples.
    pub tail_position_error: f64,
    pub band_violations: usize,
    pub max_v_norm_ratio: f64,
    pub max_sliding_residual: f64,
}

fn any_in_chatter_band(rec: &TraceRecord, band: f64) -> bool {
    rec.r.iter().any(|r| r.abs() < band)
}

pub fn monitor(trace: &[TraceRecord], ctx: &MonitorContext) -> MonitorReport {
    let m = ctx.order;
    let n = ctx.n_followers;
    let use_full = trace.first().is_some_and(|r| r.v_full.is_some());
    let lyap = |r: &TraceRecord| if use_full { r.v_full.unwrap_or(f64::NAN) } else { r.v_obs };

    let mut report = MonitorReport {
        samples: trace.len(),
        max_r_norm: 0.0,
        max_e_norms: vec![0.0; m],
        max_e_norm: 0.0,
        barrier_respected: true,
        error_bound_violations: 0,
        error_bound_precondition: ctx.lambda_sum_exceeds_one,
        lyapunov_kind: if use_full { "full" } else { "observable" },
        lyapunov_increases: 0,
        lyapunov_checked_intervals: 0,
        lyapunov_max_increase: 0.0,
        final_tracking_errors: Vec::new(),
        initial_position_error: 0.0,
        tail_position_error: 0.0,
        band_violations: 0,
        max_v_norm_ratio: 0.0,
        max_sliding_residual: 0.0,
    };

    let mut r_bound_held = true;
    for (k, rec) in trace.iter().enumerate() {
        report.max_r_norm = report.max_r_norm.max(rec.r_norm);
        if !(rec.r_norm < ctx.mu) {
            report.barrier_respected = false;
            r_bound_held = false;
        }
        for (mm, &en) in rec.e_norms.iter().enumerate() {
            report.max_e_norms[mm] = report.max_e_norms[mm].max(en);
            if r_bound_held && !(en < ctx.mu) {
                report.error_bound_violations += 1;
            }
        }
        for i in 0..n {
            for j in 0..ctx.layers {
                let ratio = rec.v_norms[i * ctx.layers + j] / ctx.v_upper[j];
                report.max_v_norm_ratio = report.max_v_norm_ratio.max(ratio);
                if ratio > 1.0 + BAND_OVERSHOOT {
                    report.band_violations += 1;
                }
            }
        }
        report.max_sliding_residual = report.max_sliding_residual.max(rec.sliding_residual);

        if k > 0 {
            let prev = &trace[k - 1];
            // An interval touching the sliding band may chatter; skip it.
            if !any_in_chatter_band(prev, ctx.chatter_band) && !any_in_chatter_band(rec, ctx.chatter_band) {
                let (a, b) = (lyap(prev), lyap(rec));
                let inc = b - a;
                report.lyapunov_checked_intervals += 1;
                if inc > 1e-6 * (1.0 + a.abs()) {
                    report.lyapunov_increases += 1;
                    report.lyapunov_max_increase = report.lyapunov_max_increase.max(inc);
                }
            }
        }
    }
    report.max_e_norm = report.max_e_norms.iter().copied().fold(0.0, f64::max);

    let pos_err = |rec: &TraceRecord| (0..n).map(|i| rec.position_error(m, i)).fold(0.0, f64::max);
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        report.initial_position_error = pos_err(first);
        report.final_tracking_errors = (0..n).map(|i| last.position_error(m, i)).collect();
        let tail_len = (trace.len() / 10).max(1);
        report.tail_position_error = trace[trace.len() - tail_len..].iter().map(pos_err).fold(0.0, f64::max);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MonitorContext {
        MonitorContext {
            mu: 10.0,
            order: 2,
            n_followers: 2,
            layers: 1,
            v_upper: vec![5.0],
            chatter_band: 0.01,
            lambda_sum_exceeds_one: false,
        }
    }

    fn rec(t: f64, r: [f64; 2], v_obs: f64) -> TraceRecord {
        TraceRecord {
            t,
            x: vec![0.0; 4],
            x0: vec![0.0; 2],
            e_norms: vec![0.0; 2],
            r: r.to_vec(),
            r_norm: (r[0] * r[0] + r[1] * r[1]).sqrt(),
            barrier_value: 0.0,
            u: vec![0.0; 2],
            w_norms: vec![0.0; 2],
            v_norms: vec![1.0; 2],
            active_layer: Some(0),
            v_obs,
            v_full: None,
            sliding_residual: 0.0,
        }
    }

    #[test]
    fn converged_trace_is_clean() {
        let trace: Vec<_> = (0..10).map(|k| rec(k as f64, [0.0, 0.0], 0.0)).collect();
        let rep = monitor(&trace, &ctx());
        assert_eq!(rep.max_r_norm, 0.0);
        assert_eq!(rep.lyapunov_increases, 0);
        assert!(rep.barrier_respected);
        // Every interval sits inside the chatter band.
        assert_eq!(rep.lyapunov_checked_intervals, 0);
    }

    #[test]
    fn constant_r_no_violation() {
        let trace: Vec<_> = (0..10).map(|k| rec(k as f64, [1.0, -2.0], 0.7)).collect();
        let rep = monitor(&trace, &ctx());
        assert_eq!(rep.lyapunov_checked_intervals, 9);
        assert_eq!(rep.lyapunov_increases, 0);
    }

    #[test]
    fn increase_is_counted() {
        let trace = vec![rec(0.0, [1.0, 1.0], 1.0), rec(1.0, [1.0, 1.0], 1.1), rec(2.0, [1.0, 1.0], 1.0)];
        let rep = monitor(&trace, &ctx());
        assert_eq!(rep.lyapunov_increases, 1);
        assert!((rep.lyapunov_max_increase - 0.1).abs() < 1e-12);
    }

    #[test]
    fn band_and_barrier_flags() {
        let mut a = rec(0.0, [1.0, 1.0], 0.0);
        a.v_norms = vec![5.0 * 1.01, 1.0];
        let mut b = rec(1.0, [11.0, 0.0], 0.0);
        b.e_norms = vec![12.0, 0.0];
        let rep = monitor(&[a, b], &ctx());
        assert_eq!(rep.band_violations, 1);
        assert!(!rep.barrier_respected);
        // The e-bound is only checked while the r-bound held.
        assert_eq!(rep.error_bound_violations, 0);
    }
}
