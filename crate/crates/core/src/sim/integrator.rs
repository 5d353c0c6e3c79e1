//! Fixed-step explicit integrators over flat state vectors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Workspace {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }
}

/// Advances `y` in place by one step of size `dt`. The right-hand side is
/// re-evaluated at every stage; a failing stage leaves `y` untouched.
pub fn step<E, F>(method: Method, rhs: &mut F, t: f64, y: &mut [f64], dt: f64, ws: &mut Workspace) -> Result<(), E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = y.len();
    if ws.k1.len() != n {
        *ws = Workspace::new(n);
    }
    match method {
        Method::Euler => {
            rhs(t, y, &mut ws.k1)?;
            for (yi, ki) in y.iter_mut().zip(&ws.k1) {
                *yi += dt * ki;
            }
        }
        Method::Rk4 => {
            let half = 0.5 * dt;
            rhs(t, y, &mut ws.k1)?;
            for i in 0..n {
                ws.stage[i] = y[i] + half * ws.k1[i];
            }
            rhs(t + half, &ws.stage, &mut ws.k2)?;
            for i in 0..n {
                ws.stage[i] = y[i] + half * ws.k2[i];
            }
            rhs(t + half, &ws.stage, &mut ws.k3)?;
            for i in 0..n {
                ws.stage[i] = y[i] + dt * ws.k3[i];
            }
            rhs(t + dt, &ws.stage, &mut ws.k4)?;
            let sixth = dt / 6.0;
            for i in 0..n {
                y[i] += sixth * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn chain(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Infallible> {
        let m = y.len();
        dy[..m - 1].copy_from_slice(&y[1..]);
        dy[m - 1] = 0.0;
        Ok(())
    }

    fn integrate(method: Method, y0: &[f64], dt: f64, t_end: f64) -> Vec<f64> {
        let mut y = y0.to_vec();
        let mut ws = Workspace::new(y.len());
        let steps = (t_end / dt).round() as usize;
        for n in 0..steps {
            step(method, &mut chain, n as f64 * dt, &mut y, dt, &mut ws).unwrap();
        }
        y
    }

    #[test]
    fn rk4_exact_on_integrator_chain() {
        let y = integrate(Method::Rk4, &[0.0, 1.0, 0.0], 1e-3, 1.0);
        assert!((y[0] - 1.0).abs() < 1e-12);
        let y = integrate(Method::Rk4, &[0.0, 0.0, 1.0], 1e-3, 1.0);
        assert!((y[0] - 0.5).abs() < 1e-12);
        let y = integrate(Method::Rk4, &[0.0, 0.0, 0.0, 1.0], 1e-2, 1.0);
        assert!((y[0] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn euler_first_order() {
        let y = integrate(Method::Euler, &[0.0, 1.0, 0.0], 1e-3, 1.0);
        assert!((y[0] - 1.0).abs() < 1e-3);
        let coarse = (integrate(Method::Euler, &[0.0, 0.0, 1.0], 1e-2, 1.0)[0] - 0.5).abs();
        let fine = (integrate(Method::Euler, &[0.0, 0.0, 1.0], 5e-3, 1.0)[0] - 0.5).abs();
        assert!((coarse / fine - 2.0).abs() < 0.2, "{coarse} {fine}");
    }

    #[test]
    fn failing_stage_leaves_state() {
        let mut y = vec![1.0, 2.0];
        let mut ws = Workspace::new(2);
        let mut calls = 0;
        let mut rhs = |_t: f64, _y: &[f64], dy: &mut [f64]| {
            calls += 1;
            dy.fill(1.0);
            if calls == 3 {
                Err("boom")
            } else {
                Ok(())
            }
        };
        assert_eq!(step(Method::Rk4, &mut rhs, 0.0, &mut y, 0.1, &mut ws), Err("boom"));
        assert_eq!(y, vec![1.0, 2.0]);
    }
}
