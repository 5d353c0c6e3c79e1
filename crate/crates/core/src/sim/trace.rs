//! Sampled trajectory records and their CSV form.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Serialize;

/// Dimensions needed to name trace columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceShape {
    pub n: usize,
    pub m: usize,
    pub layers: usize,
    pub full_lyapunov: bool,
}

/// One sampled instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    /// Follower states, agent-major (`x[i * M + m]`).
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    /// `‖e^m‖_P` for each order.
    pub e_norms: Vec<f64>,
    pub r: Vec<f64>,
    pub r_norm: f64,
    pub barrier_value: f64,
    pub u: Vec<f64>,
    pub w_norms: Vec<f64>,
    /// `‖V̂_ij‖_F`, agent-major (`v_norms[i * layers + j]`).
    pub v_norms: Vec<f64>,
    pub active_layer: Option<usize>,
    pub v_obs: f64,
    pub v_full: Option<f64>,
    /// Max-abs residual of `E₂ = E₁Λᵀ + r lᵀ`.
    pub sliding_residual: f64,
}

impl TraceRecord {
    pub fn position_error(&self, m_order: usize, agent: usize) -> f64 {
        (self.x[agent * m_order] - self.x0[0]).abs()
    }
}

pub fn header(shape: &TraceShape) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=shape.n {
        for m in 1..=shape.m {
            h.push(format!("x_{i}_{m}"));
        }
    }
    for m in 1..=shape.m {
        h.push(format!("x0_{m}"));
    }
    for m in 1..=shape.m {
        h.push(format!("e_norm_P_{m}"));
    }
    for i in 1..=shape.n {
        h.push(format!("r_{i}"));
    }
    h.push("r_norm_P".into());
    h.push("barrier_value".into());
    for i in 1..=shape.n {
        h.push(format!("u_{i}"));
    }
    for i in 1..=shape.n {
        h.push(format!("W_norm_{i}"));
    }
    for i in 1..=shape.n {
        for j in 0..shape.layers {
            h.push(format!("V_norm_{i}_{j}"));
        }
    }
    h.push("active_layer".into());
    h.push("V_obs".into());
    if shape.full_lyapunov {
        h.push("V_full".into());
    }
    h.push("sliding_residual".into());
    h
}

fn fmt(v: f64) -> String {
    // Shortest round-trip representation; deterministic across runs.
    format!("{v:?}")
}

pub fn write_csv<W: Write>(out: W, shape: &TraceShape, trace: &[TraceRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(shape))?;
    for rec in trace {
        let mut row: Vec<String> = Vec::with_capacity(64);
        row.push(fmt(rec.t));
        row.extend(rec.x.iter().map(|&v| fmt(v)));
        row.extend(rec.x0.iter().map(|&v| fmt(v)));
        row.extend(rec.e_norms.iter().map(|&v| fmt(v)));
        row.extend(rec.r.iter().map(|&v| fmt(v)));
        row.push(fmt(rec.r_norm));
        row.push(fmt(rec.barrier_value));
        row.extend(rec.u.iter().map(|&v| fmt(v)));
        row.extend(rec.w_norms.iter().map(|&v| fmt(v)));
        row.extend(rec.v_norms.iter().map(|&v| fmt(v)));
        row.push(rec.active_layer.map_or("-1".to_string(), |j| j.to_string()));
        row.push(fmt(rec.v_obs));
        if shape.full_lyapunov {
            row.push(fmt(rec.v_full.unwrap_or(f64::NAN)));
        }
        row.push(fmt(rec.sliding_residual));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Column-oriented view of a trace CSV, keyed by header name.
#[derive(Debug, Clone, Default)]
pub struct TraceTable {
    pub columns: Vec<String>,
    data: HashMap<String, Vec<f64>>,
}

impl TraceTable {
    pub fn read<R: Read>(input: R) -> csv::Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut data: HashMap<String, Vec<f64>> = columns.iter().map(|c| (c.clone(), Vec::new())).collect();
        for rec in rdr.records() {
            let rec = rec?;
            for (name, field) in columns.iter().zip(rec.iter()) {
                let v = field.parse::<f64>().unwrap_or(f64::NAN);
                data.get_mut(name).expect("column").push(v);
            }
        }
        Ok(Self { columns, data })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.data.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.data.get("t").map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of columns whose name starts with `prefix` and whose remainder
    /// has `parts` underscore-separated fields.
    pub fn count_matching(&self, prefix: &str, parts: usize) -> usize {
        self.columns
            .iter()
            .filter(|c| {
                c.strip_prefix(prefix)
                    .is_some_and(|rest| rest.split('_').count() == parts && rest.split('_').all(|p| p.parse::<usize>().is_ok()))
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(shape: &TraceShape, t: f64) -> TraceRecord {
        TraceRecord {
            t,
            x: vec![1.5; shape.n * shape.m],
            x0: vec![0.25; shape.m],
            e_norms: vec![0.0; shape.m],
            r: vec![-0.1; shape.n],
            r_norm: 0.3,
            barrier_value: 1e-6,
            u: vec![2.0; shape.n],
            w_norms: vec![3.0; shape.n],
            v_norms: vec![4.0; shape.n * shape.layers],
            active_layer: Some(1),
            v_obs: 0.5,
            v_full: None,
            sliding_residual: 0.0,
        }
    }

    #[test]
    fn header_names() {
        let shape = TraceShape { n: 2, m: 3, layers: 2, full_lyapunov: true };
        let h = header(&shape);
        assert_eq!(h[0], "t");
        assert_eq!(h[1], "x_1_1");
        assert!(h.contains(&"x0_3".to_string()));
        assert!(h.contains(&"V_norm_2_1".to_string()));
        assert!(h.contains(&"V_full".to_string()));
        assert!(h.contains(&"barrier_value".to_string()));
    }

    #[test]
    fn csv_round_trip_through_table() {
        let shape = TraceShape { n: 2, m: 3, layers: 2, full_lyapunov: false };
        let trace = vec![sample(&shape, 0.0), sample(&shape, 0.1)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &shape, &trace).unwrap();
        let table = TraceTable::read(buf.as_slice()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.column("t").unwrap(), &[0.0, 0.1]);
        assert_eq!(table.column("x_2_3").unwrap(), &[1.5, 1.5]);
        assert_eq!(table.column("active_layer").unwrap(), &[1.0, 1.0]);
        assert_eq!(table.count_matching("x_", 2), 6);
        assert_eq!(table.count_matching("W_norm_", 1), 2);
        assert!(table.column("V_full").is_none());
    }

    #[test]
    fn empty_trace_has_header_only() {
        let shape = TraceShape { n: 1, m: 2, layers: 1, full_lyapunov: false };
        let mut buf = Vec::new();
        write_csv(&mut buf, &shape, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("t,x_1_1,x_1_2,"));
    }
}
