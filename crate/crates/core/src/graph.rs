//! Directed communication topology with leader pinning.
//!
//! Follower `i` receives information from follower `j` when `a[i][j] > 0`,
//! and from the leader when `b[i] > 0`. From these we derive the Laplacian
//! `L = D - A`, the pinning matrix `B`, and the weighting vector
//! `q = (L + B)⁻¹ 1` whose reciprocals form the diagonal matrix `P` used by
//! every weighted norm in the controller.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

/// Condition number beyond which `L + B` is treated as singular.
pub const SINGULARITY_CONDITION: f64 = 1e12;
/// Minimum eigenvalue a matrix must exceed to count as positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("topology: adjacency must be {n}x{n} and pinning length {n} (got {rows}x{cols}, pinning {pins})")]
    Shape {
        n: usize,
        rows: usize,
        cols: usize,
        pins: usize,
    },
    #[error("topology: at least one follower is required")]
    Empty,
    #[error("topology: entry {what} is negative or not finite")]
    InvalidWeight { what: String },
    #[error("topology: self-loop on follower {0} (adjacency diagonal must be zero)")]
    SelfLoop(usize),
    #[error("topology: no follower is pinned to the leader (need some b_i > 0)")]
    NoPinnedNode,
    #[error("topology: followers {0:?} are not reachable from any pinned follower")]
    Unreachable(Vec<usize>),
    #[error("graph: L + B is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("graph: {which} is not positive definite (minimum eigenvalue {min_eig:e})")]
    NotPositiveDefinite { which: &'static str, min_eig: f64 },
}

/// A validated leader-follower topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedTopology {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

/// Outcome of the leader-reachability search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reachability {
    pub all_reachable: bool,
    /// 1-based follower labels that no pinned follower can reach.
    pub unreachable: Vec<usize>,
}

impl DirectedTopology {
    /// Validates shape, weights, self-loops, pinning and leader reachability.
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self, GraphError> {
        check_well_formed(&adjacency, &pinning)?;
        let reach = check_reachability(&adjacency, &pinning);
        if !reach.all_reachable {
            return Err(GraphError::Unreachable(reach.unreachable));
        }
        Ok(Self { adjacency, pinning })
    }

    pub fn from_rows(rows: &[Vec<f64>], pinning: &[f64]) -> Result<Self, GraphError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GraphError::Shape {
                n,
                rows: n,
                cols: rows.iter().map(Vec::len).max().unwrap_or(0),
                pins: pinning.len(),
            });
        }
        let adjacency = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(adjacency, DVector::from_column_slice(pinning))
    }

    /// Directed chain `leader → 1 → 2 → … → n`.
    pub fn chain(n: usize) -> Result<Self, GraphError> {
        let mut a = DMatrix::zeros(n, n);
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[0] = 1.0;
        }
        Self::new(a, b)
    }

    pub fn n_followers(&self) -> usize {
        self.pinning.len()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }
}

fn check_well_formed(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(), GraphError> {
    let n = b.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if a.nrows() != n || a.ncols() != n {
        return Err(GraphError::Shape {
            n,
            rows: a.nrows(),
            cols: a.ncols(),
            pins: n,
        });
    }
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(GraphError::InvalidWeight {
                    what: format!("a[{}][{}] = {v}", i + 1, j + 1),
                });
            }
        }
        if a[(i, i)] != 0.0 {
            return Err(GraphError::SelfLoop(i + 1));
        }
        if !b[i].is_finite() || b[i] < 0.0 {
            return Err(GraphError::InvalidWeight {
                what: format!("b[{}] = {}", i + 1, b[i]),
            });
        }
    }
    if b.iter().all(|&x| x <= 0.0) {
        return Err(GraphError::NoPinnedNode);
    }
    Ok(())
}

/// Breadth-first search from the pinned followers along information flow
/// (`j → i` whenever `a[i][j] > 0`).
pub fn check_reachability(adjacency: &DMatrix<f64>, pinning: &DVector<f64>) -> Reachability {
    let n = pinning.len().min(adjacency.nrows()).min(adjacency.ncols());
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| pinning[i] > 0.0).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && adjacency[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    let unreachable: Vec<usize> = (0..n).filter(|&i| !seen[i]).map(|i| i + 1).collect();
    Reachability {
        all_reachable: unreachable.is_empty(),
        unreachable,
    }
}

/// Extreme singular values of the matrices the gain certificate needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularValueSummary {
    pub a_max: f64,
    pub a_min: f64,
    pub lb_max: f64,
    pub lb_min: f64,
    pub db_max: f64,
    pub db_min: f64,
    pub p_min: f64,
}

/// Matrices derived from a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub adjacency: DMatrix<f64>,
    pub in_degree: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub pin_matrix: DMatrix<f64>,
    /// `L + B`.
    pub lb: DMatrix<f64>,
    /// Diagonal of `D + B`.
    pub db_diag: DVector<f64>,
    pub q: DVector<f64>,
    /// Diagonal of `P`, `p_i = 1 / q_i`.
    pub p_diag: DVector<f64>,
    pub p_matrix: DMatrix<f64>,
    pub q_matrix: DMatrix<f64>,
    /// `(L + B)⁻¹ A`, used by the corrective signal.
    pub coupling: DMatrix<f64>,
    pub sv_summary: SingularValueSummary,
    /// ∞-norm residual of `(L + B) q = 1`.
    pub q_residual: f64,
}

impl GraphMatrices {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn min_eig_p(&self) -> f64 {
        self.p_diag.min()
    }

    pub fn min_eig_q(&self) -> f64 {
        linalg::min_symmetric_eigenvalue(&self.q_matrix)
    }
}

pub fn build_matrices(topo: &DirectedTopology) -> Result<GraphMatrices, GraphError> {
    let n = topo.n_followers();
    let a = topo.adjacency.clone();
    let degrees = DVector::from_fn(n, |i, _| a.row(i).sum());
    let d = linalg::diag(&degrees);
    let laplacian = &d - &a;
    let pin_matrix = linalg::diag(&topo.pinning);
    let lb = &laplacian + &pin_matrix;

    let condition = linalg::condition_number(&lb);
    if !(condition < SINGULARITY_CONDITION) {
        return Err(GraphError::SingularSystem { condition });
    }
    let lu = lb.clone().lu();
    let ones = DVector::from_element(n, 1.0);
    let mut q = lu
        .solve(&ones)
        .ok_or(GraphError::SingularSystem { condition })?;
    // One step of iterative refinement keeps the residual at rounding level.
    let resid = &ones - &lb * &q;
    if let Some(dq) = lu.solve(&resid) {
        q += dq;
    }
    let q_residual = linalg::inf_norm(&(&lb * &q - &ones));

    if let Some(min_q) = q.iter().copied().reduce(f64::min) {
        if !(min_q > 0.0) {
            return Err(GraphError::NotPositiveDefinite {
                which: "P",
                min_eig: 1.0 / min_q,
            });
        }
    }
    let p_diag = q.map(|qi| 1.0 / qi);
    let p_matrix = linalg::diag(&p_diag);
    let s = &p_matrix * &lb;
    let q_matrix = &s + s.transpose();
    let min_eig = linalg::min_symmetric_eigenvalue(&q_matrix);
    if !(min_eig > PD_TOLERANCE) {
        return Err(GraphError::NotPositiveDefinite {
            which: "Q",
            min_eig,
        });
    }

    let coupling = lu.solve(&a).ok_or(GraphError::SingularSystem { condition })?;
    let db_diag = &degrees + &topo.pinning;
    let db = linalg::diag(&db_diag);
    let a_sv = linalg::singular_values(&a);
    let lb_sv = linalg::singular_values(&lb);
    let db_sv = linalg::singular_values(&db);
    let sv_summary = SingularValueSummary {
        a_max: a_sv[0],
        a_min: a_sv[n - 1],
        lb_max: lb_sv[0],
        lb_min: lb_sv[n - 1],
        db_max: db_sv[0],
        db_min: db_sv[n - 1],
        p_min: p_diag.min(),
    };

    Ok(GraphMatrices {
        adjacency: a,
        in_degree: d,
        laplacian,
        pin_matrix,
        lb,
        db_diag,
        q,
        p_diag,
        p_matrix,
        q_matrix,
        coupling,
        sv_summary,
        q_residual,
    })
}
