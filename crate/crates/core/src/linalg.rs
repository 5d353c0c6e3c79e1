//! Small dense linear-algebra helpers shared by the graph, sliding and
//! controller modules.

use nalgebra::{DMatrix, DVector};

/// Singular values of `m`, largest first.
///
/// Backed by nalgebra's bidiagonal SVD. Empty matrices yield an empty list.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value (spectral norm).
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite when the matrix is singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenvalues of a symmetric matrix, ascending. Only the lower triangle is
/// trusted, as with any symmetric eigensolver.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

/// Largest absolute element-wise difference between `m` and its transpose.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub fn diag(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(v)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_singular_values_2x2(m: &DMatrix<f64>) -> [f64; 2] {
        // Eigenvalues of MᵀM via the quadratic formula.
        let g = m.transpose() * m;
        let tr = g[(0, 0)] + g[(1, 1)];
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        [(tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).max(0.0).sqrt()]
    }

    #[test]
    fn identity_has_unit_singular_values() {
        assert_eq!(singular_values(&DMatrix::identity(2, 2)), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_matrix_singular_values() {
        assert_eq!(singular_values(&DMatrix::zeros(2, 2)), vec![0.0, 0.0]);
    }

    #[test]
    fn lower_bidiagonal_golden_ratio() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        let sv = singular_values(&m);
        let expect = [((3.0 + 5f64.sqrt()) / 2.0).sqrt(), ((3.0 - 5f64.sqrt()) / 2.0).sqrt()];
        for (s, e) in sv.iter().zip(expect) {
            assert!(((s - e) / e).abs() < 1e-10, "{s} vs {e}");
        }
        assert!((sv[0] - 1.618_033_988_749_895).abs() < 1e-12);
    }

    #[test]
    fn random_2x2_match_gram_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-5.0..5.0));
            let sv = singular_values(&m);
            let oracle = gram_singular_values_2x2(&m);
            assert!(sv[0] >= sv[1]);
            assert!(((sv[0] - oracle[0]) / oracle[0]).abs() < 1e-10);
            // The quadratic-formula oracle loses relative accuracy for tiny σ̲.
            if oracle[1] > 1e-3 * oracle[0] {
                assert!(((sv[1] - oracle[1]) / oracle[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn product_of_singular_values_is_abs_det() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            for _ in 0..20 {
                let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
                let prod: f64 = singular_values(&m).iter().product();
                let det = m.determinant().abs();
                assert!((prod - det).abs() < 1e-8 * (1.0 + det), "n={n}: {prod} vs {det}");
            }
        }
    }
}
