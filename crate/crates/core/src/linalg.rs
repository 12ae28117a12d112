//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

/// Least-squares solution of `a x ≈ b` through the SVD.
///
/// Singular values below `rel_tol * σ_max` are treated as zero. Returns the
/// minimum-norm solution and the numerical rank.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (rel_tol * smax).max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let x = svd
        .solve(b, tol)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    (x, rank)
}

/// Numerical rank of `a`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = a.clone().singular_values();
    let smax = s.max();
    if smax <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Solves a square system by LU with one step of iterative refinement.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b)?;
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        if dx.iter().all(|v| v.is_finite()) {
            x += dx;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overdetermined_exact_fit() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let (x, r) = least_squares(&a, &b, 1e-12);
        assert_eq!(r, 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(rank(&a, 1e-10), 1);
    }
}
