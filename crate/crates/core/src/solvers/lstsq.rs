//! Unconstrained linear least squares.

use crate::linalg::{Mat, PivotedQr};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub x: Vec<T>,
    /// `M x − s`
    pub residual: Vec<T>,
    /// Set when `M` lacks full column rank; `x` is then the minimum-norm solution.
    pub rank_deficient: bool,
}

impl<T: Real> LeastSquares<T> {
    pub fn residual_norm(&self) -> T {
        crate::linalg::norm2(&self.residual)
    }
}

/// `argmin ‖M x − s‖` by column-pivoted QR.
pub fn solve_least_squares<T: Real>(m: &Mat<T>, s: &[T]) -> LeastSquares<T> {
    assert_eq!(m.rows(), s.len(), "least squares: row count mismatch");
    let qr = PivotedQr::new(m, T::epsilon() * T::lit(64.0) * T::from_usize(m.rows().max(m.cols())));
    let x = qr.solve(s);
    let mx = m.mul_vec(&x);
    let residual = mx.iter().zip(s).map(|(&a, &b)| a - b).collect();
    LeastSquares { x, residual, rank_deficient: qr.rank() < m.cols() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn consistent_single_motor() {
        let m = Mat::from_rows(&[vec![10.0], vec![10.0], vec![10.0]]);
        let r = solve_least_squares(&m, &[20.0, 20.0, 20.0]);
        assert_abs_diff_eq!(r.x[0], 2.0, epsilon = 1e-14);
        assert!(r.residual_norm() < 1e-12);
        assert!(!r.rank_deficient);
    }

    #[test]
    fn inconsistent_single_motor() {
        let m = Mat::from_rows(&[vec![10.0], vec![10.0], vec![10.0]]);
        let s = [10.0, 20.0, 30.0];
        let r = solve_least_squares(&m, &s);
        // normal equations: θ = Σ r s / Σ r²
        let theta = (10.0 * 10.0 + 10.0 * 20.0 + 10.0 * 30.0) / 300.0;
        assert_abs_diff_eq!(r.x[0], theta, epsilon = 1e-14);
        for (e, want) in r.residual.iter().zip([10.0, 0.0, -10.0]) {
            assert_abs_diff_eq!(*e, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_pattern_decouples() {
        let m = Mat::from_rows(&[
            vec![10.0, 0.0],
            vec![10.0, 0.0],
            vec![10.0, 0.0],
            vec![0.0, 10.0],
            vec![0.0, 10.0],
        ]);
        let r = solve_least_squares(&m, &[1.0, 2.0, 3.0, 4.0, 6.0]);
        assert_abs_diff_eq!(r.x[0], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(r.x[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_is_flagged() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let r = solve_least_squares(&m, &[2.0, 4.0]);
        assert!(r.rank_deficient);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-12);
    }
}
