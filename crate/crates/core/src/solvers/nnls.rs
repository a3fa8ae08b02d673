//! Nonnegative least squares (Lawson–Hanson active set).

use crate::linalg::{dot, norm2, Mat, PivotedQr};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Nnls<T> {
    pub x: Vec<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

/// `argmin ‖A x − b‖ s.t. x ≥ 0`.
pub fn solve_nnls<T: Real>(a: &Mat<T>, b: &[T]) -> Nnls<T> {
    let (m, n) = a.shape();
    assert_eq!(m, b.len(), "nnls: row count mismatch");
    let tol = T::epsilon() * T::lit(10.0) * a.max_abs().max(T::one()) * T::from_usize(m.max(n)) * norm2(b).max(T::one());
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let max_iter = 3 * n.max(1) + 10;
    let mut iterations = 0;

    let gradient = |x: &[T]| -> Vec<T> {
        let ax = a.mul_vec(x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        a.tr_mul_vec(&r)
    };

    let mut w = gradient(&x);
    while iterations < max_iter {
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            iterations += 1;
            let p: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let ap = a.select_cols(&p);
            let zp = PivotedQr::new(&ap, T::epsilon() * T::lit(64.0)).solve(b);
            if zp.iter().all(|&v| v > T::zero()) {
                for (k, &i) in p.iter().enumerate() {
                    x[i] = zp[k];
                }
                break;
            }
            let mut alpha = T::one();
            for (k, &i) in p.iter().enumerate() {
                if zp[k] <= T::zero() {
                    let d = x[i] - zp[k];
                    if d > T::zero() {
                        alpha = alpha.min(x[i] / d);
                    }
                }
            }
            for (k, &i) in p.iter().enumerate() {
                let xi = x[i];
                x[i] = xi + alpha * (zp[k] - xi);
            }
            for &i in &p {
                if x[i] <= tol {
                    x[i] = T::zero();
                    passive[i] = false;
                }
            }
            if iterations >= max_iter || !passive.iter().any(|&v| v) {
                break;
            }
        }
        w = gradient(&x);
    }
    let ax = a.mul_vec(&x);
    let r: Vec<T> = ax.iter().zip(b).map(|(&u, &v)| u - v).collect();
    Nnls { residual_norm: dot(&r, &r).sqrt(), x, iterations }
}
