//! Affine subspace fitting by principal component analysis.

use crate::linalg::{dot, sym_eigen, Mat};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit<T> {
    pub origin: Vec<T>,
    /// Orthonormal directions, largest variance first.
    pub directions: Vec<Vec<T>>,
    /// Variance along each direction.
    pub variances: Vec<T>,
}

impl<T: Real> AffineFit<T> {
    /// Euclidean distance from `p` to the fitted subspace.
    pub fn distance(&self, p: &[T]) -> T {
        let mut r: Vec<T> = p.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect();
        for d in &self.directions {
            let c = dot(&r, d);
            for (ri, &di) in r.iter_mut().zip(d) {
                *ri -= c * di;
            }
        }
        dot(&r, &r).sqrt()
    }
}

/// Mean plus the top-`k` principal directions of `points`. Returns `None` for
/// an empty set or inconsistent dimensions.
pub fn pca_fit<T: Real>(points: &[Vec<T>], k: usize) -> Option<AffineFit<T>> {
    let n = points.first()?.len();
    if points.iter().any(|p| p.len() != n) || k > n {
        return None;
    }
    let cnt = T::from_usize(points.len());
    let mut origin = vec![T::zero(); n];
    for p in points {
        for (o, &v) in origin.iter_mut().zip(p) {
            *o += v / cnt;
        }
    }
    let mut cov = Mat::<T>::zeros(n, n);
    for p in points {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += (p[i] - origin[i]) * (p[j] - origin[j]) / cnt;
            }
        }
    }
    let (vals, vecs) = sym_eigen(&cov);
    let mut directions = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for c in (n - k..n).rev() {
        let mut d = vecs.column(c);
        // deterministic orientation: largest component positive
        let big = d.iter().fold(T::zero(), |m, &v| if v.abs() > m.abs() { v } else { m });
        if big < T::zero() {
            d.iter_mut().for_each(|v| *v = -*v);
        }
        directions.push(d);
        variances.push(vals[c].max(T::zero()));
    }
    Some(AffineFit { origin, directions, variances })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_fit_exactly() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| {
            let t = i as f64 * 0.3 - 1.0;
            vec![1.0 + 2.0 * t, -0.5 + t, 3.0 - 0.5 * t]
        }).collect();
        let fit = pca_fit(&pts, 1).unwrap();
        for p in &pts {
            assert!(fit.distance(p) <= 1e-9);
        }
        assert!(fit.distance(&[0.0, 0.0, 0.0]) > 1e-3);
    }

    #[test]
    fn planar_points_fit_a_plane() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let (u, v) = (i as f64, j as f64);
                pts.push(vec![u, v, 0.5 * u - 0.25 * v + 1.0]);
            }
        }
        let fit = pca_fit(&pts, 2).unwrap();
        assert_eq!(fit.directions.len(), 2);
        assert!(pts.iter().all(|p| fit.distance(p) <= 1e-9));
        assert!(fit.variances[0] >= fit.variances[1]);
    }
}
