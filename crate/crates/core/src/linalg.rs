//! Small dense linear algebra: row-major matrices, Householder QR, LDLᵀ for
//! quasi-definite systems and a Jacobi symmetric eigensolver.
//!
//! Problem sizes in this crate stay below a few hundred unknowns, so
//! everything is dense and allocation-happy.

use crate::scalar::Real;
use std::fmt;
use std::ops::{Index, IndexMut};

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6?} ", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds a matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn column_vector(v: &[T]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diag(v: &[T]) -> Self {
        let mut m = Self::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without forming the transpose.
    pub fn tr_matmul(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.rows, other.rows, "tr_matmul shape mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(brow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            axpy(vi, self.row(i), &mut out);
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Self {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Mat { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Writes `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat<T>) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn hstack(parts: &[&Mat<T>]) -> Self {
        let rows = parts.first().map_or(0, |p| p.rows);
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        out
    }

    pub fn vstack(parts: &[&Mat<T>]) -> Self {
        let cols = parts.iter().find(|p| p.rows > 0).map_or(0, |p| p.cols);
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            if p.rows == 0 {
                continue;
            }
            assert_eq!(p.cols, cols, "vstack column mismatch");
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `y += a·x`
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Euclidean norm, scaled to avoid overflow.
pub fn norm2<T: Real>(v: &[T]) -> T {
    let scale = norm_inf(v);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let mut s = T::zero();
    for &x in v {
        let y = x / scale;
        s += y * y;
    }
    scale * s.sqrt()
}

pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Householder QR with column pivoting, `A·P = Q·R`.
///
/// The factored matrix keeps R in its upper triangle and the essential parts of
/// the Householder vectors below the diagonal.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    qr: Mat<T>,
    tau: Vec<T>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Real> PivotedQr<T> {
    /// Factors `a`; columns whose remaining norm falls below
    /// `rank_tol · max column norm` are treated as dependent.
    pub fn new(a: &Mat<T>, rank_tol: T) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = vec![T::zero(); m.min(n)];
        let mut col_norms: Vec<T> = (0..n).map(|j| norm2(&qr.column(j))).collect();
        let max_norm = col_norms.iter().fold(T::zero(), |acc, &x| acc.max(x));
        let threshold = rank_tol * max_norm;
        let mut rank = 0;

        for k in 0..m.min(n) {
            // recompute trailing norms exactly; sizes are small
            for j in k..n {
                let mut s = T::zero();
                for i in k..m {
                    s += qr[(i, j)] * qr[(i, j)];
                }
                col_norms[j] = s.sqrt();
            }
            let (p, &best) = col_norms[k..]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(i, v)| (i + k, v))
                .unwrap();
            if best <= threshold || best == T::zero() {
                break;
            }
            if p != k {
                for i in 0..m {
                    let tmp = qr[(i, k)];
                    qr[(i, k)] = qr[(i, p)];
                    qr[(i, p)] = tmp;
                }
                perm.swap(k, p);
                col_norms.swap(k, p);
            }
            tau[k] = householder_column(&mut qr, k, k);
            rank += 1;
        }
        PivotedQr { qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Applies `Qᵀ` to `b` in place.
    pub fn apply_qt(&self, b: &mut [T]) {
        for k in 0..self.rank {
            apply_householder(&self.qr, k, k, self.tau[k], b);
        }
    }

    /// Minimum-norm least-squares solution of `A x ≈ b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (m, n) = self.qr.shape();
        assert_eq!(b.len(), m);
        let r = self.rank;
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        let mut x_perm = vec![T::zero(); n];
        if r == 0 {
            return x_perm;
        }
        if r == n {
            back_substitute_upper(&self.qr, &c[..r], &mut x_perm[..r]);
        } else {
            // Complete orthogonal decomposition: [R11 R12]ᵀ = Z·[T; 0].
            let rt = Mat::from_fn(n, r, |i, j| if i <= j || i >= r { self.qr[(j, i)] } else { T::zero() });
            let mut rt = rt;
            // zero the strictly-lower part of R that holds Householder data
            for i in 0..r {
                for j in 0..r {
                    if i > j {
                        rt[(i, j)] = self.qr[(j, i)];
                    }
                }
            }
            let mut ztau = vec![T::zero(); r];
            for k in 0..r {
                ztau[k] = householder_column(&mut rt, k, k);
            }
            // Tᵀ w = c[..r], T upper triangular (r×r) stored in rt
            let mut w = vec![T::zero(); n];
            for i in 0..r {
                let mut s = c[i];
                for j in 0..i {
                    s -= rt[(j, i)] * w[j];
                }
                w[i] = s / rt[(i, i)];
            }
            // x' = Z w
            for k in (0..r).rev() {
                apply_householder(&rt, k, k, ztau[k], &mut w);
            }
            x_perm = w;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = x_perm[k];
        }
        x
    }
}

/// Computes a Householder reflector for column `col` from row `row` down,
/// applies it to the trailing columns and stores the essential vector below
/// the diagonal. Returns tau.
fn householder_column<T: Real>(a: &mut Mat<T>, row: usize, col: usize) -> T {
    let m = a.rows();
    let n = a.cols();
    let mut norm = T::zero();
    for i in row..m {
        norm = norm.hypot(a[(i, col)]);
    }
    if norm == T::zero() {
        return T::zero();
    }
    let alpha = a[(row, col)];
    let beta = if alpha >= T::zero() { -norm } else { norm };
    let v0 = alpha - beta;
    for i in row + 1..m {
        a[(i, col)] /= v0;
    }
    let tau = (beta - alpha) / beta;
    a[(row, col)] = beta;
    for j in col + 1..n {
        let mut s = a[(row, j)];
        for i in row + 1..m {
            s += a[(i, col)] * a[(i, j)];
        }
        s *= tau;
        a[(row, j)] -= s;
        for i in row + 1..m {
            let vi = a[(i, col)];
            a[(i, j)] -= s * vi;
        }
    }
    tau
}

fn apply_householder<T: Real>(h: &Mat<T>, row: usize, col: usize, tau: T, b: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let m = h.rows();
    let mut s = b[row];
    for i in row + 1..m {
        s += h[(i, col)] * b[i];
    }
    s *= tau;
    b[row] -= s;
    for i in row + 1..m {
        b[i] -= s * h[(i, col)];
    }
}

fn back_substitute_upper<T: Real>(r: &Mat<T>, c: &[T], x: &mut [T]) {
    let n = x.len();
    for i in (0..n).rev() {
        let mut s = c[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
}

/// LDLᵀ factorization without pivoting, intended for symmetric
/// quasi-definite matrices (regularized KKT systems).
#[derive(Debug, Clone)]
pub struct Ldlt<T> {
    l: Mat<T>,
    d: Vec<T>,
}

impl<T: Real> Ldlt<T> {
    /// Returns `None` when a pivot vanishes or is not finite.
    pub fn new(a: &Mat<T>) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut l = Mat::identity(n);
        let mut d = vec![T::zero(); n];
        // work holds L·D for the current row
        let mut work = vec![T::zero(); n];
        for j in 0..n {
            let mut dj = a[(j, j)];
            for k in 0..j {
                work[k] = l[(j, k)] * d[k];
                dj -= l[(j, k)] * work[k];
            }
            if dj == T::zero() || !dj.is_finite() {
                return None;
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                let li = l.row(i);
                for k in 0..j {
                    s -= li[k] * work[k];
                }
                l[(i, j)] = s / dj;
            }
        }
        Some(Ldlt { l, d })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let li = self.l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= li[k] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s;
        }
        x
    }

    /// Pivot signs: (positive, negative).
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&x| x > T::zero()).count();
        (pos, self.d.len() - pos)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn sym_eigen<T: Real>(a: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m[(i, i)] * m[(i, i)];
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = v.select_cols(&order);
    (vals, vecs)
}

/// Solves the square system `a·x = b` by pivoted QR; `None` if singular.
pub fn solve_square<T: Real>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let qr = PivotedQr::new(a, T::epsilon() * T::lit(64.0));
    if qr.rank() < a.cols() {
        return None;
    }
    Some(qr.solve(b))
}

/// Finds a maximal set of linearly independent rows of `[a | b]` judged on
/// `a` alone. Returns the kept row indices, or the index of a row that is a
/// combination of earlier rows in `a` but not in `b` (inconsistent system).
pub fn independent_rows<T: Real>(a: &Mat<T>, b: &[T], tol: T) -> Result<Vec<usize>, usize> {
    let (m, n) = a.shape();
    let mut basis: Vec<(Vec<T>, T)> = Vec::new();
    let mut kept = Vec::new();
    let scale = a.max_abs().max(T::one());
    let bscale = norm_inf(b).max(T::one());
    for i in 0..m {
        let mut r = a.row(i).to_vec();
        let mut rb = b[i];
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for (q, qb) in &basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
                rb -= c * *qb;
            }
        }
        let nr = norm2(&r);
        if nr <= tol * scale * T::from_usize(n.max(1)) {
            if rb.abs() > tol.sqrt() * bscale {
                return Err(i);
            }
            continue;
        }
        let inv = T::one() / nr;
        let q: Vec<T> = r.iter().map(|&x| x * inv).collect();
        basis.push((q, rb * inv));
        kept.push(i);
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qr_solves_overdetermined_system() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let b = [1.0, 2.0, 4.0];
        let x = PivotedQr::new(&a, 1e-12).solve(&b);
        // normal equations: [3 3; 3 5] x = [7 10]
        assert_abs_diff_eq!(x[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn qr_minimum_norm_for_rank_deficient() {
        // duplicate column: min-norm splits evenly
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let b = [1.0, 2.0];
        let qr = PivotedQr::new(&a, 1e-12);
        assert_eq!(qr.rank(), 1);
        let x = qr.solve(&b);
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ldlt_handles_quasi_definite() {
        let k = Mat::from_rows(&[vec![4.0, 1.0, 1.0], vec![1.0, 3.0, 0.0], vec![1.0, 0.0, -1.0]]);
        let f = Ldlt::new(&k).unwrap();
        assert_eq!(f.inertia(), (2, 1));
        let x = f.solve(&[1.0, 2.0, 3.0]);
        let r = k.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(*ri, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = Mat::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(vals[0], 2.0 - s2, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 2.0 + s2, epsilon = 1e-12);
        let recon = vecs.matmul(&Mat::diag(&vals)).matmul(&vecs.transpose());
        assert!(recon.sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn independent_rows_detects_redundancy_and_conflict() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 1.0]]);
        assert_eq!(independent_rows(&a, &[1.0, 2.0, 0.0], 1e-12), Ok(vec![0, 2]));
        assert_eq!(independent_rows(&a, &[1.0, 3.0, 0.0], 1e-12), Err(1));
    }

    #[test]
    fn works_in_single_precision() {
        let a: Mat<f32> = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let x = solve_square(&a, &[9.0, 8.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-5 && (x[1] - 3.0).abs() < 1e-5);
    }
}
