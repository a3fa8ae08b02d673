//! Dense convex QP: `min ½xᵀHx + gᵀx  s.t.  A x = b,  C x ≤ d,  x ≥ lb`.
//!
//! Mehrotra predictor–corrector interior point on the regularized reduced KKT
//! system, followed by an active-set polish that solves the equality-
//! constrained subproblem on the identified active set exactly. Infeasibility
//! is certified by an elastic phase-1 LP.

use crate::linalg::{self, independent_rows, norm_inf, Ldlt, Mat, PivotedQr};
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct QpProblem<T> {
    /// Symmetric positive semidefinite, n × n.
    pub h: Mat<T>,
    pub g: Vec<T>,
    pub a_eq: Mat<T>,
    pub b_eq: Vec<T>,
    pub a_in: Mat<T>,
    pub b_in: Vec<T>,
    /// Lower bounds; `-∞` leaves a variable free.
    pub lb: Vec<T>,
}

impl<T: Real> QpProblem<T> {
    /// Unconstrained problem in `n` variables.
    pub fn new(h: Mat<T>, g: Vec<T>) -> Self {
        let n = g.len();
        QpProblem {
            h,
            g,
            a_eq: Mat::zeros(0, n),
            b_eq: Vec::new(),
            a_in: Mat::zeros(0, n),
            b_in: Vec::new(),
            lb: vec![T::neg_infinity(); n],
        }
    }

    pub fn with_eq(mut self, a: Mat<T>, b: Vec<T>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_ineq(mut self, c: Mat<T>, d: Vec<T>) -> Self {
        self.a_in = c;
        self.b_in = d;
        self
    }

    pub fn with_lower_bounds(mut self, lb: Vec<T>) -> Self {
        self.lb = lb;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let hx = self.h.mul_vec(x);
        T::half() * linalg::dot(x, &hx) + linalg::dot(&self.g, x)
    }

    pub fn check(&self) -> Result<(), QpError> {
        let n = self.dim();
        let ok = self.h.shape() == (n, n)
            && self.a_eq.cols() == n
            && self.a_eq.rows() == self.b_eq.len()
            && self.a_in.cols() == n
            && self.a_in.rows() == self.b_in.len()
            && self.lb.len() == n;
        if !ok {
            return Err(QpError::Dimension);
        }
        let scale = self.h.max_abs().max(T::one());
        if !self.h.is_symmetric(T::lit(1e-9) * scale) {
            return Err(QpError::NotConvex("Hessian is not symmetric".into()));
        }
        Ok(())
    }

    /// Inequality rows `G x ≤ h` with bounds folded in as `−x_i ≤ −lb_i`.
    fn stacked_inequalities(&self) -> (Mat<T>, Vec<T>, Vec<usize>) {
        let n = self.dim();
        let bounded: Vec<usize> = (0..n).filter(|&i| self.lb[i].is_finite()).collect();
        let q = self.a_in.rows() + bounded.len();
        let mut g = Mat::zeros(q, n);
        let mut h = Vec::with_capacity(q);
        for i in 0..self.a_in.rows() {
            g.row_mut(i).copy_from_slice(self.a_in.row(i));
            h.push(self.b_in[i]);
        }
        for (k, &i) in bounded.iter().enumerate() {
            g[(self.a_in.rows() + k, i)] = -T::one();
            h.push(-self.lb[i]);
        }
        (g, h, bounded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals<T> {
    /// ‖Hx + g + Aᵀy + Cᵀz − z_lb‖∞
    pub stationarity: T,
    /// ‖Ax − b‖∞
    pub primal_eq: T,
    /// max violation of `Cx ≤ d` and `x ≥ lb`
    pub primal_in: T,
    /// max |z_i · slack_i|
    pub complementarity: T,
    /// most negative inequality multiplier, as a positive number
    pub dual_in: T,
}

impl<T: Real> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity.max(self.primal_eq).max(self.primal_in).max(self.complementarity).max(self.dual_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// Iteration limit reached; `x` is the best iterate.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    /// Multipliers of `A x = b` (zero for rows dropped as redundant).
    pub y: Vec<T>,
    /// Multipliers of `C x ≤ d`, nonnegative.
    pub z_in: Vec<T>,
    /// Multipliers of `x ≥ lb`, nonnegative (zero for free variables).
    pub z_lb: Vec<T>,
    pub objective: T,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt: KktResiduals<T>,
    pub polished: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QpError {
    #[error("inconsistent dimensions")]
    Dimension,
    #[error("problem is not convex: {0}")]
    NotConvex(String),
    #[error("infeasible (minimal constraint violation {violation:e})")]
    Infeasible { violation: f64 },
    #[error("interior point method did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings<T> {
    pub tol: T,
    pub max_iter: usize,
    pub polish: bool,
}

impl<T: Real> QpSettings<T> {
    pub fn new(tol: T) -> Self {
        QpSettings { tol, max_iter: 100, polish: true }
    }
}

/// Solves the QP to KKT residuals at `tol` (relative to the data scale).
pub fn solve_qp<T: Real>(p: &QpProblem<T>, tol: T) -> Result<QpSolution<T>, QpError> {
    solve_qp_with(p, &QpSettings::new(tol))
}

pub fn solve_qp_with<T: Real>(p: &QpProblem<T>, s: &QpSettings<T>) -> Result<QpSolution<T>, QpError> {
    p.check()?;
    // drop redundant equality rows; a conflicting row certifies infeasibility
    let row_tol = T::epsilon() * T::lit(1e3);
    let kept = match independent_rows(&p.a_eq, &p.b_eq, row_tol) {
        Ok(k) => k,
        Err(_) => {
            let v = feasibility_violation(p);
            return Err(QpError::Infeasible { violation: v.as_f64() });
        }
    };
    let a = p.a_eq.select_rows(&kept);
    let b: Vec<T> = kept.iter().map(|&i| p.b_eq[i]).collect();
    let (gm, hv, bounded) = p.stacked_inequalities();

    let ipm = interior_point(&p.h, &p.g, &a, &b, &gm, &hv, s);
    let (x, y_red, z, iters, converged) = match ipm {
        Some(r) => r,
        None => {
            let v = feasibility_violation(p);
            if v > s.tol.sqrt() * scale_of(&p.b_eq, &p.b_in) {
                return Err(QpError::Infeasible { violation: v.as_f64() });
            }
            return Err(QpError::NotConverged);
        }
    };
    let mut y = vec![T::zero(); p.a_eq.rows()];
    for (k, &i) in kept.iter().enumerate() {
        y[i] = y_red[k];
    }
    let mi = p.a_in.rows();
    let mut sol = assemble(p, x, y, &z, mi, &bounded, iters, converged);

    if s.polish && gm.rows() > 0 {
        if let Some(mut pol) = polish(p, &a, &kept, &gm, &hv, &z, &bounded, &sol) {
            if pol.kkt.max() > s.tol * scale_of_problem(p) {
                pol.status = QpStatus::Inaccurate;
            }
            if pol.kkt.max() <= sol.kkt.max() && (pol.status == QpStatus::Optimal || sol.status == QpStatus::Inaccurate) {
                sol = pol;
            }
        }
    }
    if sol.status == QpStatus::Inaccurate && sol.kkt.max() <= s.tol * scale_of_problem(p) {
        sol.status = QpStatus::Optimal;
    }
    if sol.status == QpStatus::Inaccurate {
        let v = feasibility_violation(p);
        if v > s.tol.sqrt() * scale_of(&p.b_eq, &p.b_in) {
            return Err(QpError::Infeasible { violation: v.as_f64() });
        }
    }
    Ok(sol)
}

fn scale_of<T: Real>(a: &[T], b: &[T]) -> T {
    T::one().max(norm_inf(a)).max(norm_inf(b))
}

fn scale_of_problem<T: Real>(p: &QpProblem<T>) -> T {
    T::one()
        .max(norm_inf(&p.g))
        .max(norm_inf(&p.b_eq))
        .max(norm_inf(&p.b_in))
        .max(p.h.max_abs())
        .max(p.a_eq.max_abs())
        .max(p.a_in.max_abs())
}

#[allow(clippy::too_many_arguments)]
fn assemble<T: Real>(
    p: &QpProblem<T>,
    x: Vec<T>,
    y: Vec<T>,
    z: &[T],
    mi: usize,
    bounded: &[usize],
    iterations: usize,
    converged: bool,
) -> QpSolution<T> {
    let n = p.dim();
    let z_in: Vec<T> = z[..mi].to_vec();
    let mut z_lb = vec![T::zero(); n];
    for (k, &i) in bounded.iter().enumerate() {
        z_lb[i] = z[mi + k];
    }
    let kkt = residuals(p, &x, &y, &z_in, &z_lb);
    QpSolution {
        objective: p.objective(&x),
        x,
        y,
        z_in,
        z_lb,
        status: if converged { QpStatus::Optimal } else { QpStatus::Inaccurate },
        iterations,
        kkt,
        polished: false,
    }
}

/// Absolute KKT residuals of a candidate primal–dual point.
pub fn residuals<T: Real>(p: &QpProblem<T>, x: &[T], y: &[T], z_in: &[T], z_lb: &[T]) -> KktResiduals<T> {
    let mut r = p.h.mul_vec(x);
    for (ri, gi) in r.iter_mut().zip(&p.g) {
        *ri += *gi;
    }
    let aty = p.a_eq.tr_mul_vec(y);
    let ctz = p.a_in.tr_mul_vec(z_in);
    for i in 0..r.len() {
        r[i] += aty[i] + ctz[i] - z_lb[i];
    }
    let ax = p.a_eq.mul_vec(x);
    let primal_eq = ax.iter().zip(&p.b_eq).fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()));
    let cx = p.a_in.mul_vec(x);
    let mut primal_in = T::zero();
    let mut comp = T::zero();
    let mut dual_in = T::zero();
    for i in 0..cx.len() {
        let slack = p.b_in[i] - cx[i];
        primal_in = primal_in.max(-slack);
        comp = comp.max((z_in[i] * slack).abs());
        dual_in = dual_in.max(-z_in[i]);
    }
    for i in 0..x.len() {
        if p.lb[i].is_finite() {
            let slack = x[i] - p.lb[i];
            primal_in = primal_in.max(-slack);
            comp = comp.max((z_lb[i] * slack).abs());
            dual_in = dual_in.max(-z_lb[i]);
        }
    }
    KktResiduals { stationarity: norm_inf(&r), primal_eq, primal_in, complementarity: comp, dual_in }
}

/// Solves `[K + δI, Aᵀ; A, −δI] [u; v] = [r1; r2]` against the unregularized
/// matrix with iterative refinement.
struct ReducedKkt<T> {
    k: Mat<T>,
    a: Mat<T>,
    ldl: Ldlt<T>,
}

impl<T: Real> ReducedKkt<T> {
    fn new(k: Mat<T>, a: &Mat<T>, delta: T) -> Option<Self> {
        let n = k.rows();
        let p = a.rows();
        let mut m = Mat::zeros(n + p, n + p);
        m.set_block(0, 0, &k);
        m.set_block(n, 0, a);
        m.set_block(0, n, &a.transpose());
        for i in 0..n {
            m[(i, i)] += delta;
        }
        for i in 0..p {
            m[(n + i, n + i)] = -delta;
        }
        let ldl = Ldlt::new(&m)?;
        Some(ReducedKkt { k, a: a.clone(), ldl })
    }

    fn apply(&self, u: &[T]) -> Vec<T> {
        let n = self.k.rows();
        let (x, y) = u.split_at(n);
        let mut top = self.k.mul_vec(x);
        let aty = self.a.tr_mul_vec(y);
        for i in 0..n {
            top[i] += aty[i];
        }
        top.extend(self.a.mul_vec(x));
        top
    }

    fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut sol = self.ldl.solve(rhs);
        for _ in 0..3 {
            let r = linalg::sub(rhs, &self.apply(&sol));
            if norm_inf(&r) <= T::epsilon() * norm_inf(rhs).max(T::one()) {
                break;
            }
            let c = self.ldl.solve(&r);
            for (s, ci) in sol.iter_mut().zip(c) {
                *s += ci;
            }
        }
        sol
    }
}

type IpmOut<T> = (Vec<T>, Vec<T>, Vec<T>, usize, bool);

/// Mehrotra predictor–corrector on `Gx + s = h, s ≥ 0`. Returns `None` when
/// the iteration breaks down.
fn interior_point<T: Real>(
    hm: &Mat<T>,
    g: &[T],
    a: &Mat<T>,
    b: &[T],
    gm: &Mat<T>,
    hv: &[T],
    set: &QpSettings<T>,
) -> Option<IpmOut<T>> {
    let n = g.len();
    let p = a.rows();
    let q = gm.rows();
    let delta = T::epsilon().sqrt() * T::lit(1e-2);
    let scale_d = T::one().max(norm_inf(g)).max(hm.max_abs());
    let scale_p = T::one().max(norm_inf(b)).max(norm_inf(hv));
    let tol = set.tol;

    if q == 0 {
        let kkt = ReducedKkt::new(hm.clone(), a, delta)?;
        let mut rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        rhs.extend_from_slice(b);
        let sol = kkt.solve(&rhs);
        let (x, y) = sol.split_at(n);
        return Some((x.to_vec(), y.to_vec(), Vec::new(), 1, true));
    }

    // starting point
    let gtg = gm.tr_matmul(gm);
    let kkt0 = ReducedKkt::new(hm.add(&gtg), a, delta)?;
    let mut rhs: Vec<T> = gm.tr_mul_vec(hv).iter().zip(g).map(|(&u, &v)| u - v).collect();
    rhs.extend_from_slice(b);
    let sol0 = kkt0.solve(&rhs);
    let mut x = sol0[..n].to_vec();
    let mut y = sol0[n..].to_vec();
    let gx = gm.mul_vec(&x);
    let mut sl: Vec<T> = (0..q).map(|i| hv[i] - gx[i]).collect();
    let shift = sl.iter().fold(T::zero(), |m, &v| m.max(-v));
    for v in sl.iter_mut() {
        *v = (*v + shift).max(T::one());
    }
    let mut z = vec![T::one(); q];

    let mut best: Option<(T, IpmOut<T>)> = None;
    for it in 1..=set.max_iter {
        // residuals
        let mut rd = hm.mul_vec(&x);
        let aty = a.tr_mul_vec(&y);
        let gtz = gm.tr_mul_vec(&z);
        for i in 0..n {
            rd[i] += g[i] + aty[i] + gtz[i];
        }
        let ax = a.mul_vec(&x);
        let rp: Vec<T> = (0..p).map(|i| ax[i] - b[i]).collect();
        let gx = gm.mul_vec(&x);
        let ri: Vec<T> = (0..q).map(|i| gx[i] + sl[i] - hv[i]).collect();
        let mu = linalg::dot(&sl, &z) / T::from_usize(q);
        if !mu.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return best.map(|(_, r)| r);
        }
        let err_d = norm_inf(&rd) / scale_d;
        let err_p = norm_inf(&rp).max(norm_inf(&ri)) / scale_p;
        let err = err_d.max(err_p).max(mu);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, (x.clone(), y.clone(), z.clone(), it, false)));
        }
        if err_d <= tol * T::lit(0.1) && err_p <= tol * T::lit(0.1) && mu <= tol * T::lit(0.1) {
            return Some((x, y, z, it, true));
        }

        let w: Vec<T> = (0..q).map(|i| z[i] / sl[i]).collect();
        let mut k = hm.clone();
        for r in 0..q {
            let row = gm.row(r);
            let wr = w[r];
            for i in 0..n {
                let gi = row[i];
                if gi == T::zero() {
                    continue;
                }
                let f = wr * gi;
                let krow = k.row_mut(i);
                for (kj, &gj) in krow.iter_mut().zip(row) {
                    *kj += f * gj;
                }
            }
        }
        let Some(kkt) = ReducedKkt::new(k, a, delta) else {
            return best.map(|(_, (x, y, z, it, _))| (x, y, z, it, false));
        };

        let solve_dir = |rc: &[T]| -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
            // dz = W(G dx + r_i) − r_c/s
            let t: Vec<T> = (0..q).map(|i| w[i] * ri[i] - rc[i] / sl[i]).collect();
            let gtt = gm.tr_mul_vec(&t);
            let mut rhs: Vec<T> = (0..n).map(|i| -rd[i] - gtt[i]).collect();
            rhs.extend(rp.iter().map(|&v| -v));
            let sol = kkt.solve(&rhs);
            let dx = sol[..n].to_vec();
            let dy = sol[n..].to_vec();
            let gdx = gm.mul_vec(&dx);
            let dz: Vec<T> = (0..q).map(|i| w[i] * (gdx[i] + ri[i]) - rc[i] / sl[i]).collect();
            let ds: Vec<T> = (0..q).map(|i| -ri[i] - gdx[i]).collect();
            (dx, dy, dz, ds)
        };
        let max_step = |v: &[T], dv: &[T]| -> T {
            let mut alpha = T::one();
            for i in 0..v.len() {
                if dv[i] < T::zero() {
                    alpha = alpha.min(-v[i] / dv[i]);
                }
            }
            alpha
        };

        let rc_aff: Vec<T> = (0..q).map(|i| sl[i] * z[i]).collect();
        let (_, _, dz_a, ds_a) = solve_dir(&rc_aff);
        let alpha_a = max_step(&sl, &ds_a).min(max_step(&z, &dz_a));
        let mut mu_aff = T::zero();
        for i in 0..q {
            mu_aff += (sl[i] + alpha_a * ds_a[i]) * (z[i] + alpha_a * dz_a[i]);
        }
        mu_aff /= T::from_usize(q);
        let sigma = (mu_aff / mu).powi(3).min(T::one());
        let rc: Vec<T> = (0..q).map(|i| sl[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu).collect();
        let (dx, dy, dz, ds) = solve_dir(&rc);
        let alpha = (T::lit(0.99) * max_step(&sl, &ds).min(max_step(&z, &dz))).min(T::one());
        if !(alpha > T::lit(1e-14)) {
            return best.map(|(_, (x, y, z, it, _))| (x, y, z, it, false));
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        for i in 0..q {
            z[i] += alpha * dz[i];
            sl[i] += alpha * ds[i];
            // keep strictly interior
            let floor = T::epsilon() * T::epsilon();
            sl[i] = sl[i].max(floor);
            z[i] = z[i].max(floor);
        }
    }
    best.map(|(_, (x, y, z, it, _))| (x, y, z, it, false))
}

/// Solves the equality-constrained QP on the active set read off the
/// interior-point multipliers and checks the result is still KKT.
#[allow(clippy::too_many_arguments)]
fn polish<T: Real>(
    p: &QpProblem<T>,
    a: &Mat<T>,
    kept: &[usize],
    gm: &Mat<T>,
    hv: &[T],
    z: &[T],
    bounded: &[usize],
    current: &QpSolution<T>,
) -> Option<QpSolution<T>> {
    let n = p.dim();
    let gx = gm.mul_vec(&current.x);
    let active: Vec<usize> = (0..gm.rows()).filter(|&i| z[i] > hv[i] - gx[i]).collect();
    let ga = gm.select_rows(&active);
    let pe = a.rows();
    let na = active.len();
    let dim = n + pe + na;
    let mut kkt = Mat::zeros(dim, dim);
    kkt.set_block(0, 0, &p.h);
    kkt.set_block(0, n, &a.transpose());
    kkt.set_block(0, n + pe, &ga.transpose());
    kkt.set_block(n, 0, a);
    kkt.set_block(n + pe, 0, &ga);
    let mut rhs: Vec<T> = p.g.iter().map(|&v| -v).collect();
    for &i in kept {
        rhs.push(p.b_eq[i]);
    }
    for &i in &active {
        rhs.push(hv[i]);
    }
    let qr = PivotedQr::new(&kkt, T::epsilon() * T::lit(1e3));
    let mut sol = qr.solve(&rhs);
    // one refinement step
    let r = linalg::sub(&rhs, &kkt.mul_vec(&sol));
    let c = qr.solve(&r);
    for (s, ci) in sol.iter_mut().zip(c) {
        *s += ci;
    }
    let x = sol[..n].to_vec();
    let y_red = &sol[n..n + pe];
    let mut zfull = vec![T::zero(); gm.rows()];
    for (k, &i) in active.iter().enumerate() {
        zfull[i] = sol[n + pe + k].max(T::zero());
    }
    let mut y = vec![T::zero(); p.a_eq.rows()];
    for (k, &i) in kept.iter().enumerate() {
        y[i] = y_red[k];
    }
    let mut out = assemble(p, x, y, &zfull, p.a_in.rows(), bounded, current.iterations, true);
    out.polished = true;
    Some(out)
}

/// Minimal total constraint violation `min Σ|Ax−b| + Σ(Cx−d)₊ + Σ(lb−x)₊`,
/// computed by an elastic phase-1 LP. Zero (up to tolerance) iff feasible.
pub fn feasibility_violation<T: Real>(p: &QpProblem<T>) -> T {
    let n = p.dim();
    let me = p.a_eq.rows();
    let mi = p.a_in.rows();
    let bounded: Vec<usize> = (0..n).filter(|&i| p.lb[i].is_finite()).collect();
    let nb = bounded.len();
    // variables: x (n), u (me), v (me), w (mi), wb (nb)
    let nv = n + 2 * me + mi + nb;
    let mut g = vec![T::zero(); nv];
    for gi in g.iter_mut().skip(n) {
        *gi = T::one();
    }
    let mut a = Mat::zeros(me, nv);
    for i in 0..me {
        a.row_mut(i)[..n].copy_from_slice(p.a_eq.row(i));
        a[(i, n + i)] = T::one();
        a[(i, n + me + i)] = -T::one();
    }
    let mut c = Mat::zeros(mi + nb, nv);
    let mut d = Vec::with_capacity(mi + nb);
    for i in 0..mi {
        c.row_mut(i)[..n].copy_from_slice(p.a_in.row(i));
        c[(i, n + 2 * me + i)] = -T::one();
        d.push(p.b_in[i]);
    }
    for (k, &i) in bounded.iter().enumerate() {
        c[(mi + k, i)] = -T::one();
        c[(mi + k, n + 2 * me + mi + k)] = -T::one();
        d.push(-p.lb[i]);
    }
    let mut lb = vec![T::neg_infinity(); nv];
    for l in lb.iter_mut().skip(n) {
        *l = T::zero();
    }
    // tiny proximal term keeps the free x block well posed
    let mut h = Mat::zeros(nv, nv);
    for i in 0..n {
        h[(i, i)] = T::epsilon().sqrt() * T::lit(1e-4);
    }
    let lp = QpProblem { h, g, a_eq: a, b_eq: p.b_eq.clone(), a_in: c, b_in: d, lb };
    let (gm, hv, _) = lp.stacked_inequalities();
    let set = QpSettings { tol: T::epsilon().sqrt() * T::lit(1e-3), max_iter: 200, polish: false };
    match interior_point(&lp.h, &lp.g, &lp.a_eq, &lp.b_eq, &gm, &hv, &set) {
        Some((x, ..)) => {
            // evaluate the true violation at the phase-1 x
            let xs = &x[..n];
            let mut v = T::zero();
            for (i, r) in p.a_eq.mul_vec(xs).iter().zip(&p.b_eq).map(|(a, b)| *a - *b).enumerate() {
                let _ = i;
                v += r.abs();
            }
            for (cx, d) in p.a_in.mul_vec(xs).iter().zip(&p.b_in) {
                v += (*cx - *d).max(T::zero());
            }
            for &i in &bounded {
                v += (p.lb[i] - xs[i]).max(T::zero());
            }
            v
        }
        None => T::infinity(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn min_norm_on_simplex() {
        let p = QpProblem::new(Mat::identity(4).scaled(2.0), vec![0.0; 4])
            .with_eq(Mat::from_rows(&[vec![1.0; 4]]), vec![1.0])
            .with_lower_bounds(vec![0.0; 4]);
        let s = solve_qp(&p, 1e-10).unwrap();
        for xi in &s.x {
            assert_abs_diff_eq!(*xi, 0.25, epsilon = 1e-10);
        }
        assert!(s.kkt.max() < 1e-10);
    }

    #[test]
    fn active_upper_bound() {
        // (x−2)² = x² − 4x + 4
        let p = QpProblem::new(Mat::from_rows(&[vec![2.0]]), vec![-4.0])
            .with_ineq(Mat::from_rows(&[vec![1.0]]), vec![1.0]);
        let s = solve_qp(&p, 1e-10).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z_in[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn conflicting_bounds_are_infeasible() {
        let p = QpProblem::new(Mat::identity(2), vec![0.0; 2])
            .with_eq(Mat::from_rows(&[vec![1.0, 1.0]]), vec![-1.0])
            .with_lower_bounds(vec![0.0; 2]);
        let r = solve_qp(&p, 1e-10);
        assert!(matches!(r, Err(QpError::Infeasible { .. })), "{r:?}");
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let p = QpProblem::new(Mat::identity(2), vec![0.0; 2])
            .with_eq(Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]), vec![1.0, 3.0]);
        assert!(matches!(solve_qp(&p, 1e-10), Err(QpError::Infeasible { .. })));
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let p = QpProblem::new(Mat::identity(2).scaled(2.0), vec![0.0; 2])
            .with_eq(Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]), vec![1.0, 2.0]);
        let s = solve_qp(&p, 1e-10).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-12);
        assert!(s.kkt.max() < 1e-10);
    }

    #[test]
    fn singular_hessian_lp_like() {
        // min x1 s.t. x1 + x2 = 1, x ≥ 0 → x = (0, 1)
        let p = QpProblem::new(Mat::zeros(2, 2), vec![1.0, 0.0])
            .with_eq(Mat::from_rows(&[vec![1.0, 1.0]]), vec![1.0])
            .with_lower_bounds(vec![0.0; 2]);
        let s = solve_qp(&p, 1e-10).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn single_precision_instance() {
        let p: QpProblem<f32> = QpProblem::new(Mat::identity(3).scaled(2.0), vec![0.0; 3])
            .with_eq(Mat::from_rows(&[vec![1.0; 3]]), vec![1.0])
            .with_lower_bounds(vec![0.0; 3]);
        let s = solve_qp(&p, 1e-5).unwrap();
        for xi in &s.x {
            assert!((xi - 1.0 / 3.0).abs() < 1e-4);
        }
    }
}
