//! Pre-contact equilibrium: the posture a hand settles into for given motor
//! angles before touching anything.
//!
//! Springs balance tendon tension at every free DoF, taut tendons satisfy
//! `s(θ) = M θ_mot`, slack tendons carry no tension and clamped DoFs sit at a
//! limit with a reaction pushing into it. The equilibrium minimizes spring
//! energy subject to `s(θ) ≥ M θ_mot` and the joint limits, with tensions as
//! the multipliers. A sequential QP on that problem finds the active set; a
//! Newton solve on the active set then drives the residuals to round-off.
//!
//! Tendons whose DoFs carry no spring are treated as rigid two-way
//! transmissions: their travel equation always holds and the tension may take
//! either sign.

use crate::designs;
use crate::error::{Error, Result};
use crate::kinematics;
use crate::linalg::{norm_inf, sym_eigen, Mat, PivotedQr};
use crate::model::{HandModel, JointKind, ParamVector, SpringSpec};
use crate::solvers::{solve_qp, QpError, QpProblem, QpStatus};
use serde::{Deserialize, Serialize};

const LIMIT_TOL: f64 = 1e-9;
const MAX_ITER: usize = 200;
const TRUST: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitState {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreContactPose {
    pub theta: Vec<f64>,
    /// N per tendon; zero for slack tendons.
    pub tension: Vec<f64>,
    pub limits: Vec<LimitState>,
    pub slack: Vec<bool>,
    pub iterations: usize,
    /// Largest balance or travel residual on the active set.
    pub residual: f64,
    pub converged: bool,
}

/// Reusable solver for one hand and parameter set.
pub struct PreContactSolver<'a> {
    hand: &'a HandModel,
    params: &'a ParamVector,
    motors: Mat<f64>,
    rigid: Vec<bool>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pose_dependent: bool,
    /// Global DoFs whose spring torque is nonlinear in θ.
    nonlinear_dofs: Vec<usize>,
    torsional: Vec<Option<f64>>,
}

impl<'a> PreContactSolver<'a> {
    pub fn new(hand: &'a HandModel, params: &'a ParamVector, radii: &[f64]) -> Result<Self> {
        let motors = designs::motor_connection(hand, radii)?;
        let m = hand.dof_count();
        let specs = hand.dof_specs();
        let mut sprung = vec![false; m];
        let mut torsional = vec![None; m];
        let mut nonlinear_dofs = Vec::new();
        for (j, joint) in hand.joints.iter().enumerate() {
            let d0 = hand.dof_index(j, 0);
            match &joint.spring {
                SpringSpec::None => {}
                SpringSpec::Torsional { stiffness, .. } => {
                    sprung[d0] = true;
                    torsional[d0] = Some(hand.params.value(params, stiffness)?);
                }
                SpringSpec::LinearOnTendon { .. } => {
                    for k in 0..joint.dofs.len() {
                        sprung[d0 + k] = true;
                        nonlinear_dofs.push(d0 + k);
                    }
                }
            }
            if matches!(joint.kind, JointKind::Universal { .. }) {
                for k in 0..joint.dofs.len() {
                    if !nonlinear_dofs.contains(&(d0 + k)) {
                        nonlinear_dofs.push(d0 + k);
                    }
                }
            }
        }
        let rigid = (0..hand.tendons.len()).map(|t| hand.tendon_dofs(t).iter().all(|&d| !sprung[d])).collect();
        Ok(PreContactSolver {
            hand,
            params,
            motors,
            rigid,
            lower: specs.iter().map(|d| d.lower).collect(),
            upper: specs.iter().map(|d| d.upper).collect(),
            pose_dependent: designs::is_pose_dependent(hand),
            nonlinear_dofs,
            torsional,
        })
    }

    pub fn is_rigid(&self, tendon: usize) -> bool {
        self.rigid[tendon]
    }

    fn a(&self, theta: &[f64]) -> Result<Mat<f64>> {
        designs::actuation_matrix(self.hand, self.params, theta)
    }

    fn tau(&self, theta: &[f64]) -> Result<Vec<f64>> {
        designs::spring_torques(self.hand, self.params, theta)
    }

    fn travel(&self, theta: &[f64]) -> Result<Vec<f64>> {
        kinematics::tendon_excursion(self.hand, self.params, theta)
    }

    /// `∂τ_spr/∂θ`: analytic on torsional DoFs, central differences elsewhere.
    fn dtau(&self, theta: &[f64]) -> Result<Mat<f64>> {
        let m = theta.len();
        let mut d = Mat::zeros(m, m);
        for (i, k) in self.torsional.iter().enumerate() {
            if let Some(k) = k {
                d[(i, i)] = *k;
            }
        }
        let h = 1e-6;
        for &j in &self.nonlinear_dofs {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[j] += h;
            tm[j] -= h;
            let (fp, fm) = (self.tau(&tp)?, self.tau(&tm)?);
            for &i in &self.nonlinear_dofs {
                d[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(d)
    }

    /// `∂(A(θ) t)/∂θ`, nonzero only on universal-joint DoFs.
    fn dat(&self, theta: &[f64], t: &[f64]) -> Result<Mat<f64>> {
        let m = theta.len();
        let mut d = Mat::zeros(m, m);
        if !self.pose_dependent {
            return Ok(d);
        }
        let h = 1e-6;
        for &j in &self.nonlinear_dofs {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[j] += h;
            tm[j] -= h;
            let fp = self.a(&tp)?.mul_vec(t);
            let fm = self.a(&tm)?.mul_vec(t);
            for i in 0..m {
                d[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(d)
    }

    /// Equilibrium at motor angles `theta_mot`, optionally warm-started from a
    /// nearby solution. Hands with nonlinear joints fall back to continuation
    /// from the rest pose when a direct solve does not converge.
    pub fn solve(&self, theta_mot: &[f64], warm: Option<&PreContactPose>) -> Result<PreContactPose> {
        let first = self.solve_once(theta_mot, warm);
        let nonlinear = self.pose_dependent || !self.nonlinear_dofs.is_empty();
        if !nonlinear || warm.is_some() || matches!(&first, Ok(p) if p.converged) {
            return first;
        }
        let mut steps = 4;
        while steps <= 16 {
            let mut cur: Option<PreContactPose> = None;
            for i in 1..=steps {
                let tm: Vec<f64> = theta_mot.iter().map(|v| v * i as f64 / steps as f64).collect();
                match self.solve_once(&tm, cur.as_ref()) {
                    Ok(p) if p.converged => cur = Some(p),
                    _ => {
                        cur = None;
                        break;
                    }
                }
            }
            if let Some(mut p) = cur {
                p.iterations += first.as_ref().map_or(0, |f| f.iterations);
                return Ok(p);
            }
            steps *= 4;
        }
        first
    }

    fn solve_once(&self, theta_mot: &[f64], warm: Option<&PreContactPose>) -> Result<PreContactPose> {
        let m = self.hand.dof_count();
        let nt = self.hand.tendons.len();
        if theta_mot.len() != self.motors.cols() {
            return Err(Error::invalid(
                "theta_mot",
                format!("dimension mismatch: {} angles for {} motors", theta_mot.len(), self.motors.cols()),
            ));
        }
        let b = self.motors.mul_vec(theta_mot);
        let mut theta: Vec<f64> = match warm {
            Some(w) if w.theta.len() == m => w.theta.clone(),
            _ => vec![0.0; m],
        };
        for i in 0..m {
            theta[i] = theta[i].clamp(self.lower[i], self.upper[i]);
        }

        // sequential QP for the active set
        let mut iterations = 0;
        let mut tension = vec![0.0; nt];
        let mut lower_mult = vec![0.0; m];
        let mut upper_mult = vec![0.0; m];
        let mut violation = 0.0;
        while iterations < 40 {
            iterations += 1;
            let step = self.sqp_step(&theta, &b)?;
            for i in 0..m {
                theta[i] = (theta[i] + step.delta[i]).clamp(self.lower[i], self.upper[i]);
            }
            tension = step.tension;
            lower_mult = step.lower_mult;
            upper_mult = step.upper_mult;
            violation = step.violation;
            let stationary = norm_inf(&step.delta) <= 1e-11 || (!self.pose_dependent && self.nonlinear_dofs.is_empty());
            if stationary {
                if step.violation > 1e-7 * (1.0 + norm_inf(&b)) {
                    return Err(Error::Numerical("no pre-contact pose: motor travel unreachable within joint limits".into()));
                }
                break;
            }
        }

        let scale = 1.0 + norm_inf(&tension);
        let mut limits = vec![LimitState::Free; m];
        for i in 0..m {
            if theta[i] <= self.lower[i] + LIMIT_TOL && lower_mult[i] > 1e-10 * scale {
                limits[i] = LimitState::Lower;
                theta[i] = self.lower[i];
            } else if theta[i] >= self.upper[i] - LIMIT_TOL && upper_mult[i] > 1e-10 * scale {
                limits[i] = LimitState::Upper;
                theta[i] = self.upper[i];
            }
        }
        let s = self.travel(&theta)?;
        let mut slack: Vec<bool> =
            (0..nt).map(|k| !self.rigid[k] && tension[k] <= 1e-10 * scale && s[k] - b[k] > 1e-9).collect();
        for k in 0..nt {
            if slack[k] {
                tension[k] = 0.0;
            }
        }

        // Newton on the active set, with single-constraint corrections
        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut visited: Vec<(Vec<LimitState>, Vec<bool>)> = Vec::new();
        while iterations < MAX_ITER {
            let (r, it) = self.newton(&mut theta, &mut tension, &limits, &slack, &b, MAX_ITER - iterations)?;
            iterations += it;
            residual = r;
            visited.push((limits.clone(), slack.clone()));
            match self.worst_violation(&theta, &tension, &limits, &slack, &b)? {
                None => {
                    converged = residual <= 1e-8;
                    break;
                }
                Some(change) => {
                    let (mut nl, mut ns) = (limits.clone(), slack.clone());
                    change.apply(&mut nl, &mut ns);
                    if visited.iter().any(|(l, s)| *l == nl && *s == ns) {
                        break;
                    }
                    change.apply(&mut limits, &mut slack);
                    for i in 0..m {
                        match limits[i] {
                            LimitState::Lower => theta[i] = self.lower[i],
                            LimitState::Upper => theta[i] = self.upper[i],
                            LimitState::Free => {}
                        }
                    }
                    for k in 0..nt {
                        if slack[k] {
                            tension[k] = 0.0;
                        }
                    }
                }
            }
        }
        if !converged && violation > 1e-7 * (1.0 + norm_inf(&b)) {
            return Err(Error::Numerical("no pre-contact pose: motor travel unreachable within joint limits".into()));
        }
        Ok(PreContactPose { theta, tension, limits, slack, iterations, residual, converged })
    }

    fn sqp_step(&self, theta: &[f64], b: &[f64]) -> Result<SqpStep> {
        let m = theta.len();
        let nt = b.len();
        let a = self.a(theta)?;
        let tau = self.tau(theta)?;
        let s = self.travel(theta)?;
        let d = self.dtau(theta)?;
        // symmetric PSD part of the energy Hessian
        let sym = Mat::from_fn(m, m, |i, j| 0.5 * (d[(i, j)] + d[(j, i)]));
        let (vals, vecs) = sym_eigen(&sym);

        let rigid: Vec<usize> = (0..nt).filter(|&k| self.rigid[k]).collect();
        let one_way: Vec<usize> = (0..nt).filter(|&k| !self.rigid[k]).collect();
        let trust = if self.pose_dependent || !self.nonlinear_dofs.is_empty() { TRUST } else { f64::INFINITY };
        let rho = 1e4 * (1.0 + norm_inf(&tau) + d.max_abs());
        // variables [Δ; e]; the elastic variant adds travel slacks e ≥ 0 at
        // cost ½ρe² so a step exists when the linearized travel is out of reach
        let build = |elastic: bool| {
            let ne = if elastic { one_way.len() + 2 * rigid.len() } else { 0 };
            let n = m + ne;
            let h = Mat::from_fn(n, n, |i, j| {
                if i < m && j < m {
                    (0..m).map(|k| vecs[(i, k)] * vals[k].max(0.0) * vecs[(j, k)]).sum::<f64>()
                } else if i == j {
                    rho
                } else {
                    0.0
                }
            });
            let mut g = tau.clone();
            g.resize(n, 0.0);
            let mut aeq = Mat::zeros(rigid.len(), n);
            let mut beq = Vec::with_capacity(rigid.len());
            for (r, &k) in rigid.iter().enumerate() {
                for i in 0..m {
                    aeq[(r, i)] = a[(i, k)];
                }
                if elastic {
                    aeq[(r, m + one_way.len() + 2 * r)] = 1.0;
                    aeq[(r, m + one_way.len() + 2 * r + 1)] = -1.0;
                }
                beq.push(b[k] - s[k]);
            }
            // rows: one-way tendons, then upper limits
            let mut ain = Mat::zeros(one_way.len() + m, n);
            let mut bin = Vec::with_capacity(one_way.len() + m);
            for (r, &k) in one_way.iter().enumerate() {
                for i in 0..m {
                    ain[(r, i)] = -a[(i, k)];
                }
                if elastic {
                    ain[(r, m + r)] = -1.0;
                }
                bin.push(s[k] - b[k]);
            }
            for i in 0..m {
                ain[(one_way.len() + i, i)] = 1.0;
                bin.push((self.upper[i] - theta[i]).min(trust));
            }
            let mut lb: Vec<f64> = (0..m).map(|i| (self.lower[i] - theta[i]).max(-trust)).collect();
            lb.resize(n, 0.0);
            QpProblem::new(h, g).with_eq(aeq, beq).with_ineq(ain, bin).with_lower_bounds(lb)
        };
        let step_err = |e: QpError| Error::Numerical(format!("pre-contact step: {e}"));
        let sol = match solve_qp(&build(false), 1e-12) {
            Ok(sol) => sol,
            Err(QpError::Infeasible { .. }) => solve_qp(&build(true), 1e-12).map_err(step_err)?,
            Err(e) => return Err(step_err(e)),
        };
        if sol.status == QpStatus::Inaccurate && sol.kkt.max() > 1e-6 * (1.0 + norm_inf(&tau) + norm_inf(b)) {
            return Err(step_err(QpError::NotConverged));
        }
        let mut tension = vec![0.0; nt];
        for (r, &k) in one_way.iter().enumerate() {
            tension[k] = sol.z_in[r];
        }
        for (r, &k) in rigid.iter().enumerate() {
            tension[k] = -sol.y[r];
        }
        let lower_mult = (0..m)
            .map(|i| if theta[i] + sol.x[i] <= self.lower[i] + LIMIT_TOL { sol.z_lb[i] } else { 0.0 })
            .collect();
        let upper_mult = (0..m)
            .map(|i| if theta[i] + sol.x[i] >= self.upper[i] - LIMIT_TOL { sol.z_in[one_way.len() + i] } else { 0.0 })
            .collect();
        let violation = sol.x[m..].iter().fold(0.0f64, |acc, v| acc.max(*v));
        Ok(SqpStep { delta: sol.x[..m].to_vec(), tension, lower_mult, upper_mult, violation })
    }

    fn residuals(
        &self,
        theta: &[f64],
        t: &[f64],
        free: &[usize],
        taut: &[usize],
        b: &[f64],
    ) -> Result<(Vec<f64>, Mat<f64>)> {
        let a = self.a(theta)?;
        let tau = self.tau(theta)?;
        let s = self.travel(theta)?;
        let at = a.mul_vec(t);
        let mut r = Vec::with_capacity(free.len() + taut.len());
        for &d in free {
            r.push(at[d] - tau[d]);
        }
        for &k in taut {
            r.push(s[k] - b[k]);
        }
        Ok((r, a))
    }

    /// Newton iterations on a fixed active set. Returns the final residual
    /// and the iteration count.
    fn newton(
        &self,
        theta: &mut [f64],
        t: &mut [f64],
        limits: &[LimitState],
        slack: &[bool],
        b: &[f64],
        budget: usize,
    ) -> Result<(f64, usize)> {
        let free: Vec<usize> = (0..theta.len()).filter(|&i| limits[i] == LimitState::Free).collect();
        let taut: Vec<usize> = (0..t.len()).filter(|&k| !slack[k]).collect();
        let nf = free.len();
        let n = nf + taut.len();
        let (mut r, mut a) = self.residuals(theta, t, &free, &taut, b)?;
        let mut rn = norm_inf(&r);
        let mut it = 0;
        while it < budget.min(50) && n > 0 {
            if rn <= 1e-13 * (1.0 + norm_inf(t)) {
                break;
            }
            it += 1;
            let dt = self.dtau(theta)?;
            let dat = self.dat(theta, t)?;
            let mut jac = Mat::zeros(r.len(), n);
            for (row, &d) in free.iter().enumerate() {
                for (col, &j) in free.iter().enumerate() {
                    jac[(row, col)] = dat[(d, j)] - dt[(d, j)];
                }
                for (col, &k) in taut.iter().enumerate() {
                    jac[(row, nf + col)] = a[(d, k)];
                }
            }
            for (row, &k) in taut.iter().enumerate() {
                for (col, &j) in free.iter().enumerate() {
                    jac[(nf + row, col)] = a[(j, k)];
                }
            }
            let qr = PivotedQr::new(&jac, 1e-13 * (1.0 + jac.max_abs()));
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = qr.solve(&neg);
            let mut alpha = 1.0;
            let (th0, t0) = (theta.to_vec(), t.to_vec());
            loop {
                for (c, &j) in free.iter().enumerate() {
                    theta[j] = th0[j] + alpha * step[c];
                }
                for (c, &k) in taut.iter().enumerate() {
                    t[k] = t0[k] + alpha * step[nf + c];
                }
                let (r2, a2) = self.residuals(theta, t, &free, &taut, b)?;
                let rn2 = norm_inf(&r2);
                if rn2 < rn || alpha < 1e-3 {
                    r = r2;
                    a = a2;
                    let stalled = rn2 >= rn;
                    rn = rn2;
                    if stalled {
                        return Ok((rn, it));
                    }
                    break;
                }
                alpha *= 0.5;
            }
        }
        Ok((rn, it))
    }

    fn worst_violation(
        &self,
        theta: &[f64],
        t: &[f64],
        limits: &[LimitState],
        slack: &[bool],
        b: &[f64],
    ) -> Result<Option<Change>> {
        let a = self.a(theta)?;
        let tau = self.tau(theta)?;
        let s = self.travel(theta)?;
        let at = a.mul_vec(t);
        let scale = 1.0 + norm_inf(t);
        let mut best: Option<(f64, Change)> = None;
        let mut consider = |v: f64, c: Change| {
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, c));
            }
        };
        for i in 0..theta.len() {
            match limits[i] {
                LimitState::Free => {
                    if theta[i] < self.lower[i] - LIMIT_TOL {
                        consider(self.lower[i] - theta[i], Change::Clamp(i, LimitState::Lower));
                    } else if theta[i] > self.upper[i] + LIMIT_TOL {
                        consider(theta[i] - self.upper[i], Change::Clamp(i, LimitState::Upper));
                    }
                }
                LimitState::Lower => {
                    let reaction = at[i] - tau[i];
                    if reaction > 1e-9 * scale {
                        consider(reaction / scale, Change::Release(i));
                    }
                }
                LimitState::Upper => {
                    let reaction = at[i] - tau[i];
                    if reaction < -1e-9 * scale {
                        consider(-reaction / scale, Change::Release(i));
                    }
                }
            }
        }
        for k in 0..t.len() {
            if self.rigid[k] {
                continue;
            }
            if slack[k] {
                if s[k] - b[k] < -1e-9 {
                    consider(b[k] - s[k], Change::Tighten(k));
                }
            } else if t[k] < -1e-10 * scale {
                consider(-t[k] / scale, Change::Loosen(k));
            }
        }
        Ok(best.map(|(_, c)| c))
    }
}

struct SqpStep {
    delta: Vec<f64>,
    /// Largest elastic travel slack, mm.
    violation: f64,
    tension: Vec<f64>,
    lower_mult: Vec<f64>,
    upper_mult: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Change {
    Clamp(usize, LimitState),
    Release(usize),
    Loosen(usize),
    Tighten(usize),
}

impl Change {
    fn apply(self, limits: &mut [LimitState], slack: &mut [bool]) {
        match self {
            Change::Clamp(i, s) => limits[i] = s,
            Change::Release(i) => limits[i] = LimitState::Free,
            Change::Loosen(k) => slack[k] = true,
            Change::Tighten(k) => slack[k] = false,
        }
    }
}

/// Pre-contact pose with the model's own motor pulley radii.
pub fn pre_contact_pose(hand: &HandModel, params: &ParamVector, theta_mot: &[f64]) -> Result<PreContactPose> {
    let radii = hand.motor_radii(&Default::default());
    pre_contact_pose_with(hand, params, &radii, theta_mot)
}

pub fn pre_contact_pose_with(hand: &HandModel, params: &ParamVector, radii: &[f64], theta_mot: &[f64]) -> Result<PreContactPose> {
    PreContactSolver::new(hand, params, radii)?.solve(theta_mot, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn chain() -> (HandModel, ParamVector) {
        (fixtures::two_joint_chain_hand(), fixtures::two_joint_chain_params())
    }

    #[test]
    fn zero_motor_angle_rests_at_zero_pose() {
        let (h, p) = chain();
        let r = pre_contact_pose(&h, &p, &[0.0]).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.theta[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.theta[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tension[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_chain_sweep() {
        // θ_j = r_j t / K_j − θ₀_j with 10 θ₁ + 5 θ₂ = 10 θ_mot gives t = 1 + 2θ_mot/3
        let (h, p) = chain();
        for &tm in &[0.3, 0.6, 1.2, 2.0] {
            let r = pre_contact_pose(&h, &p, &[tm]).unwrap();
            let t = 1.0 + 2.0 * tm / 3.0;
            assert!(r.converged);
            assert_abs_diff_eq!(r.tension[0], t, epsilon = 1e-10);
            assert_abs_diff_eq!(r.theta[0], t - 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(r.theta[1], t - 1.0, epsilon = 1e-10);
        }
        let r = pre_contact_pose(&h, &p, &[0.3]).unwrap();
        assert_abs_diff_eq!(r.theta[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.theta[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn distal_clamps_and_proximal_keeps_moving() {
        // past θ_mot = 3π/4 the distal joint sits at π/2 and θ₁ = θ_mot − π/4
        let (h, p) = chain();
        for &tm in &[2.5, 2.8, 3.1] {
            let r = pre_contact_pose(&h, &p, &[tm]).unwrap();
            assert!(r.converged, "{r:?}");
            assert_eq!(r.limits[1], LimitState::Upper);
            assert_eq!(r.theta[1], PI / 2.0);
            assert_abs_diff_eq!(r.theta[0], tm - PI / 4.0, epsilon = 1e-10);
            assert_abs_diff_eq!(r.tension[0], r.theta[0] + 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn distal_clamps_at_lower_limit_when_paying_out() {
        let (h, p) = chain();
        let r = pre_contact_pose(&h, &p, &[-0.5]).unwrap();
        assert!(r.converged);
        assert_eq!(r.limits[1], LimitState::Lower);
        assert_abs_diff_eq!(r.theta[0], -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(r.tension[0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn tendon_goes_slack_when_springs_hit_the_stops() {
        let (h, p) = chain();
        let r = pre_contact_pose(&h, &p, &[-2.0]).unwrap();
        assert!(r.converged);
        assert!(r.slack[0]);
        assert_eq!(r.tension[0], 0.0);
        assert_eq!(r.limits, vec![LimitState::Lower, LimitState::Lower]);
    }

    #[test]
    fn unreachable_travel_is_an_error() {
        let (h, p) = chain();
        assert!(pre_contact_pose(&h, &p, &[10.0]).is_err());
    }

    fn check_equilibrium(h: &HandModel, p: &ParamVector, radii: &[f64], tm: &[f64], r: &PreContactPose) {
        let a = designs::actuation_matrix(h, p, &r.theta).unwrap();
        let tau = designs::spring_torques(h, p, &r.theta).unwrap();
        let at = a.mul_vec(&r.tension);
        let s = kinematics::tendon_excursion(h, p, &r.theta).unwrap();
        let b = designs::motor_connection(h, radii).unwrap().mul_vec(tm);
        let specs = h.dof_specs();
        for d in 0..h.dof_count() {
            let net = at[d] - tau[d];
            match r.limits[d] {
                LimitState::Free => {
                    assert!(net.abs() <= 1e-8, "dof {d}: {net}");
                    assert!(r.theta[d] >= specs[d].lower - 1e-9 && r.theta[d] <= specs[d].upper + 1e-9);
                }
                LimitState::Lower => assert!(net <= 1e-8 && r.theta[d] == specs[d].lower),
                LimitState::Upper => assert!(net >= -1e-8 && r.theta[d] == specs[d].upper),
            }
        }
        for k in 0..h.tendons.len() {
            if r.slack[k] {
                assert_eq!(r.tension[k], 0.0);
                assert!(s[k] - b[k] >= -1e-9);
            } else {
                assert!((s[k] - b[k]).abs() <= 1e-8, "tendon {k}: {}", s[k] - b[k]);
            }
        }
    }

    #[test]
    fn case1_table_design_reaches_equilibrium() {
        let h = fixtures::case1_hand();
        let p = fixtures::case1_table_params();
        for tm in [-0.5, 0.0, 0.5, 1.0, 1.5] {
            let r = pre_contact_pose(&h, &p, &[tm]).unwrap();
            assert!(r.converged, "{tm}: {r:?}");
            check_equilibrium(&h, &p, &[10.0], &[tm], &r);
        }
    }

    #[test]
    fn case2_rolls_follow_their_motor_exactly() {
        let h = fixtures::case2_hand();
        let p = fixtures::case2_table_params();
        let r = pre_contact_pose(&h, &p, &[0.5, 0.05]).unwrap();
        assert!(r.converged, "{r:?}");
        check_equilibrium(&h, &p, &[10.0, 10.0], &[0.5, 0.05], &r);
        // roll travel ∓r_fr θ equals 10·0.05
        assert_abs_diff_eq!(r.theta[2], -0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(r.theta[5], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn case3_universal_joints_reach_equilibrium() {
        let h = fixtures::case3_hand();
        let p = fixtures::case3_table_params();
        for tm in [[0.5, 0.5], [0.3, 0.6], [0.6, 0.3], [0.2, 0.8]] {
            let r = pre_contact_pose(&h, &p, &tm).unwrap();
            assert!(r.converged, "{tm:?}: {r:?}");
            check_equilibrium(&h, &p, &[10.0, 10.0], &tm, &r);
        }
        // thumb travel 14 mm exceeds its 13.6 mm range
        assert!(pre_contact_pose(&h, &p, &[1.0, 0.4]).is_err());
    }

    #[test]
    fn energy_qp_agrees_on_constant_arm_chain() {
        // independent oracle: minimize ½Σ K(θ+θ₀)² s.t. Aᵀθ ≥ Mθ_mot and limits
        let (h, p) = chain();
        for &tm in &[-0.5, 0.3, 1.8] {
            let qp = QpProblem::new(Mat::diag(&[10.0, 5.0]), vec![10.0, 5.0])
                .with_ineq(Mat::from_rows(&[vec![-10.0, -5.0], vec![1.0, 0.0], vec![0.0, 1.0]]), vec![-10.0 * tm, 2.5, PI / 2.0])
                .with_lower_bounds(vec![-PI / 4.0, 0.0]);
            let sol = solve_qp(&qp, 1e-12).unwrap();
            let r = pre_contact_pose(&h, &p, &[tm]).unwrap();
            assert_abs_diff_eq!(r.theta[0], sol.x[0], epsilon = 1e-8);
            assert_abs_diff_eq!(r.theta[1], sol.x[1], epsilon = 1e-8);
            assert_abs_diff_eq!(r.tension[0], sol.z_in[0], epsilon = 1e-7);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn chain_equilibrium_residuals_vanish(tm in -1.5f64..2.3, k1 in 0usize..2, k2 in 0usize..2, p1 in 0.2f64..2.0, p2 in 0.2f64..2.0) {
            let h = fixtures::two_joint_chain_hand();
            let mut p = fixtures::two_joint_chain_params();
            p.insert("K1".into(), [5.0, 10.0][k1]);
            p.insert("K2".into(), [5.0, 10.0][k2]);
            p.insert("p1".into(), p1);
            p.insert("p2".into(), p2);
            let r = pre_contact_pose(&h, &p, &[tm]);
            if let Ok(r) = r {
                prop_assert!(r.converged);
                check_equilibrium(&h, &p, &[10.0], &[tm], &r);
            }
        }
    }
}
