//! Torque-manifold fitting.
//!
//! For one grasp the QP over `x = [β; t]` minimizes the unbalanced joint
//! torque `‖JᵀDβ − A t‖²` subject to object equilibrium `GDβ = 0`, the
//! friction pyramid `Fβ ≤ 0`, `x ≥ 0` and the normalization `1ᵀJᵀDβ = 1`.
//! The normalization makes the metric unitless and rules out `β = 0`.

use super::{exclusion_loop, rss, GraspMetric, SearchSpace, StageResult};
use crate::contact::{assemble_grasp_matrices, GraspMatrices};
use crate::designs;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Mat};
use crate::model::{DesignConfig, GraspRecord, GraspTag, HandModel, ParamVector};
use crate::solvers::{solve_qp, QpError, QpProblem};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityQp {
    pub beta: Vec<f64>,
    pub tension: Vec<f64>,
    /// `JᵀDβ`, the normalized joint torques the contacts demand.
    pub target: Vec<f64>,
    /// `Δτ_post = JᵀDβ − A t`
    pub residual: Vec<f64>,
    /// `‖Δτ_post‖`; infinite when the grasp admits no normalized equilibrium.
    pub metric: f64,
}

impl StabilityQp {
    pub fn feasible(&self) -> bool {
        self.metric.is_finite()
    }

    fn infeasible(m: usize) -> Self {
        StabilityQp { beta: Vec::new(), tension: Vec::new(), target: vec![0.0; m], residual: vec![0.0; m], metric: f64::INFINITY }
    }
}

/// Solves the per-grasp stability QP for actuation matrix `a` evaluated at
/// the grasp posture.
pub fn grasp_stability_qp(gm: &GraspMatrices, a: &Mat<f64>, tol: f64) -> Result<StabilityQp> {
    let jtd = gm.jt_d();
    let m = jtd.rows();
    if a.rows() != m {
        return Err(Error::invalid("A", format!("dimension mismatch: {} rows for {m} DoF", a.rows())));
    }
    let nb = jtd.cols();
    let nt = a.cols();
    let n = nb + nt;
    let q = Mat::hstack(&[&jtd, &a.scaled(-1.0)]);
    let h = q.tr_matmul(&q).scaled(2.0);
    let gd = gm.gd();
    let mut aeq = Mat::zeros(gd.rows() + 1, n);
    aeq.set_block(0, 0, &gd);
    for j in 0..nb {
        aeq[(gd.rows(), j)] = (0..m).map(|i| jtd[(i, j)]).sum();
    }
    let mut beq = vec![0.0; gd.rows()];
    beq.push(1.0);
    let mut ain = Mat::zeros(gm.f.rows(), n);
    ain.set_block(0, 0, &gm.f);
    let bin = vec![0.0; gm.f.rows()];
    let qp = QpProblem::new(h, vec![0.0; n]).with_eq(aeq, beq).with_ineq(ain, bin).with_lower_bounds(vec![0.0; n]);
    let sol = match solve_qp(&qp, tol) {
        Ok(s) => s,
        Err(QpError::Infeasible { .. }) => return Ok(StabilityQp::infeasible(m)),
        Err(e) => return Err(Error::Numerical(format!("grasp {}: stability QP: {e}", gm.grasp_id))),
    };
    let beta: Vec<f64> = sol.x[..nb].iter().map(|v| v.max(0.0)).collect();
    let tension: Vec<f64> = sol.x[nb..].iter().map(|v| v.max(0.0)).collect();
    let target = jtd.mul_vec(&beta);
    let at = a.mul_vec(&tension);
    let residual: Vec<f64> = target.iter().zip(&at).map(|(x, y)| x - y).collect();
    let metric = norm2(&residual);
    Ok(StabilityQp { beta, tension, target, residual, metric })
}

/// Contact matrices of the desired grasps, in input order.
pub fn desired_grasp_matrices(hand: &HandModel, grasps: &[GraspRecord], edges: usize) -> Result<Vec<(usize, GraspMatrices)>> {
    grasps
        .iter()
        .enumerate()
        .filter(|(_, g)| g.tag == GraspTag::Desired)
        .map(|(i, g)| Ok((i, assemble_grasp_matrices(hand, g, edges)?)))
        .collect()
}

/// Stability QP of every listed grasp under `params`.
pub fn stability_solutions(
    hand: &HandModel,
    grasps: &[GraspRecord],
    gms: &[(usize, GraspMatrices)],
    params: &ParamVector,
    tol: f64,
) -> Result<Vec<StabilityQp>> {
    gms.par_iter()
        .map(|(gi, gm)| {
            let a = designs::actuation_matrix(hand, params, &grasps[*gi].theta)?;
            grasp_stability_qp(gm, &a, tol)
        })
        .collect()
}

/// Per-grasp stability metric; numerical failures count as infinite.
pub(crate) fn torque_metrics(
    hand: &HandModel,
    grasps: &[GraspRecord],
    gms: &[(usize, GraspMatrices)],
    params: &ParamVector,
    idx: &[usize],
    tol: f64,
) -> Vec<f64> {
    idx.par_iter()
        .map(|&k| {
            let (gi, gm) = &gms[k];
            designs::actuation_matrix(hand, params, &grasps[*gi].theta)
                .and_then(|a| grasp_stability_qp(gm, &a, tol))
                .map(|s| s.metric)
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Stage 1: CMA-ES over the moment arms minimizing
/// `f_trq = √Σ‖Δτ_post,i‖²`, with threshold exclusion.
pub fn optimize_torque_manifold(hand: &HandModel, grasps: &[GraspRecord], config: &DesignConfig) -> Result<StageResult> {
    let gms = desired_grasp_matrices(hand, grasps, config.pyramid_edges)?;
    if gms.is_empty() {
        return Err(Error::invalid("grasps", "no desired grasps"));
    }
    let space = SearchSpace::moment_arms(&hand.params);
    let base = hand.params.default_vector();
    let n = gms.len();

    // feasibility does not depend on the moment arms
    let all: Vec<usize> = (0..n).collect();
    let probe = torque_metrics(hand, grasps, &gms, &base, &all, config.qp_tol);
    let infeasible: Vec<usize> = all.iter().copied().filter(|&i| probe[i].is_infinite()).collect();

    let metrics = |x: &[f64], idx: &[usize]| torque_metrics(hand, grasps, &gms, &space.assign(&base, x), idx, config.qp_tol);
    let out = exclusion_loop(
        &space.dims,
        &config.stage1,
        config.seed,
        None,
        n,
        &infeasible,
        config.torque_threshold,
        metrics,
        |_: &[f64]| 0.0,
        1,
    )?;
    let ids: Vec<&str> = gms.iter().map(|(gi, _)| grasps[*gi].id.as_str()).collect();
    let objective = rss((0..n).filter(|&i| out.considered[i]).map(|i| out.metrics[i]));
    Ok(StageResult {
        stage: 1,
        params: space.subset(&out.x),
        metrics: (0..n)
            .map(|i| GraspMetric { id: ids[i].to_string(), group: None, value: out.metrics[i], considered: out.considered[i] })
            .collect(),
        excluded: out
            .excluded
            .iter()
            .map(|&(i, iteration, reason)| super::Exclusion { id: ids[i].to_string(), group: None, iteration, reason })
            .collect(),
        objective,
        unit: "1".into(),
        f_trq_min: Some(objective),
        f_trq: None,
        evals: out.evals,
        seed: config.seed,
        iterations: out.iterations,
        flags: super::budget_flags(&out.stop),
        stop: out.stop,
        groups: Vec::new(),
    })
}
