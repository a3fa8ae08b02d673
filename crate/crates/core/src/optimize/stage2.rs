//! Inter-tendon travel matching.
//!
//! A grasp posture is reachable with taut tendons when the tendon travel
//! `s(θ)` lies in the range of the motor connection matrix `M`. The travel
//! error is the least-squares residual `e = M θ_mot − s`.

use super::stage1::{desired_grasp_matrices, torque_metrics};
use super::{exclusion_loop, rss, Exclusion, GraspMetric, SearchSpace, StageResult};
use crate::designs;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Mat};
use crate::model::{DesignConfig, GraspRecord, HandModel, ParamVector};
use crate::solvers::solve_least_squares;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct TravelFit {
    /// Best motor angles, rad.
    pub theta_mot: Vec<f64>,
    /// `M θ_mot − s`, mm.
    pub error: Vec<f64>,
    pub norm: f64,
}

/// Least-squares motor angles for posture `theta` and the remaining travel error.
pub fn travel_error(hand: &HandModel, params: &ParamVector, m: &Mat<f64>, theta: &[f64]) -> Result<TravelFit> {
    let s = designs::travel_vector(hand, params, theta)?;
    let ls = solve_least_squares(m, &s);
    let norm = norm2(&ls.residual);
    Ok(TravelFit { theta_mot: ls.x, error: ls.residual, norm })
}

/// Stage 2: CMA-ES over the moment arms minimizing
/// `f_inter = √Σ‖e_i‖²` over desired grasps and their openings, with the
/// stage-1 optimum held by the penalty `C·max(0, f_trq − f_trq^min − ε)`.
pub fn optimize_inter_tendon(
    hand: &HandModel,
    grasps: &[GraspRecord],
    config: &DesignConfig,
    stage1: &StageResult,
) -> Result<StageResult> {
    let f_min = stage1.f_trq_min.ok_or_else(|| Error::MissingArtifact("missing f_trq^min".into()))?;
    if grasps.is_empty() {
        return Err(Error::invalid("grasps", "no grasps"));
    }
    let space = SearchSpace::moment_arms(&hand.params);
    let mut base = hand.params.default_vector();
    base.extend(stage1.params.iter().map(|(k, v)| (k.clone(), *v)));
    let x0 = space.extract(&base);
    let radii = hand.motor_radii(&config.motor_radii);
    let m = designs::motor_connection(hand, &radii)?;

    let considered: Vec<&str> = stage1.considered_ids();
    let stable: Vec<GraspRecord> = grasps.iter().filter(|g| considered.contains(&g.id.as_str())).cloned().collect();
    let gms = desired_grasp_matrices(hand, &stable, config.pyramid_edges)?;
    let all_stable: Vec<usize> = (0..gms.len()).collect();
    let f_trq = |p: &ParamVector| rss(torque_metrics(hand, &stable, &gms, p, &all_stable, config.qp_tol));

    let metrics = |x: &[f64], idx: &[usize]| {
        let p = space.assign(&base, x);
        idx.par_iter()
            .map(|&i| travel_error(hand, &p, &m, &grasps[i].theta).map(|t| t.norm).unwrap_or(f64::INFINITY))
            .collect::<Vec<f64>>()
    };
    let excess = |p: &ParamVector| f_trq(p) - f_min - config.constraint_tol;
    let penalty = |x: &[f64]| config.penalty * excess(&space.assign(&base, x)).max(0.0);

    let n = grasps.len();
    let out = exclusion_loop(&space.dims, &config.stage2, config.seed, x0, n, &[], config.travel_threshold, metrics, penalty, 2)?;

    let best = space.assign(&base, &out.x);
    let trq = f_trq(&best);
    let mut flags = super::budget_flags(&out.stop);
    if trq - f_min - config.constraint_tol > 0.0 {
        flags.push("torque_constraint_violated".into());
    }
    Ok(StageResult {
        stage: 2,
        params: space.subset(&out.x),
        metrics: (0..n)
            .map(|i| GraspMetric { id: grasps[i].id.clone(), group: None, value: out.metrics[i], considered: out.considered[i] })
            .collect(),
        excluded: out
            .excluded
            .iter()
            .map(|&(i, iteration, reason)| Exclusion { id: grasps[i].id.clone(), group: None, iteration, reason })
            .collect(),
        objective: rss((0..n).filter(|&i| out.considered[i]).map(|i| out.metrics[i])),
        unit: "mm".into(),
        f_trq_min: Some(f_min),
        f_trq: Some(trq),
        evals: out.evals,
        seed: config.seed,
        iterations: out.iterations,
        flags,
        stop: out.stop,
        groups: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_tendon_travel_is_matched_exactly() {
        let hand = fixtures::two_joint_chain_hand();
        let p = fixtures::two_joint_chain_params();
        let m = designs::motor_connection(&hand, &[10.0]).unwrap();
        let t = travel_error(&hand, &p, &m, &[0.4, 0.2]).unwrap();
        // one tendon, one motor: the travel is always in range(M)
        assert!(t.norm <= 1e-12);
        let s = designs::travel_vector(&hand, &p, &[0.4, 0.2]).unwrap();
        assert_abs_diff_eq!(t.theta_mot[0] * 10.0, s[0], epsilon = 1e-12);
    }

    #[test]
    fn coupled_tendons_leave_the_orthogonal_residual() {
        // case I: three tendons on one motor of radius R, so
        // e = R·θ_mot·1 − s with θ_mot = mean(s)/R
        let hand = fixtures::case1_hand();
        let p = fixtures::case1_table_params();
        let radii = hand.motor_radii(&Default::default());
        let m = designs::motor_connection(&hand, &radii).unwrap();
        let theta = [0.5, 0.3, 0.1, 0.7, 0.2, 0.0, 0.4, 0.9];
        let s = designs::travel_vector(&hand, &p, &theta).unwrap();
        let t = travel_error(&hand, &p, &m, &theta).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        for (e, si) in t.error.iter().zip(&s) {
            assert_abs_diff_eq!(*e, mean - si, epsilon = 1e-9);
        }
    }

    #[test]
    fn missing_stage_one_optimum_is_reported() {
        let hand = fixtures::two_joint_chain_hand();
        let r = StageResult {
            stage: 1,
            params: Default::default(),
            metrics: vec![],
            excluded: vec![],
            objective: 0.0,
            unit: "1".into(),
            f_trq_min: None,
            f_trq: None,
            evals: 0,
            seed: 0,
            iterations: 0,
            stop: vec![],
            groups: vec![],
            flags: vec![],
        };
        let e = optimize_inter_tendon(&hand, &[], &DesignConfig::default(), &r).unwrap_err();
        assert!(e.to_string().contains("missing f_trq^min"), "{e}");
    }
}
