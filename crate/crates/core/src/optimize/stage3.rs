//! Intra-tendon spring balancing.
//!
//! At a pre-contact posture the tendons must balance the springs alone:
//! `A t = τ_spr` with `t ≥ 0`. The per-grasp metric is the NNLS residual
//! `‖A t* − τ_spr‖`. Chains that share spring slots or tendons are tuned
//! together as one group.

use super::{exclusion_loop, rss, Exclusion, GraspMetric, GroupSummary, SearchSpace, StageResult};
use crate::designs;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Mat};
use crate::model::{DesignConfig, GraspRecord, GraspTag, HandModel, ParamVector, SpringSpec};
use crate::solvers::{solve_nnls, StopReason};
use rayon::prelude::*;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SpringBalance {
    pub tension: Vec<f64>,
    /// `Δτ_pre = A t* − τ_spr`
    pub residual: Vec<f64>,
    pub metric: f64,
}

/// Best nonnegative tensions against the spring torques `tau`.
pub fn spring_balance_qp(a: &Mat<f64>, tau: &[f64]) -> SpringBalance {
    let sol = solve_nnls(a, tau);
    let at = a.mul_vec(&sol.x);
    let residual: Vec<f64> = at.iter().zip(tau).map(|(x, y)| x - y).collect();
    let metric = norm2(&residual);
    SpringBalance { tension: sol.x, residual, metric }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringGroup {
    /// Chain ids joined by `+`.
    pub id: String,
    pub chains: Vec<String>,
    /// Chain classes joined by `+` when they differ.
    pub class: String,
    pub dofs: Vec<usize>,
    pub tendons: Vec<usize>,
    /// Canonical stiffness slots, then canonical preload slots.
    pub slots: Vec<String>,
}

impl SpringGroup {
    /// Tightest threshold among the member classes.
    pub fn threshold(&self, hand: &HandModel, config: &DesignConfig) -> f64 {
        self.chains
            .iter()
            .map(|c| config.spring_threshold(hand.chain_class(c).unwrap_or_default()))
            .fold(f64::INFINITY, f64::min)
    }
}

fn chain_spring_slots(hand: &HandModel, chain: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for j in hand.joints.iter().filter(|j| j.chain == chain) {
        if let SpringSpec::Torsional { stiffness, preload } | SpringSpec::LinearOnTendon { stiffness, preload, .. } = &j.spring {
            out.insert(hand.params.canonical(stiffness).to_string());
            out.insert(hand.params.canonical(preload).to_string());
        }
    }
    out
}

/// Connected components of chains linked by a shared canonical spring slot or
/// a tendon crossing both.
pub fn spring_groups(hand: &HandModel) -> Vec<SpringGroup> {
    let n = hand.chains.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let slots: Vec<BTreeSet<String>> = hand.chains.iter().map(|c| chain_spring_slots(hand, &c.id)).collect();
    let dofs: Vec<BTreeSet<usize>> = hand.chains.iter().map(|c| hand.chain_dofs(&c.id).into_iter().collect()).collect();
    let tendon_dofs: Vec<Vec<usize>> = (0..hand.tendons.len()).map(|t| hand.tendon_dofs(t)).collect();
    for a in 0..n {
        for b in a + 1..n {
            let shared_slot = !slots[a].is_disjoint(&slots[b]);
            let shared_tendon = tendon_dofs
                .iter()
                .any(|td| td.iter().any(|d| dofs[a].contains(d)) && td.iter().any(|d| dofs[b].contains(d)));
            if shared_slot || shared_tendon {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut out = Vec::new();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        if members.is_empty() {
            continue;
        }
        let chains: Vec<String> = members.iter().map(|&i| hand.chains[i].id.clone()).collect();
        let classes: BTreeSet<&str> = members.iter().map(|&i| hand.chains[i].class.as_str()).collect();
        let mut gdofs: Vec<usize> = members.iter().flat_map(|&i| dofs[i].iter().copied()).collect();
        gdofs.sort_unstable();
        let owned: BTreeSet<&String> = members.iter().flat_map(|&i| slots[i].iter()).collect();
        let layout = &hand.params;
        let mut ordered: Vec<String> = layout.stiffness.iter().map(|s| s.name.clone()).filter(|s| owned.contains(s)).collect();
        ordered.extend(layout.preloads.iter().map(|s| s.name.clone()).filter(|s| owned.contains(s)));
        out.push(SpringGroup {
            id: chains.join("+"),
            class: classes.into_iter().collect::<Vec<_>>().join("+"),
            tendons: hand.tendons_on_dofs(&gdofs),
            dofs: gdofs,
            chains,
            slots: ordered,
        });
    }
    out
}

/// Stage 3: per spring group, CMA-ES over the group's stiffness (catalog) and
/// preload slots minimizing `f_intra = √Σ‖Δτ_pre,i‖²` over the desired grasp
/// postures, with per-class threshold exclusion. `arms` carries the
/// moment arms from stage 2.
pub fn optimize_intra_tendon(
    hand: &HandModel,
    grasps: &[GraspRecord],
    config: &DesignConfig,
    arms: &ParamVector,
) -> Result<StageResult> {
    let desired: Vec<&GraspRecord> = grasps.iter().filter(|g| g.tag == GraspTag::Desired).collect();
    if desired.is_empty() {
        return Err(Error::invalid("grasps", "no desired grasps"));
    }
    let mut base = hand.params.default_vector();
    base.extend(arms.iter().map(|(k, v)| (k.clone(), *v)));
    let n = desired.len();

    let mut params = ParamVector::new();
    let mut metrics = Vec::new();
    let mut excluded = Vec::new();
    let mut groups = Vec::new();
    let mut stop = Vec::new();
    let (mut evals, mut iterations) = (0, 0);

    for (gi, group) in spring_groups(hand).into_iter().enumerate() {
        let threshold = group.threshold(hand, config);
        if group.slots.is_empty() {
            groups.push(GroupSummary {
                id: group.id,
                chains: group.chains,
                class: group.class,
                slots: vec![],
                objective: 0.0,
                threshold,
                evals: 0,
                skipped: true,
            });
            continue;
        }
        let space = SearchSpace::springs(&hand.params, &group.slots)?;
        // the actuation matrix depends only on the fixed moment arms
        let amats: Vec<Mat<f64>> = desired
            .iter()
            .map(|g| Ok(designs::actuation_matrix(hand, &base, &g.theta)?.select_rows(&group.dofs).select_cols(&group.tendons)))
            .collect::<Result<_>>()?;
        let metric = |x: &[f64], idx: &[usize]| {
            let p = space.assign(&base, x);
            idx.par_iter()
                .map(|&i| match designs::spring_torques(hand, &p, &desired[i].theta) {
                    Ok(tau) => {
                        let tau: Vec<f64> = group.dofs.iter().map(|&d| tau[d]).collect();
                        spring_balance_qp(&amats[i], &tau).metric
                    }
                    Err(_) => f64::INFINITY,
                })
                .collect::<Vec<f64>>()
        };
        let seed = super::derive_seed(config.seed, 3, gi as u64);
        let out = exclusion_loop(&space.dims, &config.stage3, seed, None, n, &[], threshold, metric, |_: &[f64]| 0.0, 3)?;
        let objective = rss((0..n).filter(|&i| out.considered[i]).map(|i| out.metrics[i]));
        params.extend(space.subset(&out.x));
        for i in 0..n {
            metrics.push(GraspMetric {
                id: desired[i].id.clone(),
                group: Some(group.id.clone()),
                value: out.metrics[i],
                considered: out.considered[i],
            });
        }
        for &(i, iteration, reason) in &out.excluded {
            excluded.push(Exclusion { id: desired[i].id.clone(), group: Some(group.id.clone()), iteration, reason });
        }
        evals += out.evals;
        iterations = iterations.max(out.iterations);
        stop.extend(out.stop);
        groups.push(GroupSummary {
            id: group.id,
            chains: group.chains,
            class: group.class,
            slots: group.slots,
            objective,
            threshold,
            evals: out.evals,
            skipped: false,
        });
    }
    let flags = super::budget_flags(&stop);
    Ok(StageResult {
        stage: 3,
        params,
        objective: rss(metrics.iter().filter(|m| m.considered).map(|m| m.value)),
        metrics,
        excluded,
        unit: "Nmm".into(),
        f_trq_min: None,
        f_trq: None,
        evals,
        seed: config.seed,
        iterations,
        flags,
        stop: if groups.iter().all(|g| g.skipped) { vec![StopReason::NoFreeDimensions] } else { stop },
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn balance_is_exact_inside_the_cone() {
        let a = Mat::from_rows(&[vec![2.0, 0.0], vec![1.0, 3.0]]);
        let tau = a.mul_vec(&[0.5, 1.5]);
        let b = spring_balance_qp(&a, &tau);
        assert!(b.metric <= 1e-12);
        assert_abs_diff_eq!(b.tension[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn balance_outside_the_cone_projects_onto_it() {
        // a single column (1, 0) against τ = (−1, 2): t = 0, residual −τ
        let a = Mat::from_rows(&[vec![1.0], vec![0.0]]);
        let b = spring_balance_qp(&a, &[-1.0, 2.0]);
        assert_eq!(b.tension, vec![0.0]);
        assert_abs_diff_eq!(b.metric, 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fingers_sharing_slots_form_one_group() {
        for hand in [fixtures::case1_hand(), fixtures::case2_hand(), fixtures::case3_hand()] {
            let g = spring_groups(&hand);
            let ids: Vec<&str> = g.iter().map(|g| g.id.as_str()).collect();
            assert_eq!(ids, ["thumb", "f1+f2"], "{}", hand.name);
            assert_eq!(g[0].class, "thumb");
            assert_eq!(g[1].class, "finger");
            assert!(g.iter().all(|g| !g.slots.is_empty()));
            // no slot belongs to two groups
            let all: Vec<&String> = g.iter().flat_map(|g| &g.slots).collect();
            let set: BTreeSet<&String> = all.iter().copied().collect();
            assert_eq!(all.len(), set.len());
        }
    }

    #[test]
    fn single_chain_group_uses_its_class_threshold() {
        let hand = fixtures::two_joint_chain_hand();
        let g = spring_groups(&hand);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].slots, ["K1", "K2", "p1", "p2"]);
        let cfg = DesignConfig::default();
        assert_eq!(g[0].threshold(&hand, &cfg), 5.0);
    }

    #[test]
    fn two_joint_chain_recovers_a_balanced_design() {
        // postures generated as pre-contact equilibria of the truth design are
        // balanced exactly, so the optimum reaches zero
        let hand = fixtures::two_joint_chain_hand();
        let truth = fixtures::two_joint_chain_params();
        let grasps: Vec<GraspRecord> = [0.3, 0.8, 1.3, 1.9]
            .iter()
            .enumerate()
            .map(|(i, &tm)| {
                let pose = super::super::pre_contact_pose(&hand, &truth, &[tm]).unwrap();
                GraspRecord {
                    id: format!("g{i}"),
                    object: String::new(),
                    theta: pose.theta,
                    contacts: vec![],
                    tag: GraspTag::Desired,
                    pair: None,
                }
            })
            .collect();
        let mut cfg = DesignConfig::default();
        cfg.stage3.tolfun = 1e-12;
        cfg.stage3.restarts = 3;
        let r = optimize_intra_tendon(&hand, &grasps, &cfg, &truth).unwrap();
        assert!(r.objective <= 1e-3, "{r:?}");
        assert!(r.excluded.is_empty());
        assert_eq!(r.params.len(), 4);
    }
}
