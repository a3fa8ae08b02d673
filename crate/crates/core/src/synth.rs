//! Synthetic design problems with a known answer.
//!
//! Grasp postures are pre-contact equilibria of a ground-truth design, and
//! the contact forces at each posture are built so that the truth actuation
//! matrix balances them exactly. A correct pipeline must therefore drive all
//! three objectives to zero and land on the truth springs.
//!
//! Some truth quantities cannot be recovered from such data. Stage 1 sees
//! each tendon column only up to scale, and a single motor pins the relative
//! scale of the tendons but not the overall one. Spring balance along a
//! one-parameter family of postures fixes stiffness ratios and one preload
//! combination per tendon-to-spring relation. The fixture removes the
//! remaining freedom by pinning one preload per spring group and choosing
//! stiffness ratios that occur only once in the catalog.

use crate::designs;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::geom;
use crate::kinematics;
use crate::linalg::{sym_eigen, Mat};
use crate::model::{ContactRecord, DesignConfig, GraspRecord, GraspTag, HandModel, ParamVector};
use crate::optimize::precontact::{LimitState, PreContactSolver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub hand: HandModel,
    pub truth: ParamVector,
    /// Desired grasps followed by their opening pairs.
    pub grasps: Vec<GraspRecord>,
    pub config: DesignConfig,
    /// Motor angle of each desired grasp, rad.
    pub theta_mot: Vec<f64>,
}

/// Preloads held at their truth value, one per spring group.
pub const PINNED_PRELOADS: [&str; 2] = ["theta0_tp", "theta0_fr"];

/// Truth design on the single-motor hand. The opening travel lies in the
/// motor range because `r_tp = r_fr + r_fp`; the stiffness pairs
/// (16.5, 2.25) and (2.25, 13.9, 5.94) are the only catalog tuples with
/// their ratios. Every value sits inside its catalog and bounds; a truth on
/// a box corner is much harder for the search to reach.
pub fn case1_truth() -> ParamVector {
    [
        ("r_tp", 10.0),
        ("r_td", 5.0),
        ("r_fr", 2.0),
        ("r_fp", 8.0),
        ("r_fd", 5.0),
        ("K_tp", 16.5),
        ("K_td", 2.25),
        ("K_fr", 2.25),
        ("K_fp", 13.9),
        ("K_fd", 5.94),
        ("theta0_tp", 0.8),
        ("theta0_td", 0.3),
        ("theta0_fr", 0.8),
        ("theta0_fp", 1.2),
        ("theta0_fd", 0.5),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), *v))
    .collect()
}

/// Case-I hand with the [`PINNED_PRELOADS`] bounds collapsed onto `truth`.
pub fn pinned_hand(mut hand: HandModel, truth: &ParamVector) -> HandModel {
    for slot in hand.params.preloads.iter_mut() {
        if PINNED_PRELOADS.contains(&slot.name.as_str()) {
            slot.lower = truth[&slot.name];
            slot.upper = truth[&slot.name];
        }
    }
    hand
}

/// Tight solver settings suited to an exactly solvable problem.
pub fn round_trip_config(seed: u64) -> DesignConfig {
    let mut c = DesignConfig { seed, ..Default::default() };
    c.stage1.tolfun = 1e-14;
    c.stage1.restarts = 1;
    c.stage2.tolfun = 1e-12;
    c.stage3.tolfun = 1e-12;
    // the finger group mixes three catalog slots with two preloads and has
    // local minima; IPOP needs several population doublings to escape them
    c.stage3.restarts = 8;
    c.stage3.max_evals = 1_000_000;
    c.qp_tol = 1e-14;
    c.constraint_tol = 1e-6;
    c
}

/// `n` desired grasps on the case-I hand plus their openings.
pub fn case1_round_trip(n: usize, seed: u64) -> Result<SyntheticProblem> {
    let truth = case1_truth();
    let hand = pinned_hand(fixtures::case1_hand(), &truth);
    let theta_mot = free_motor_angles(&hand, &truth, n)?;
    let solver = PreContactSolver::new(&hand, &truth, &hand.motor_radii(&Default::default()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grasps = Vec::with_capacity(2 * n);
    for (i, &tm) in theta_mot.iter().enumerate() {
        let pose = solver.solve(&[tm], None)?;
        let jitter: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let finger = if i % 2 == 0 { "f1" } else { "f2" };
        let contacts = pinch_contacts(&hand, &truth, &pose.theta, finger, jitter)?;
        grasps.push(GraspRecord {
            id: format!("syn{i:02}"),
            object: "synthetic".into(),
            theta: pose.theta,
            contacts,
            tag: GraspTag::Desired,
            pair: None,
        });
    }
    crate::model::complete_openings(&mut grasps, &hand);
    Ok(SyntheticProblem { hand, truth, grasps, config: round_trip_config(seed), theta_mot })
}

/// `n` evenly spaced motor angles over the interval where every DoF is free
/// and every tendon taut.
fn free_motor_angles(hand: &HandModel, params: &ParamVector, n: usize) -> Result<Vec<f64>> {
    let solver = PreContactSolver::new(hand, params, &hand.motor_radii(&Default::default()))?;
    let free = |tm: f64| {
        solver
            .solve(&[tm], None)
            .is_ok_and(|p| p.limits.iter().all(|l| *l == LimitState::Free) && p.slack.iter().all(|s| !s))
    };
    let grid: Vec<f64> = (0..=400).map(|k| -1.5 + 3.0 * k as f64 / 400.0).collect();
    let ok: Vec<f64> = grid.iter().copied().filter(|&tm| free(tm)).collect();
    let (Some(&lo), Some(&hi)) = (ok.first(), ok.last()) else {
        return Err(Error::invalid("synth", "truth design has no free pre-contact postures"));
    };
    // stay clear of the interval ends
    let (lo, hi) = (lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
    let out: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect();
    if !out.iter().all(|&tm| free(tm)) {
        return Err(Error::invalid("synth", "free postures do not form an interval"));
    }
    Ok(out)
}

/// Two-contact pinch between the thumb tip and the tip of `finger` (`f1` or
/// `f2`). Two opposing contacts balance the object only when both forces lie
/// on the line through the contact points, so the reachable grasp torques
/// form a single ray. The force line is chosen, as close as possible to the
/// line through the fingertips, so that this ray is `A·t` for the truth `A`
/// with the thumb and finger tendons both pulling; the other finger carries
/// no load.
///
/// A line with direction `u` through `p` has Plücker coordinates
/// `(u, w = p × u)`, and a unit force along it has moment
/// `a·w + (o × a)·u` about the axis `(o, a)`. Matching the tendon torques is
/// then linear in `(u, w, t)`; the line condition `u·w = 0` is solved on the
/// null space of that system.
pub fn pinch_contacts(hand: &HandModel, params: &ParamVector, theta: &[f64], finger: &str, jitter: [f64; 6]) -> Result<Vec<ContactRecord>> {
    let fail = |m: &str| Error::Numerical(format!("pinch synthesis on {finger}: {m}"));
    let pose = kinematics::forward_kinematics(hand, theta)?;
    let distal = format!("{finger}_distal");
    let link_ids = ["t_distal", distal.as_str()];
    let links: Vec<usize> = link_ids.iter().map(|l| hand.index.link_pos[*l]).collect();
    let a = designs::actuation_matrix(hand, params, theta)?;
    let tendon = |id: &str| hand.tendons.iter().position(|t| t.id == id).expect("case-I tendon");
    let (tt, tf) = (tendon("thumb"), tendon(finger));
    let (dt, df) = (hand.chain_dofs("thumb"), hand.chain_dofs(finger));

    // rows: thumb DoFs, then finger DoFs; columns: u (3), w (3), t_thumb, t_finger
    let mut sys = Mat::zeros(dt.len() + df.len(), 8);
    for (row, (&d, side, t, col)) in dt
        .iter()
        .map(|d| (d, 1.0, tt, 6))
        .chain(df.iter().map(|d| (d, -1.0, tf, 7)))
        .enumerate()
    {
        let (o, ax) = (pose.dof_origins[d], pose.dof_axes[d]);
        let ou = geom::cross(o, ax);
        for i in 0..3 {
            sys[(row, i)] = side * ou[i];
            sys[(row, 3 + i)] = side * ax[i];
        }
        sys[(row, col)] = -a[(d, t)];
    }
    let (_, vecs) = sym_eigen(&sys.tr_matmul(&sys));
    let null = vecs.select_cols(&[0, 1, 2]);

    let tips = [[jitter[0], 6.0 + jitter[1], 15.0 + jitter[2]], [jitter[3], -6.0 + jitter[4], 15.0 + jitter[5]]];
    let tip = |k: usize| pose.links[links[k]].apply(tips[k]);
    let (p1, p2) = (tip(0), tip(1));

    // u·w on the null space is the conic yᵀQy = 0; in the eigenbasis of Q
    // it is an ellipse around the axis whose eigenvalue has the odd sign
    let nu = null.select_rows(&[0, 1, 2]);
    let nw = null.select_rows(&[3, 4, 5]);
    let c = nu.tr_matmul(&nw);
    let (vals, qv) = sym_eigen(&c.add(&c.transpose()).scaled(0.5));
    let pos = vals.iter().filter(|&&v| v > 0.0).count();
    let k = match pos {
        1 => (0..3).find(|&i| vals[i] > 0.0),
        2 => (0..3).find(|&i| vals[i] <= 0.0),
        _ => None,
    }
    .ok_or_else(|| fail("no force line matches the tendon torques"))?;
    let (i, j) = match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (ri, rj) = ((-vals[k] / vals[i]).sqrt(), (-vals[k] / vals[j]).sqrt());
    // distance² of a point from the line (u, w)
    let off = |p: [f64; 3], u: [f64; 3], w: [f64; 3]| {
        let m = geom::sub(geom::cross(p, u), w);
        geom::dot(m, m) / geom::dot(u, u)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for step in 0..720 {
        let phi = std::f64::consts::TAU * step as f64 / 720.0;
        let mut eta = [0.0; 3];
        eta[k] = 1.0;
        eta[i] = ri * phi.cos();
        eta[j] = rj * phi.sin();
        let mut z = null.mul_vec(&qv.mul_vec(&eta));
        if z[6] < 0.0 {
            z.iter_mut().for_each(|v| *v = -*v);
        }
        let u = [z[0], z[1], z[2]];
        let w = [z[3], z[4], z[5]];
        if !(z[7] > 0.0) || geom::norm(u) < 1e-9 {
            continue;
        }
        let score = off(p1, u, w) + off(p2, u, w);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, z));
        }
    }
    let (_, z) = best.ok_or_else(|| fail("thumb and finger tendons would pull in opposite directions"))?;
    let u = [z[0], z[1], z[2]];
    let w = [z[3], z[4], z[5]];
    let uu = geom::dot(u, u);
    if uu < 1e-12 || geom::dot(u, w).abs() > 1e-9 * uu.sqrt() * geom::norm(w).max(1.0) {
        return Err(fail("degenerate force line"));
    }
    let un = geom::scale(u, 1.0 / uu.sqrt());
    let base = geom::scale(geom::cross(u, w), 1.0 / uu);
    let foot = |p: [f64; 3]| geom::add(base, geom::scale(un, geom::dot(geom::sub(p, base), un)));
    let points = [foot(p1), foot(p2)];
    let mut out = Vec::new();
    for (k, f) in [un, geom::scale(un, -1.0)].into_iter().enumerate() {
        let t = &pose.links[links[k]];
        let rt = geom::rot_transpose(&t.rot);
        out.push(ContactRecord {
            link: link_ids[k].to_string(),
            position: geom::rot_apply(&rt, geom::sub(points[k], t.trans)),
            normal: geom::rot_apply(&rt, f),
            mu: 0.5,
        });
    }
    Ok(out)
}
