//! Actuation matrix `A` (m × tendons), motor connection matrix `M`
//! (tendons × motors), tendon travel and spring torques.
//!
//! Everything is driven by the tendon routes of a [`HandModel`]; the explicit
//! per-case builders write the same matrices directly from slot values and
//! serve as independent cross-checks.

use crate::error::{Error, Result};
use crate::kinematics::{self, UJointGeometry};
use crate::linalg::Mat;
use crate::model::{Crossing, DesignCase, HandModel, JointKind, ParamVector, SpringSpec};
use std::collections::BTreeMap;

/// `A(θ)`: column `t` holds the signed moment arms of tendon `t`.
pub fn actuation_matrix(hand: &HandModel, params: &ParamVector, theta: &[f64]) -> Result<Mat<f64>> {
    let m = hand.dof_count();
    if theta.len() != m {
        return Err(Error::invalid("theta", format!("dimension mismatch: {} angles for {m} DoF", theta.len())));
    }
    let mut a = Mat::zeros(m, hand.tendons.len());
    let mut geoms: BTreeMap<usize, [[f64; 3]; 2]> = BTreeMap::new();
    for (t, tendon) in hand.tendons.iter().enumerate() {
        for c in &tendon.crossings {
            let j = hand.index.joint_pos[c.joint()];
            match c {
                Crossing::Constant { dof, slot, sign, multiplicity, .. } => {
                    let r = hand.params.value(params, slot)?;
                    a[(hand.dof_index(j, *dof), t)] += sign * multiplicity * r;
                }
                Crossing::UjointLine { line, multiplicity, .. } => {
                    let d0 = hand.dof_index(j, 0);
                    let rho = match geoms.get(&j) {
                        Some(r) => *r,
                        None => {
                            let g = kinematics::ujoint_geometry(hand, j, params)?;
                            let r = g.moment_arms(theta[d0], theta[d0 + 1])?;
                            geoms.insert(j, r);
                            r
                        }
                    };
                    a[(d0, t)] += multiplicity * rho[0][*line];
                    a[(d0 + 1, t)] += multiplicity * rho[1][*line];
                }
            }
        }
    }
    Ok(a)
}

/// True when some tendon passes a universal joint, making `A` depend on θ.
pub fn is_pose_dependent(hand: &HandModel) -> bool {
    hand.tendons.iter().flat_map(|t| &t.crossings).any(|c| matches!(c, Crossing::UjointLine { .. }))
}

/// `M[t][k] = r_mot,k` when tendon `t` is pulled by motor `k`.
pub fn motor_connection(hand: &HandModel, radii: &[f64]) -> Result<Mat<f64>> {
    if radii.len() != hand.motors.len() {
        return Err(Error::invalid(
            "motor_radii",
            format!("{} radii for {} motors", radii.len(), hand.motors.len()),
        ));
    }
    let mut mm = Mat::zeros(hand.tendons.len(), hand.motors.len());
    for (t, tendon) in hand.tendons.iter().enumerate() {
        for id in &tendon.motors {
            let k = hand.index.motor_pos[id];
            mm[(t, k)] = radii[k];
        }
    }
    Ok(mm)
}

/// Tendon travel from the zero pose, mm.
pub fn travel_vector(hand: &HandModel, params: &ParamVector, theta: &[f64]) -> Result<Vec<f64>> {
    kinematics::tendon_excursion(hand, params, theta)
}

/// Spring torque resisting flexion at every DoF, Nmm.
///
/// Torsional: `K(θ + s·θ₀)` with `s = −1` for DoFs opening at their upper
/// limit. Linear spring on line `k`: `F = K(l₀ + l_k(θ) − l_k(0))` in N,
/// giving `−ρ(d, k)·F` on both DoFs of the joint.
pub fn spring_torques(hand: &HandModel, params: &ParamVector, theta: &[f64]) -> Result<Vec<f64>> {
    let m = hand.dof_count();
    if theta.len() != m {
        return Err(Error::invalid("theta", format!("dimension mismatch: {} angles for {m} DoF", theta.len())));
    }
    let mut tau = vec![0.0; m];
    for (j, joint) in hand.joints.iter().enumerate() {
        let d0 = hand.dof_index(j, 0);
        match &joint.spring {
            SpringSpec::None => {}
            SpringSpec::Torsional { stiffness, preload } => {
                let k = hand.params.value(params, stiffness)?;
                let p = hand.params.value(params, preload)?;
                let s = joint.dofs[0].opening.preload_sign();
                tau[d0] = k * (theta[d0] + s * p);
            }
            SpringSpec::LinearOnTendon { line, stiffness, preload } => {
                let k = hand.params.value(params, stiffness)?;
                let l0 = hand.params.value(params, preload)?;
                let g = kinematics::ujoint_geometry(hand, j, params)?;
                let f = linear_spring_force(&g, *line, k, l0, theta[d0], theta[d0 + 1]);
                let rho = g.moment_arms(theta[d0], theta[d0 + 1])?;
                tau[d0] = -rho[0][*line] * f;
                tau[d0 + 1] = -rho[1][*line] * f;
            }
        }
    }
    Ok(tau)
}

/// Tension of the spring in series with a universal-joint line, N.
pub fn linear_spring_force(g: &UJointGeometry<f64>, line: usize, k: f64, l0: f64, pitch: f64, yaw: f64) -> f64 {
    let rest = g.lengths(0.0, 0.0)[line];
    let now = g.lengths(pitch, yaw)[line];
    k * (l0 + now - rest)
}

/// DoFs whose spring parameters are set by each spring slot (canonical name).
pub fn spring_slot_dofs(hand: &HandModel) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, joint) in hand.joints.iter().enumerate() {
        let (k, p) = match &joint.spring {
            SpringSpec::None => continue,
            SpringSpec::Torsional { stiffness, preload } | SpringSpec::LinearOnTendon { stiffness, preload, .. } => {
                (stiffness, preload)
            }
        };
        let dofs: Vec<usize> = (0..joint.dofs.len()).map(|d| hand.dof_index(j, d)).collect();
        for slot in [k, p] {
            out.entry(hand.params.canonical(slot).to_string()).or_default().extend(&dofs);
        }
    }
    out
}

fn slot(params: &ParamVector, name: &str) -> Result<f64> {
    params.get(name).copied().ok_or_else(|| Error::invalid(format!("params.{name}"), "missing parameter value"))
}

/// Single-motor roll-pitch hand, 8 × 3.
pub fn actuation_matrix_case1(params: &ParamVector) -> Result<Mat<f64>> {
    let [tp, td, fr, fp, fd] = ["r_tp", "r_td", "r_fr", "r_fp", "r_fd"].map(|n| slot(params, n));
    let (tp, td, fr, fp, fd) = (tp?, td?, fr?, fp?, fd?);
    let mut a = Mat::zeros(8, 3);
    a[(0, 0)] = tp;
    a[(1, 0)] = td;
    a[(2, 1)] = -fr;
    a[(3, 1)] = fp;
    a[(4, 1)] = fd;
    a[(5, 2)] = fr;
    a[(6, 2)] = fp;
    a[(7, 2)] = fd;
    Ok(a)
}

/// Dual-motor roll-pitch hand, 8 × 5: three flexion tendons and two roll
/// transmissions.
pub fn actuation_matrix_case2(params: &ParamVector) -> Result<Mat<f64>> {
    let [tp, td, fr, fp, fd] = ["r_tp", "r_td", "r_fr", "r_fp", "r_fd"].map(|n| slot(params, n));
    let (tp, td, fr, fp, fd) = (tp?, td?, fr?, fp?, fd?);
    let mut a = Mat::zeros(8, 5);
    a[(0, 0)] = tp;
    a[(1, 0)] = td;
    a[(2, 3)] = -fr;
    a[(3, 1)] = fp;
    a[(4, 1)] = fd;
    a[(5, 4)] = fr;
    a[(6, 2)] = fp;
    a[(7, 2)] = fd;
    Ok(a)
}

/// Dual-motor pitch-yaw hand, 8 × 5. The thumb column is doubled by the
/// idler; finger columns carry the universal-joint moment arms of their line
/// plus the distal arm.
pub fn actuation_matrix_case3(params: &ParamVector, geom: &UJointGeometry<f64>, theta: &[f64]) -> Result<Mat<f64>> {
    if theta.len() != 8 {
        return Err(Error::invalid("theta", format!("dimension mismatch: {} angles for 8 DoF", theta.len())));
    }
    let tp = slot(params, "r_tp")?;
    let td = slot(params, "r_td")?;
    let fd = slot(params, "r_fd")?;
    let mut a = Mat::zeros(8, 5);
    a[(0, 0)] = 2.0 * tp;
    a[(1, 0)] = 2.0 * td;
    // (finger base row, column, line)
    for (row, col, line) in [(2, 1, 1), (2, 2, 2), (5, 3, 2), (5, 4, 1)] {
        let rho = geom.moment_arms(theta[row], theta[row + 1])?;
        a[(row, col)] = rho[0][line];
        a[(row + 1, col)] = rho[1][line];
        a[(row + 2, col)] = fd;
    }
    Ok(a)
}

/// Motor connection of the reference designs.
pub fn motor_connection_case(case: DesignCase, radii: &[f64]) -> Result<Mat<f64>> {
    let want = match case {
        DesignCase::Case1 => 1,
        DesignCase::Case2 | DesignCase::Case3 => 2,
        DesignCase::Generic => return Err(Error::invalid("design_case", "no fixed motor pattern for generic hands")),
    };
    if radii.len() != want {
        return Err(Error::invalid("motor_radii", format!("{case:?} needs {want} motor radii, got {}", radii.len())));
    }
    let rows: Vec<Vec<f64>> = match case {
        DesignCase::Case1 => vec![vec![radii[0]]; 3],
        DesignCase::Case2 => vec![
            vec![radii[0], 0.0],
            vec![radii[0], 0.0],
            vec![radii[0], 0.0],
            vec![0.0, radii[1]],
            vec![0.0, radii[1]],
        ],
        _ => vec![
            vec![radii[0], radii[1]],
            vec![radii[0], 0.0],
            vec![0.0, radii[1]],
            vec![radii[0], 0.0],
            vec![0.0, radii[1]],
        ],
    };
    Ok(Mat::from_rows(&rows))
}

/// Universal-joint geometry of the case-III fingers for given slot values.
pub fn case3_geometry(params: &ParamVector) -> Result<UJointGeometry<f64>> {
    Ok(UJointGeometry::circular(slot(params, "r_fp")?, slot(params, "h_fp")?, crate::fixtures::UJOINT_ANGLES))
}

/// Joints of a hand that are universal.
pub fn universal_joints(hand: &HandModel) -> Vec<usize> {
    (0..hand.joints.len()).filter(|&j| matches!(hand.joints[j].kind, JointKind::Universal { .. })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn case1_pattern_from_table_values() {
        let a = actuation_matrix_case1(&fixtures::case1_table_params()).unwrap();
        let nz: Vec<f64> = (0..3).flat_map(|c| (0..8).map(move |r| (r, c))).map(|rc| a[rc]).filter(|v| *v != 0.0).collect();
        assert_eq!(nz, vec![12.0, 4.6, -2.0, 11.8, 4.5, 2.0, 11.8, 4.5]);
    }

    #[test]
    fn unit_arms_give_column_norms() {
        let p: ParamVector = ["r_tp", "r_td", "r_fr", "r_fp", "r_fd"].iter().map(|n| (n.to_string(), 1.0)).collect();
        let a = actuation_matrix_case1(&p).unwrap();
        let norms: Vec<f64> = (0..3).map(|c| crate::linalg::norm2(&a.column(c))).collect();
        assert_abs_diff_eq!(norms[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(norms[1], 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(norms[2], 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn route_driven_matrices_match_explicit_builders() {
        let th = [0.1, 0.2, -0.1, 0.3, 0.4, 0.05, -0.2, 0.6];
        let h1 = fixtures::case1_hand();
        let p1 = fixtures::case1_table_params();
        assert_eq!(actuation_matrix(&h1, &p1, &th).unwrap(), actuation_matrix_case1(&p1).unwrap());
        let h2 = fixtures::case2_hand();
        let p2 = fixtures::case2_table_params();
        assert_eq!(actuation_matrix(&h2, &p2, &th).unwrap(), actuation_matrix_case2(&p2).unwrap());
        let h3 = fixtures::case3_hand();
        let p3 = fixtures::case3_table_params();
        let a = actuation_matrix(&h3, &p3, &th).unwrap();
        let b = actuation_matrix_case3(&p3, &case3_geometry(&p3).unwrap(), &th).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-14);
    }

    #[test]
    fn case2_rolls_decouple_without_roll_arm() {
        let mut p = fixtures::case2_table_params();
        p.insert("r_fr".into(), 0.0);
        let a = actuation_matrix_case2(&p).unwrap();
        assert!(a.row(2).iter().chain(a.row(5)).all(|v| *v == 0.0));
    }

    #[test]
    fn case2_equal_fingers_permute_columns() {
        let a = actuation_matrix_case2(&fixtures::case2_table_params()).unwrap();
        for k in 0..2 {
            assert_eq!(a[(3 + k, 1)], a[(6 + k, 2)]);
        }
    }

    #[test]
    fn case3_zero_pose_front_yaw_arms_oppose() {
        let p = fixtures::case3_table_params();
        let a = actuation_matrix_case3(&p, &case3_geometry(&p).unwrap(), &[0.0; 8]).unwrap();
        assert_abs_diff_eq!(a[(3, 1)], -a[(3, 2)], epsilon = 1e-12);
        assert_abs_diff_eq!(a[(6, 3)], -a[(6, 4)], epsilon = 1e-12);
    }

    #[test]
    fn case3_entries_delegate_to_ujoint_model() {
        let p = fixtures::case3_table_params();
        let g = case3_geometry(&p).unwrap();
        let mut th = [0.0; 8];
        th[2] = 0.2;
        th[3] = -0.1;
        let a = actuation_matrix_case3(&p, &g, &th).unwrap();
        let rho = kinematics::ujoint_moment_arms(&g, 0.2, -0.1).unwrap();
        assert_eq!(a[(2, 1)], rho[0][1]);
        assert_eq!(a[(3, 2)], rho[1][2]);
    }

    #[test]
    fn motor_patterns() {
        let m1 = motor_connection_case(DesignCase::Case1, &[10.0]).unwrap();
        assert_eq!(m1.as_slice(), &[10.0, 10.0, 10.0]);
        for case in [DesignCase::Case1, DesignCase::Case2, DesignCase::Case3] {
            let hand = fixtures::hand_for_case(case).unwrap();
            let radii = vec![10.0; hand.motors.len()];
            assert_eq!(motor_connection(&hand, &radii).unwrap(), motor_connection_case(case, &radii).unwrap());
        }
        assert!(motor_connection_case(DesignCase::Case2, &[10.0]).is_err());
    }

    #[test]
    fn thumb_travel_examples() {
        let h = fixtures::case1_hand();
        let mut th = vec![0.0; 8];
        th[0] = 0.5;
        th[1] = 0.5;
        let mut p = fixtures::case1_table_params();
        p.insert("r_td".into(), 4.6);
        let s = travel_vector(&h, &p, &th).unwrap();
        assert_abs_diff_eq!(s[0], 8.3, epsilon = 1e-12);
        let h3 = fixtures::case3_hand();
        let p3 = fixtures::case3_table_params();
        let s3 = travel_vector(&h3, &p3, &th).unwrap();
        assert_abs_diff_eq!(s3[0], 2.0 * (0.5 * 4.65 + 0.5 * 2.0), epsilon = 1e-12);
        assert!(travel_vector(&h3, &p3, &[0.0; 8]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn case3_travel_rows_hold_length_changes() {
        let h = fixtures::case3_hand();
        let p = fixtures::case3_table_params();
        let th = [0.0, 0.0, 0.3, -0.2, 0.5, 0.1, 0.2, 0.4];
        let s = travel_vector(&h, &p, &th).unwrap();
        let g = case3_geometry(&p).unwrap();
        let l0 = g.lengths(0.0, 0.0);
        let l1 = g.lengths(0.3, -0.2);
        let l2 = g.lengths(0.1, 0.2);
        assert_abs_diff_eq!(s[1], 0.5 * 2.0 + l0[1] - l1[1], epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.5 * 2.0 + l0[2] - l1[2], epsilon = 1e-12);
        assert_abs_diff_eq!(s[3], 0.4 * 2.0 + l0[2] - l2[2], epsilon = 1e-12);
        assert_abs_diff_eq!(s[4], 0.4 * 2.0 + l0[1] - l2[1], epsilon = 1e-12);
    }

    #[test]
    fn torsional_spring_torque_example() {
        let h = fixtures::case1_hand();
        let mut p = fixtures::case1_table_params();
        p.insert("theta0_td".into(), 3.93);
        let mut th = vec![0.0; 8];
        th[1] = 0.5;
        let tau = spring_torques(&h, &p, &th).unwrap();
        assert_abs_diff_eq!(tau[1], 2.25 * (0.5 + 3.93), epsilon = 1e-12);
        assert_abs_diff_eq!(tau[1], 9.9675, epsilon = 1e-12);
        // finger-1 roll opens at its upper limit: the preload pushes negative
        assert_abs_diff_eq!(tau[2], 3.60 * (0.0 - 4.34), epsilon = 1e-12);
    }

    #[test]
    fn linear_spring_pulls_pitch_open() {
        let h = fixtures::case3_hand();
        let p = fixtures::case3_table_params();
        let tau = spring_torques(&h, &p, &[0.0; 8]).unwrap();
        assert!(tau[2] > 0.0);
        assert_abs_diff_eq!(tau[3], 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn column_scaling_is_compensated(t in proptest::collection::vec(0.0f64..5.0, 3), alpha in 0.1f64..10.0, col in 0usize..3) {
            let a = actuation_matrix_case1(&fixtures::case1_table_params()).unwrap();
            let mut a2 = a.clone();
            for r in 0..8 {
                a2[(r, col)] *= alpha;
            }
            let mut t2 = t.clone();
            t2[col] /= alpha;
            let x = a.mul_vec(&t);
            let y = a2.mul_vec(&t2);
            for i in 0..8 {
                prop_assert!((x[i] - y[i]).abs() < 1e-12 * (1.0 + x[i].abs()));
            }
        }

        #[test]
        fn case3_travel_gradient_is_actuation_transpose(th in proptest::collection::vec(-0.7f64..0.7, 8)) {
            let hand = fixtures::case3_hand();
            let params = fixtures::case3_table_params();
            let a = actuation_matrix(&hand, &params, &th).unwrap();
            let h = 1e-6;
            for d in 0..8 {
                let mut tp = th.clone();
                let mut tm = th.clone();
                tp[d] += h;
                tm[d] -= h;
                let sp = travel_vector(&hand, &params, &tp).unwrap();
                let sm = travel_vector(&hand, &params, &tm).unwrap();
                for t in 0..5 {
                    prop_assert!(((sp[t] - sm[t]) / (2.0 * h) - a[(d, t)]).abs() < 1e-4);
                }
            }
        }
    }
}
