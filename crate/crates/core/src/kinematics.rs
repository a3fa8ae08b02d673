//! Forward kinematics, contact Jacobians, grasp maps, tendon excursion and the
//! three-tendon universal joint model.

use crate::error::{Error, Result};
use crate::geom::{self, Rot3, Transform, Vec3};
use crate::linalg::Mat;
use crate::model::{ContactRecord, Crossing, HandModel, JointKind, ParamVector, Quantity, UJointSpec};
use crate::scalar::Real;

/// World-frame transforms of every link plus the world axis and origin of
/// every DoF.
#[derive(Debug, Clone)]
pub struct Pose {
    pub links: Vec<Transform<f64>>,
    pub dof_axes: Vec<Vec3<f64>>,
    pub dof_origins: Vec<Vec3<f64>>,
}

impl Pose {
    pub fn max_orthonormality_error(&self) -> f64 {
        self.links.iter().map(|t| geom::orthonormality_error(&t.rot)).fold(0.0, f64::max)
    }
}

pub fn forward_kinematics(hand: &HandModel, theta: &[f64]) -> Result<Pose> {
    let m = hand.dof_count();
    if theta.len() != m {
        return Err(Error::invalid("theta", format!("dimension mismatch: {} angles for {m} DoF", theta.len())));
    }
    let idx = &hand.index;
    let nl = hand.links.len();
    let mut links = vec![Transform::identity(); nl];
    let mut dof_axes = vec![[0.0; 3]; m];
    let mut dof_origins = vec![[0.0; 3]; m];
    // child link of each joint
    let mut child = vec![usize::MAX; hand.joints.len()];
    for (l, &j) in idx.link_joint.iter().enumerate() {
        child[j] = l;
    }
    for &j in &idx.joint_order {
        let joint = &hand.joints[j];
        let parent = match idx.joint_parent_link[j] {
            Some(l) => links[l],
            None => Transform::identity(),
        };
        let origin = parent.apply(joint.origin);
        let d0 = idx.dof_offset[j];
        let rot = match &joint.kind {
            JointKind::Revolute { axis } => {
                dof_axes[d0] = parent.apply_vector(*axis);
                dof_origins[d0] = origin;
                geom::axis_angle(*axis, theta[d0])
            }
            JointKind::Universal { pitch_axis, yaw_axis, .. } => {
                let rp = geom::axis_angle(*pitch_axis, theta[d0]);
                dof_axes[d0] = parent.apply_vector(*pitch_axis);
                dof_axes[d0 + 1] = parent.apply_vector(geom::rot_apply(&rp, *yaw_axis));
                dof_origins[d0] = origin;
                dof_origins[d0 + 1] = origin;
                geom::rot_mul(&rp, &geom::axis_angle(*yaw_axis, theta[d0 + 1]))
            }
        };
        links[child[j]] = Transform { rot: geom::rot_mul(&parent.rot, &rot), trans: origin };
    }
    Ok(Pose { links, dof_axes, dof_origins })
}

/// World position and inward normal of a contact.
pub fn contact_world(hand: &HandModel, pose: &Pose, c: &ContactRecord) -> Result<(Vec3<f64>, Vec3<f64>)> {
    let &l = hand
        .index
        .link_pos
        .get(&c.link)
        .ok_or_else(|| Error::invalid("contact.link", format!("unknown link id \"{}\"", c.link)))?;
    let t = &pose.links[l];
    Ok((t.apply(c.position), t.apply_vector(c.normal)))
}

/// Stacked 3n_c × m Jacobian mapping joint rates to contact-point velocities.
pub fn contact_jacobian(hand: &HandModel, pose: &Pose, contacts: &[ContactRecord]) -> Result<Mat<f64>> {
    let m = hand.dof_count();
    let mut jac = Mat::zeros(3 * contacts.len(), m);
    for (k, c) in contacts.iter().enumerate() {
        let Some(&l) = hand.index.link_pos.get(&c.link) else {
            log::warn!("contact {k} on \"{}\" has no joint path; zero Jacobian block", c.link);
            continue;
        };
        let p = pose.links[l].apply(c.position);
        for &j in &hand.index.link_path[l] {
            for dof in 0..hand.joints[j].dofs.len() {
                let d = hand.dof_index(j, dof);
                let col = geom::cross(pose.dof_axes[d], geom::sub(p, pose.dof_origins[d]));
                for r in 0..3 {
                    jac[(3 * k + r, d)] = col[r];
                }
            }
        }
    }
    Ok(jac)
}

/// Mean of the given points; the wrench reference of [`grasp_map`].
pub fn centroid<T: Real>(points: &[Vec3<T>]) -> Vec3<T> {
    let mut c = [T::zero(); 3];
    for p in points {
        c = geom::add(c, *p);
    }
    geom::scale(c, T::one() / T::from_usize(points.len().max(1)))
}

/// 6 × 3n_c grasp map about the mean contact point: force rows, then torque
/// rows (Nmm).
pub fn grasp_map<T: Real>(points: &[Vec3<T>]) -> Result<Mat<T>> {
    if points.is_empty() {
        return Err(Error::invalid("contacts", "grasp map needs at least one contact"));
    }
    grasp_map_about(points, centroid(points))
}

pub fn grasp_map_about<T: Real>(points: &[Vec3<T>], reference: Vec3<T>) -> Result<Mat<T>> {
    if points.is_empty() {
        return Err(Error::invalid("contacts", "grasp map needs at least one contact"));
    }
    let mut g = Mat::zeros(6, 3 * points.len());
    for (k, p) in points.iter().enumerate() {
        let r = geom::sub(*p, reference);
        for i in 0..3 {
            g[(i, 3 * k + i)] = T::one();
        }
        // torque = r × f
        let c = 3 * k;
        g[(3, c + 1)] = -r[2];
        g[(3, c + 2)] = r[1];
        g[(4, c)] = r[2];
        g[(4, c + 2)] = -r[0];
        g[(5, c)] = -r[1];
        g[(5, c + 1)] = r[0];
    }
    Ok(g)
}

/// Attachment geometry of a three-tendon universal joint in its joint frame.
#[derive(Debug, Clone, PartialEq)]
pub struct UJointGeometry<T> {
    /// Lower platform points (fixed to the parent).
    pub a: [Vec3<T>; 3],
    /// Upper platform points (moving with the child), rest coordinates.
    pub b: [Vec3<T>; 3],
    pub pitch_axis: Vec3<T>,
    pub yaw_axis: Vec3<T>,
}

impl<T: Real> UJointGeometry<T> {
    /// Points on a circle of `radius` at the given polar angles, the lower set
    /// at `-separation/2` and the upper set at `+separation/2`; pitch about x,
    /// yaw about y.
    pub fn circular(radius: T, separation: T, angles_deg: [f64; 3]) -> Self {
        let h = separation * T::half();
        let mut a = [[T::zero(); 3]; 3];
        let mut b = [[T::zero(); 3]; 3];
        for i in 0..3 {
            let phi = T::lit(angles_deg[i].to_radians());
            let (s, c) = phi.sin_cos();
            a[i] = [radius * c, radius * s, -h];
            b[i] = [radius * c, radius * s, h];
        }
        let (o, z) = (T::one(), T::zero());
        UJointGeometry { a, b, pitch_axis: [o, z, z], yaw_axis: [z, o, z] }
    }

    pub fn rotation(&self, pitch: T, yaw: T) -> Rot3<T> {
        geom::rot_mul(&geom::axis_angle(self.pitch_axis, pitch), &geom::axis_angle(self.yaw_axis, yaw))
    }

    /// `l_i = ‖A_i − R(pitch, yaw)·B_i‖`.
    pub fn lengths(&self, pitch: T, yaw: T) -> [T; 3] {
        let r = self.rotation(pitch, yaw);
        let mut out = [T::zero(); 3];
        for i in 0..3 {
            out[i] = geom::norm(geom::sub(self.a[i], geom::rot_apply(&r, self.b[i])));
        }
        out
    }

    /// Signed moment arms `ρ[d][i] = ω_d · (A_i × u_i)` with `u_i` the unit
    /// vector from the upper attachment toward `A_i`; row 0 pitch, row 1 yaw.
    pub fn moment_arms(&self, pitch: T, yaw: T) -> Result<[[T; 3]; 2]> {
        let rp = geom::axis_angle(self.pitch_axis, pitch);
        let r = geom::rot_mul(&rp, &geom::axis_angle(self.yaw_axis, yaw));
        let omega = [self.pitch_axis, geom::rot_apply(&rp, self.yaw_axis)];
        let mut out = [[T::zero(); 3]; 2];
        for i in 0..3 {
            let v = geom::sub(self.a[i], geom::rot_apply(&r, self.b[i]));
            let l = geom::norm(v);
            if !(l.as_f64() > 1e-9) {
                return Err(Error::Numerical(format!("degenerate tendon line {i}: length {l}")));
            }
            let u = geom::scale(v, T::one() / l);
            let tq = geom::cross(self.a[i], u);
            for d in 0..2 {
                out[d][i] = geom::dot(omega[d], tq);
            }
        }
        Ok(out)
    }
}

fn quantity(hand: &HandModel, params: &ParamVector, q: &Quantity) -> Result<f64> {
    match q {
        Quantity::Value(v) => Ok(*v),
        Quantity::Slot(s) => hand.params.value(params, s),
    }
}

/// Resolves a universal joint's geometry against a parameter vector.
pub fn ujoint_geometry(hand: &HandModel, joint: usize, params: &ParamVector) -> Result<UJointGeometry<f64>> {
    match &hand.joints[joint].kind {
        JointKind::Universal { pitch_axis, yaw_axis, geometry } => {
            let UJointSpec { radius, separation, angles_deg } = geometry;
            let mut g = UJointGeometry::circular(
                quantity(hand, params, radius)?,
                quantity(hand, params, separation)?,
                *angles_deg,
            );
            g.pitch_axis = *pitch_axis;
            g.yaw_axis = *yaw_axis;
            Ok(g)
        }
        _ => Err(Error::invalid(format!("joints[{joint}]"), "not a universal joint")),
    }
}

pub fn ujoint_tendon_lengths<T: Real>(geom: &UJointGeometry<T>, pitch: T, yaw: T) -> [T; 3] {
    geom.lengths(pitch, yaw)
}

pub fn ujoint_moment_arms<T: Real>(geom: &UJointGeometry<T>, pitch: T, yaw: T) -> Result<[[T; 3]; 2]> {
    geom.moment_arms(pitch, yaw)
}

/// Tendon travel from the zero pose to `theta`, mm per tendon. Constant
/// crossings contribute `sign·mult·r·θ`; line crossings contribute
/// `mult·(l(0) − l(θ))`.
pub fn tendon_excursion(hand: &HandModel, params: &ParamVector, theta: &[f64]) -> Result<Vec<f64>> {
    let m = hand.dof_count();
    if theta.len() != m {
        return Err(Error::invalid("theta", format!("dimension mismatch: {} angles for {m} DoF", theta.len())));
    }
    let mut s = vec![0.0; hand.tendons.len()];
    for (t, tendon) in hand.tendons.iter().enumerate() {
        for c in &tendon.crossings {
            let j = hand.index.joint_pos[c.joint()];
            match c {
                Crossing::Constant { dof, slot, sign, multiplicity, .. } => {
                    let r = hand.params.value(params, slot)?;
                    s[t] += sign * multiplicity * r * theta[hand.dof_index(j, *dof)];
                }
                Crossing::UjointLine { line, multiplicity, .. } => {
                    let g = ujoint_geometry(hand, j, params)?;
                    let d0 = hand.dof_index(j, 0);
                    let l0 = g.lengths(0.0, 0.0)[*line];
                    let l = g.lengths(theta[d0], theta[d0 + 1])[*line];
                    s[t] += multiplicity * (l0 - l);
                }
            }
        }
    }
    Ok(s)
}
