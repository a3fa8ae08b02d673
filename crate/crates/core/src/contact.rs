//! Linearized point contact with friction and per-grasp matrix assembly.

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::kinematics::{self, Pose};
use crate::linalg::Mat;
use crate::model::{GraspRecord, GraspTag, HandModel};
use crate::scalar::Real;

/// Generators `D_k = [n̂, t̂₁ … t̂_e]` and weights row `F_k = [−μ, 1 … 1]`.
///
/// `β ≥ 0 ∧ F_k·β ≤ 0` keeps the force `D_k·β` inside the inscribed friction
/// pyramid. Tangent `j` sits at angle `2πj/e` from a first tangent obtained by
/// Gram–Schmidt of the world axis least aligned with the normal.
pub fn contact_generators<T: Real>(normal: Vec3<T>, mu: T, edges: usize) -> Result<(Mat<T>, Vec<T>)> {
    let n = geom::normalize(normal).ok_or_else(|| Error::invalid("contact.normal", "zero normal"))?;
    if !(mu > T::zero()) {
        return Err(Error::invalid("contact.mu", "nonpositive friction coefficient"));
    }
    if edges < 3 {
        return Err(Error::invalid("pyramid_edges", "need at least 3 pyramid edges"));
    }
    let mut axis = 0;
    for i in 1..3 {
        if n[i].abs() < n[axis].abs() {
            axis = i;
        }
    }
    let mut a = [T::zero(); 3];
    a[axis] = T::one();
    let t1 = geom::normalize(geom::sub(a, geom::scale(n, geom::dot(a, n)))).expect("axis not parallel to normal");
    let t2 = geom::cross(n, t1);
    let mut d = Mat::zeros(3, edges + 1);
    d.set_column(0, &n);
    for j in 0..edges {
        let ang = T::two() * T::PI() * T::from_usize(j) / T::from_usize(edges);
        let (s, c) = ang.sin_cos();
        let t = geom::add(geom::scale(t1, c), geom::scale(t2, s));
        d.set_column(j + 1, &t);
    }
    let mut f = vec![T::one(); edges + 1];
    f[0] = -mu;
    Ok((d, f))
}

/// Per-grasp matrices in world frame.
#[derive(Debug, Clone)]
pub struct GraspMatrices {
    pub grasp_id: String,
    /// 3n_c × m
    pub j: Mat<f64>,
    /// 6 × 3n_c
    pub g: Mat<f64>,
    /// 3n_c × (e+1)n_c, block diagonal
    pub d: Mat<f64>,
    /// n_c × (e+1)n_c, block diagonal
    pub f: Mat<f64>,
    pub points: Vec<Vec3<f64>>,
    pub normals: Vec<Vec3<f64>>,
    pub edges: usize,
}

impl GraspMatrices {
    pub fn contact_count(&self) -> usize {
        self.points.len()
    }

    /// `JᵀD`, the joint torques produced by unit generator weights.
    pub fn jt_d(&self) -> Mat<f64> {
        self.j.tr_matmul(&self.d)
    }

    pub fn gd(&self) -> Mat<f64> {
        self.g.matmul(&self.d)
    }
}

pub fn assemble_grasp_matrices(hand: &HandModel, grasp: &GraspRecord, edges: usize) -> Result<GraspMatrices> {
    if grasp.tag != GraspTag::Desired {
        return Err(Error::invalid(format!("grasp {}", grasp.id), "contact matrices need a desired grasp"));
    }
    let pose: Pose = kinematics::forward_kinematics(hand, &grasp.theta)?;
    let nc = grasp.contacts.len();
    let mut points = Vec::with_capacity(nc);
    let mut normals = Vec::with_capacity(nc);
    for c in &grasp.contacts {
        let (p, n) = kinematics::contact_world(hand, &pose, c)?;
        points.push(p);
        normals.push(n);
    }
    let j = kinematics::contact_jacobian(hand, &pose, &grasp.contacts)?;
    let g = kinematics::grasp_map(&points)?;
    let w = edges + 1;
    let mut d = Mat::zeros(3 * nc, w * nc);
    let mut f = Mat::zeros(nc, w * nc);
    for (k, c) in grasp.contacts.iter().enumerate() {
        let (dk, fk) = contact_generators(normals[k], c.mu, edges)?;
        d.set_block(3 * k, w * k, &dk);
        for (i, v) in fk.into_iter().enumerate() {
            f[(k, w * k + i)] = v;
        }
    }
    Ok(GraspMatrices { grasp_id: grasp.id.clone(), j, g, d, f, points, normals, edges })
}
