//! 3-vectors and rotation matrices as plain arrays.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];
pub type Rot3<T> = [[T; 3]; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

pub fn normalize<T: Real>(a: Vec3<T>) -> Option<Vec3<T>> {
    let n = norm(a);
    if n > T::zero() && n.is_finite() {
        Some(scale(a, T::one() / n))
    } else {
        None
    }
}

pub fn identity<T: Real>() -> Rot3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

#[inline]
pub fn rot_apply<T: Real>(r: &Rot3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
}

pub fn rot_mul<T: Real>(a: &Rot3<T>, b: &Rot3<T>) -> Rot3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn rot_transpose<T: Real>(r: &Rot3<T>) -> Rot3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[j][i];
        }
    }
    out
}

/// Rodrigues rotation about a unit axis.
pub fn axis_angle<T: Real>(axis: Vec3<T>, angle: T) -> Rot3<T> {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let v = T::one() - c;
    [
        [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
        [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
        [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
    ]
}

/// Largest deviation of `rᵀr` from the identity.
pub fn orthonormality_error<T: Real>(r: &Rot3<T>) -> T {
    let p = rot_mul(&rot_transpose(r), r);
    let mut e = T::zero();
    for (i, row) in p.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            let target = if i == j { T::one() } else { T::zero() };
            e = e.max((x - target).abs());
        }
    }
    e
}

/// Rigid transform: `x ↦ rot·x + trans`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform<T> {
    pub rot: Rot3<T>,
    pub trans: Vec3<T>,
}

impl<T: Real> Transform<T> {
    pub fn identity() -> Self {
        Transform { rot: identity(), trans: [T::zero(); 3] }
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        add(rot_apply(&self.rot, p), self.trans)
    }

    pub fn apply_vector(&self, v: Vec3<T>) -> Vec3<T> {
        rot_apply(&self.rot, v)
    }

    pub fn compose(&self, other: &Transform<T>) -> Self {
        Transform { rot: rot_mul(&self.rot, &other.rot), trans: self.apply(other.trans) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let v = rot_apply(&r, [1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rotations_stay_orthonormal(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, ang in -6.0f64..6.0) {
            let axis = normalize([ax, ay, az]).unwrap();
            let r = axis_angle(axis, ang);
            prop_assert!(orthonormality_error(&r) < 1e-12);
            let fixed = rot_apply(&r, axis);
            prop_assert!(norm(sub(fixed, axis)) < 1e-12);
        }
    }
}
