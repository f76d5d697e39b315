//! Serial-chain kinematics shared by both arm controllers.
//!
//! Every wrench and twist is ordered `[linear; angular]`, so `tau = J^T F`
//! holds with `F = [force; torque]` for the body, zero and point Jacobians
//! produced here.

mod chain;
mod ik;
mod linalg;

pub use chain::{ChainError, ChainFile, Joint, JointFile, KinematicChain, PoseFile, CHAIN_FORMAT};
pub use ik::{random_configuration, solve_ik, IkError, IkParams, IkSolution};
pub use linalg::{damped_pinv, jt_pinv, nullspace_projector, LinalgError, NS_LAMBDA_DEFAULT};

use nalgebra::{Isometry3, SMatrix, SVector, Translation3, UnitQuaternion, Vector3, Vector6};

/// Number of joints of every supported arm.
pub const DOF: usize = 7;

/// Rigid transform: translation in metres plus a unit quaternion.
pub type Pose = Isometry3<f64>;
/// A 7-dimensional joint-space quantity (rad, rad/s or N·m depending on use).
pub type JointVector = SVector<f64, DOF>;
pub type Matrix6x7 = SMatrix<f64, 6, DOF>;
pub type Matrix7 = SMatrix<f64, DOF, DOF>;

/// 6D force/torque pair. The frame is implied by the producing function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub const fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Self { force, torque: Vector3::zeros() }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.torque);
        v
    }

    /// Re-expresses the wrench in frame `A`, given the pose of its current
    /// frame `B` in `A` (`a_from_b`). Torques are taken about the new origin.
    pub fn transformed(&self, a_from_b: &Pose) -> Wrench {
        let force = a_from_b.rotation * self.force;
        let torque = a_from_b.rotation * self.torque + a_from_b.translation.vector.cross(&force);
        Wrench { force, torque }
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench { force: self.force + rhs.force, torque: self.torque + rhs.torque }
    }
}

impl std::ops::Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench { force: self.force - rhs.force, torque: self.torque - rhs.torque }
    }
}

impl std::ops::Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench { force: -self.force, torque: -self.torque }
    }
}

/// Pose error of `current` relative to `target`, expressed in the frame of
/// `current`: `[R_c^T (p_t - p_c); log(R_c^T R_t)]`.
pub fn body_pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let inv = current.rotation.inverse();
    let lin = inv * (target.translation.vector - current.translation.vector);
    let rot = (inv * target.rotation).scaled_axis();
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(&lin);
    e.fixed_rows_mut::<3>(3).copy_from(&rot);
    e
}

/// Pose error of `current` relative to `goal`, expressed in world axes:
/// `[p_c - p_g; log(R_c R_g^T)]`. Zero at the goal; the impedance law pushes
/// along its negative.
pub fn world_pose_error(current: &Pose, goal: &Pose) -> Vector6<f64> {
    let lin = current.translation.vector - goal.translation.vector;
    let rot = (current.rotation * goal.rotation.inverse()).scaled_axis();
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(&lin);
    e.fixed_rows_mut::<3>(3).copy_from(&rot);
    e
}

/// Linear interpolation in translation and slerp in rotation.
pub fn interpolate_pose(from: &Pose, to: &Pose, s: f64) -> Pose {
    let s = s.clamp(0.0, 1.0);
    let t = from.translation.vector.lerp(&to.translation.vector, s);
    let r = from
        .rotation
        .try_slerp(&to.rotation, s, 1e-12)
        .unwrap_or(if s < 0.5 { from.rotation } else { to.rotation });
    Isometry3::from_parts(Translation3::from(t), r)
}

/// Builds a pose from a translation and a `[w, x, y, z]` quaternion, which is
/// renormalised.
pub fn pose_from_parts(translation: [f64; 3], wxyz: [f64; 4]) -> Pose {
    let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    Isometry3::from_parts(
        Translation3::new(translation[0], translation[1], translation[2]),
        UnitQuaternion::from_quaternion(q),
    )
}

/// `[w, x, y, z]` of a pose's rotation.
pub fn quat_wxyz(pose: &Pose) -> [f64; 4] {
    let q = pose.rotation.quaternion();
    [q.w, q.i, q.j, q.k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrench_transform_composes() {
        let w = Wrench::new(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.1, 0.2, -0.3));
        let t1 = Isometry3::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.3, -0.2, 0.1));
        let t2 = Isometry3::new(Vector3::new(-0.4, 0.0, 0.2), Vector3::new(0.0, 0.5, -0.7));
        let a = w.transformed(&t1).transformed(&t2);
        let b = w.transformed(&(t2 * t1));
        assert!((a.to_vector() - b.to_vector()).norm() < 1e-12);
    }

    #[test]
    fn body_error_is_zero_at_target() {
        let p = Isometry3::new(Vector3::new(0.3, 0.1, 0.5), Vector3::new(0.2, 0.1, 0.0));
        assert!(body_pose_error(&p, &p).norm() < 1e-15);
        assert!(world_pose_error(&p, &p).norm() < 1e-15);
    }

    #[test]
    fn pose_error_rotation_about_z() {
        let a = Pose::identity();
        let b = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, 0.0),
            UnitQuaternion::from_euler_angles(0.0, 0.0, FRAC_PI_2),
        );
        let e = body_pose_error(&a, &b);
        assert!((e[5] - FRAC_PI_2).abs() < 1e-12);
        let w = world_pose_error(&b, &a);
        assert!((w[5] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let a = Isometry3::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0));
        let b = Isometry3::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.0, 0.0, 1.0));
        let mid = interpolate_pose(&a, &b, 0.5);
        assert!((mid.translation.vector - Vector3::new(0.5, 1.0, 1.5)).norm() < 1e-12);
        assert!((mid.rotation.angle() - 0.5).abs() < 1e-12);
        assert_eq!(interpolate_pose(&a, &b, 1.0).translation, b.translation);
    }
}
