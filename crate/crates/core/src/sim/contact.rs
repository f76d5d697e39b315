use nalgebra::{Point3, Unit, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::kinematics::{JointVector, KinematicChain, Pose, Wrench};

/// Where on the arm a contact plane is probed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame", rename_all = "snake_case")]
pub enum Attachment {
    /// Point given in the hand frame; seen by the wrist sensor.
    Hand { offset: [f64; 3] },
    /// Point given in joint frame `index` (0-based); invisible to the wrist
    /// sensor.
    Link { index: usize, offset: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPlane {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    /// N/m
    #[serde(default = "default_stiffness")]
    pub stiffness: f64,
    /// N·s/m
    #[serde(default = "default_damping")]
    pub damping: f64,
    pub attachment: Attachment,
}

fn default_stiffness() -> f64 {
    20000.0
}

fn default_damping() -> f64 {
    50.0
}

impl ContactPlane {
    pub fn validate(&self) -> Result<(), String> {
        let n = Vector3::from(self.normal).norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(format!("contact normal must be unit length (norm {n})"));
        }
        if !(self.stiffness > 0.0) || !(self.damping >= 0.0) {
            return Err("contact stiffness must be positive and damping non-negative".into());
        }
        if let Attachment::Link { index, .. } = self.attachment {
            if index >= crate::kinematics::DOF {
                return Err(format!("contact link index {index} out of range"));
            }
        }
        Ok(())
    }

    fn unit_normal(&self) -> Unit<Vector3<f64>> {
        Unit::new_normalize(Vector3::from(self.normal))
    }

    /// Penetration depth (positive inside) and normal force on a point
    /// moving with velocity `v`, both world frame.
    pub fn point_force(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let n = self.unit_normal();
        let depth = -(p - Vector3::from(self.point)).dot(&n);
        if depth <= 0.0 {
            return (depth, Vector3::zeros());
        }
        let mag = (self.stiffness * depth - self.damping * v.dot(&n)).max(0.0);
        (depth, n.into_inner() * mag)
    }

    /// Load on the arm from this plane.
    pub fn evaluate(&self, chain: &KinematicChain, q: &JointVector, qdot: &JointVector) -> ContactLoad {
        match self.attachment {
            Attachment::Hand { offset } => {
                let pose = chain.forward_kinematics(q);
                let twist = chain.zero_jacobian(q) * qdot;
                let w = contact_wrench(self, &pose, &twist, &Vector3::from(offset));
                let mut wv = Vector6::zeros();
                wv.fixed_rows_mut::<3>(0).copy_from(&w.force);
                wv.fixed_rows_mut::<3>(3).copy_from(&w.torque);
                let tau = chain.zero_jacobian(q).transpose() * wv;
                let inv = pose.rotation.inverse();
                ContactLoad {
                    tau_ext: tau,
                    hand_wrench: Wrench::new(inv * w.force, inv * w.torque),
                    force_world: w.force,
                }
            }
            Attachment::Link { index, offset } => {
                let off = Vector3::from(offset);
                let p = chain.point_position(q, index, &off);
                let jp = chain.point_jacobian(q, index, &off);
                let (_, f) = self.point_force(&p, &(jp * qdot));
                ContactLoad { tau_ext: jp.transpose() * f, hand_wrench: Wrench::zero(), force_world: f }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactLoad {
    pub tau_ext: JointVector,
    /// Part of the load the wrist sensor measures, hand frame.
    pub hand_wrench: Wrench,
    pub force_world: Vector3<f64>,
}

/// Penalty wrench on a frame from a plane touching the point `offset`
/// (frame coordinates). `frame_vel` is the frame twist `[v; w]` in world
/// axes; the result is in world axes about the frame origin.
pub fn contact_wrench(plane: &ContactPlane, frame_pose: &Pose, frame_vel: &Vector6<f64>, offset: &Vector3<f64>) -> Wrench {
    let origin = frame_pose.translation.vector;
    let p = (frame_pose * Point3::from(*offset)).coords;
    let v: Vector3<f64> = frame_vel.fixed_rows::<3>(0).into_owned();
    let w: Vector3<f64> = frame_vel.fixed_rows::<3>(3).into_owned();
    let vp = v + w.cross(&(p - origin));
    let (_, f) = plane.point_force(&p, &vp);
    Wrench::new(f, (p - origin).cross(&f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor() -> ContactPlane {
        ContactPlane {
            point: [0.0, 0.0, 0.0],
            normal: [0.0, 0.0, 1.0],
            stiffness: 20000.0,
            damping: 50.0,
            attachment: Attachment::Hand { offset: [0.0, 0.0, 0.0] },
        }
    }

    #[test]
    fn above_plane_is_free() {
        let w = contact_wrench(&floor(), &Pose::translation(0.0, 0.0, 0.01), &Vector6::zeros(), &Vector3::zeros());
        assert_eq!(w, Wrench::zero());
    }

    #[test]
    fn hooke_at_one_millimetre() {
        let w = contact_wrench(&floor(), &Pose::translation(0.0, 0.0, -0.001), &Vector6::zeros(), &Vector3::zeros());
        assert!((w.force.z - 20.0).abs() < 1e-9);
        assert_eq!(w.torque, Vector3::zeros());
    }

    #[test]
    fn never_attractive() {
        for vz in [-2.0, -0.5, 0.0, 0.5, 2.0, 50.0] {
            for depth in [1e-5, 1e-3, 1e-2] {
                let mut tw = Vector6::zeros();
                tw[2] = vz;
                let w = contact_wrench(&floor(), &Pose::translation(0.0, 0.0, -depth), &tw, &Vector3::zeros());
                assert!(w.force.z >= 0.0);
            }
        }
    }

    #[test]
    fn offset_point_produces_torque() {
        let w = contact_wrench(&floor(), &Pose::translation(0.0, 0.0, 0.0), &Vector6::zeros(), &Vector3::new(0.1, 0.0, -0.001));
        assert!((w.torque.y + 0.1 * 20.0).abs() < 1e-9);
    }

    #[test]
    fn link_contact_bypasses_sensor() {
        let chain = KinematicChain::panda();
        let q = JointVector::from_row_slice(&[0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.785]);
        let p = chain.point_position(&q, 5, &Vector3::zeros());
        let plane = ContactPlane {
            point: [0.0, 0.0, p.z + 0.002],
            attachment: Attachment::Link { index: 5, offset: [0.0, 0.0, 0.0] },
            ..floor()
        };
        let load = plane.evaluate(&chain, &q, &JointVector::zeros());
        assert_eq!(load.hand_wrench, Wrench::zero());
        assert!((load.force_world.z - 40.0).abs() < 1e-6);
        assert!(load.tau_ext.norm() > 0.0);
    }
}
