use std::path::Path;

use nalgebra::{Isometry3, SMatrix, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{pose_from_parts, quat_wxyz, JointVector, Matrix6x7, Pose, DOF};

/// Version tag written to and required in chain description files.
pub const CHAIN_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("expected {DOF} joints, found {0}")]
    JointCount(usize),
    #[error("joint {joint}: lower limit {lo} is not below upper limit {hi}")]
    Limits { joint: usize, lo: f64, hi: f64 },
    #[error("joint {joint}: velocity limit {value} must be positive")]
    VelocityLimit { joint: usize, value: f64 },
    #[error("joint {joint}: rotation axis norm {norm} is not 1")]
    Axis { joint: usize, norm: f64 },
    #[error("unsupported chain format {0}, expected {CHAIN_FORMAT}")]
    Format(u32),
    #[error("chain file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("chain file: {0}")]
    Io(#[from] std::io::Error),
}

/// Revolute joint: a fixed parent-to-joint transform followed by a rotation
/// about `axis` (expressed in the joint frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub axis: Unit<Vector3<f64>>,
    pub origin: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    pub joints: Vec<Joint>,
    pub position_limits: [[f64; 2]; DOF],
    pub velocity_limits: [f64; DOF],
    /// Pose of the chain base in world.
    pub mount: Pose,
    /// Common hand frame relative to the last link.
    pub tool: Pose,
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        position_limits: [[f64; 2]; DOF],
        velocity_limits: [f64; DOF],
        mount: Pose,
        tool: Pose,
    ) -> Result<Self, ChainError> {
        let chain = Self { name: name.into(), joints, position_limits, velocity_limits, mount, tool };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.joints.len() != DOF {
            return Err(ChainError::JointCount(self.joints.len()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let norm = j.axis.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(ChainError::Axis { joint: i, norm });
            }
            let [lo, hi] = self.position_limits[i];
            if !(lo < hi) {
                return Err(ChainError::Limits { joint: i, lo, hi });
            }
            let v = self.velocity_limits[i];
            if !(v > 0.0) {
                return Err(ChainError::VelocityLimit { joint: i, value: v });
            }
        }
        Ok(())
    }

    /// Panda-like arm built from the published modified-DH table, with the
    /// hand frame 10 cm beyond the flange. The numbers are configuration.
    pub fn panda() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        let a = [0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088];
        let d = [0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0];
        let alpha = [0.0, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2];
        let joints = (0..DOF)
            .map(|i| {
                let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), alpha[i]);
                let t = Vector3::new(a[i], 0.0, 0.0) + rx * Vector3::new(0.0, 0.0, d[i]);
                Joint { axis: Vector3::z_axis(), origin: Isometry3::from_parts(Translation3::from(t), rx) }
            })
            .collect();
        let tool = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, 0.107 + 0.1),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -FRAC_PI_4),
        );
        Self {
            name: "panda".into(),
            joints,
            position_limits: [
                [-2.8973, 2.8973],
                [-1.7628, 1.7628],
                [-2.8973, 2.8973],
                [-3.0718, -0.0698],
                [-2.8973, 2.8973],
                [-0.0175, 3.7525],
                [-2.8973, 2.8973],
            ],
            velocity_limits: [2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61],
            mount: Pose::identity(),
            tool,
        }
    }

    pub fn with_mount(mut self, mount: Pose) -> Self {
        self.mount = mount;
        self
    }

    pub fn with_tool(mut self, tool: Pose) -> Self {
        self.tool = tool;
        self
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.position_limits[i][0]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.position_limits[i][1]
    }

    pub fn mid_configuration(&self) -> JointVector {
        JointVector::from_fn(|i, _| 0.5 * (self.lower(i) + self.upper(i)))
    }

    pub fn clamp(&self, q: &JointVector) -> JointVector {
        JointVector::from_fn(|i, _| q[i].clamp(self.lower(i), self.upper(i)))
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        (0..DOF).all(|i| q[i] >= self.lower(i) && q[i] <= self.upper(i))
    }

    pub fn velocity_limit_vector(&self) -> JointVector {
        JointVector::from_row_slice(&self.velocity_limits)
    }

    /// World pose of every joint frame after its rotation has been applied.
    pub fn link_frames(&self, q: &JointVector) -> [Pose; DOF] {
        let mut frames = [Pose::identity(); DOF];
        let mut t = self.mount;
        for (i, j) in self.joints.iter().enumerate() {
            t = t * j.origin * UnitQuaternion::from_axis_angle(&j.axis, q[i]);
            frames[i] = t;
        }
        frames
    }

    /// Pose of the common hand frame in world.
    pub fn forward_kinematics(&self, q: &JointVector) -> Pose {
        self.link_frames(q)[DOF - 1] * self.tool
    }

    fn world_axes(&self, frames: &[Pose; DOF]) -> [Vector3<f64>; DOF] {
        let mut axes = [Vector3::zeros(); DOF];
        for i in 0..DOF {
            axes[i] = frames[i].rotation * self.joints[i].axis.into_inner();
        }
        axes
    }

    /// Jacobian mapping joint rates to the hand twist expressed in the hand
    /// frame, rows `[v; w]`.
    pub fn body_jacobian(&self, q: &JointVector) -> Matrix6x7 {
        let frames = self.link_frames(q);
        let hand = frames[DOF - 1] * self.tool;
        let inv = hand.rotation.inverse();
        let axes = self.world_axes(&frames);
        let pe = hand.translation.vector;
        let mut j = Matrix6x7::zeros();
        for c in 0..DOF {
            let lin = inv * axes[c].cross(&(pe - frames[c].translation.vector));
            let ang = inv * axes[c];
            j.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, c).copy_from(&ang);
        }
        j
    }

    /// Jacobian mapping joint rates to the hand-origin twist expressed in
    /// world axes, rows `[v; w]`.
    pub fn zero_jacobian(&self, q: &JointVector) -> Matrix6x7 {
        let frames = self.link_frames(q);
        let pe = (frames[DOF - 1] * self.tool).translation.vector;
        let axes = self.world_axes(&frames);
        let mut j = Matrix6x7::zeros();
        for c in 0..DOF {
            let lin = axes[c].cross(&(pe - frames[c].translation.vector));
            j.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, c).copy_from(&axes[c]);
        }
        j
    }

    /// World linear velocity Jacobian of a point rigidly attached to joint
    /// frame `link` (0-based), given in that frame's coordinates.
    pub fn point_jacobian(&self, q: &JointVector, link: usize, point_in_link: &Vector3<f64>) -> SMatrix<f64, 3, DOF> {
        let frames = self.link_frames(q);
        let p = frames[link] * nalgebra::Point3::from(*point_in_link);
        let axes = self.world_axes(&frames);
        let mut j = SMatrix::<f64, 3, DOF>::zeros();
        for c in 0..=link.min(DOF - 1) {
            j.set_column(c, &axes[c].cross(&(p.coords - frames[c].translation.vector)));
        }
        j
    }

    /// World position of a point attached to joint frame `link`.
    pub fn point_position(&self, q: &JointVector, link: usize, point_in_link: &Vector3<f64>) -> Vector3<f64> {
        (self.link_frames(q)[link] * nalgebra::Point3::from(*point_in_link)).coords
    }

    pub fn to_file(&self) -> ChainFile {
        ChainFile {
            format: CHAIN_FORMAT,
            name: self.name.clone(),
            joints: self
                .joints
                .iter()
                .enumerate()
                .map(|(i, j)| JointFile {
                    axis: [j.axis.x, j.axis.y, j.axis.z],
                    origin_translation: j.origin.translation.vector.into(),
                    origin_rotation_quaternion: quat_wxyz(&j.origin),
                    limits: self.position_limits[i],
                    velocity_limit: self.velocity_limits[i],
                })
                .collect(),
            mount: PoseFile::from(&self.mount),
            tool: PoseFile::from(&self.tool),
        }
    }

    pub fn from_file(file: &ChainFile) -> Result<Self, ChainError> {
        if file.format != CHAIN_FORMAT {
            return Err(ChainError::Format(file.format));
        }
        if file.joints.len() != DOF {
            return Err(ChainError::JointCount(file.joints.len()));
        }
        let mut position_limits = [[0.0; 2]; DOF];
        let mut velocity_limits = [0.0; DOF];
        let mut joints = Vec::with_capacity(DOF);
        for (i, j) in file.joints.iter().enumerate() {
            let axis = Vector3::from(j.axis);
            let norm = axis.norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(ChainError::Axis { joint: i, norm });
            }
            joints.push(Joint {
                axis: Unit::new_normalize(axis),
                origin: pose_from_parts(j.origin_translation, j.origin_rotation_quaternion),
            });
            position_limits[i] = j.limits;
            velocity_limits[i] = j.velocity_limit;
        }
        Self::new(file.name.clone(), joints, position_limits, velocity_limits, file.mount.to_pose(), file.tool.to_pose())
    }

    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("chain serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk chain description (`format: 1`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainFile {
    pub format: u32,
    #[serde(default)]
    pub name: String,
    pub joints: Vec<JointFile>,
    #[serde(default)]
    pub mount: PoseFile,
    #[serde(default)]
    pub tool: PoseFile,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JointFile {
    pub axis: [f64; 3],
    pub origin_translation: [f64; 3],
    /// `[w, x, y, z]`
    pub origin_rotation_quaternion: [f64; 4],
    /// `[lower, upper]` in rad.
    pub limits: [f64; 2],
    /// rad/s
    pub velocity_limit: f64,
}

/// Pose as written in config files; the quaternion is `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PoseFile {
    pub translation: [f64; 3],
    #[serde(default = "identity_wxyz")]
    pub rotation: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Default for PoseFile {
    fn default() -> Self {
        Self { translation: [0.0; 3], rotation: identity_wxyz() }
    }
}

impl PoseFile {
    pub fn to_pose(&self) -> Pose {
        pose_from_parts(self.translation, self.rotation)
    }
}

impl From<&Pose> for PoseFile {
    fn from(p: &Pose) -> Self {
        Self { translation: p.translation.vector.into(), rotation: quat_wxyz(p) }
    }
}
