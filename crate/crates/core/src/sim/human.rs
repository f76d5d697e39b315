use std::f64::consts::TAU;

use nalgebra::{Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::kinematics::{interpolate_pose, pose_from_parts, Pose, Wrench};

/// Spring-damper grip of the human hand on the operator handle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanParams {
    /// N/m
    pub stiffness: f64,
    /// N·m/rad
    pub rot_stiffness: f64,
    /// N·s/m, on the velocity relative to the script.
    pub damping: f64,
    /// N·m·s/rad
    pub rot_damping: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self { stiffness: 300.0, rot_stiffness: 10.0, damping: 20.0, rot_damping: 0.3 }
    }
}

/// Pose offset relative to the start pose: world translation plus a
/// rotation applied in world axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    #[serde(default)]
    pub translation: [f64; 3],
    /// `[w, x, y, z]`
    #[serde(default = "identity_wxyz")]
    pub rotation: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Script {
    /// Stay at the start pose.
    Hold,
    /// Piecewise lerp/slerp between offsets; holds the last one.
    Waypoints { points: Vec<Waypoint> },
    /// Translation `amplitude * sin(2 pi f (t - start_s)) * axis` from
    /// `start_s` on.
    Sinusoid {
        axis: [f64; 3],
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        start_s: f64,
    },
    /// Several sinusoids on independent axes, summed.
    Mixed { components: Vec<SineComponent> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub axis: [f64; 3],
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub start_s: f64,
}

impl Script {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Script::Waypoints { points } => {
                if points.is_empty() {
                    return Err("waypoint script needs at least one point".into());
                }
                if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return Err("waypoint times must be strictly increasing".into());
                }
                if points.iter().any(|p| p.rotation.iter().all(|c| *c == 0.0)) {
                    return Err("waypoint rotation must be a non-zero quaternion".into());
                }
            }
            Script::Sinusoid { frequency_hz, .. } if !(*frequency_hz >= 0.0) => {
                return Err("sinusoid frequency must be non-negative".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Scripted hand pose at time `t`.
    pub fn pose(&self, start: &Pose, t: f64) -> Pose {
        let offset = match self {
            Script::Hold => Pose::identity(),
            Script::Waypoints { points } => waypoint_offset(points, t),
            Script::Sinusoid { axis, amplitude, frequency_hz, start_s } => {
                let s = if t < *start_s { 0.0 } else { (TAU * frequency_hz * (t - start_s)).sin() };
                Pose::from_parts(Translation3::from(Vector3::from(*axis) * (amplitude * s)), UnitQuaternion::identity())
            }
            Script::Mixed { components } => {
                let mut v = Vector3::zeros();
                for c in components {
                    if t >= c.start_s {
                        v += Vector3::from(c.axis) * (c.amplitude * (TAU * c.frequency_hz * (t - c.start_s) + c.phase).sin());
                    }
                }
                Pose::from_parts(Translation3::from(v), UnitQuaternion::identity())
            }
        };
        Pose::from_parts(
            Translation3::from(start.translation.vector + offset.translation.vector),
            offset.rotation * start.rotation,
        )
    }
}

fn waypoint_offset(points: &[Waypoint], t: f64) -> Pose {
    let to_pose = |w: &Waypoint| pose_from_parts(w.translation, w.rotation);
    let first = &points[0];
    if t <= first.t {
        return to_pose(first);
    }
    for w in points.windows(2) {
        if t <= w[1].t {
            let s = (t - w[0].t) / (w[1].t - w[0].t);
            return interpolate_pose(&to_pose(&w[0]), &to_pose(&w[1]), s);
        }
    }
    to_pose(points.last().unwrap())
}

/// Wrench the human applies to the handle, world axes about the hand
/// origin. `twist` is the handle twist `[v; w]` and `goal_twist` the
/// script's, both in world axes.
pub fn human_wrench(params: &HumanParams, goal: &Pose, hand: &Pose, twist: &Vector6<f64>, goal_twist: &Vector6<f64>) -> Wrench {
    let dp = goal.translation.vector - hand.translation.vector;
    let dr = (goal.rotation * hand.rotation.inverse()).scaled_axis();
    let dv = goal_twist - twist;
    let force = dp * params.stiffness + dv.fixed_rows::<3>(0) * params.damping;
    let torque = dr * params.rot_stiffness + dv.fixed_rows::<3>(3) * params.rot_damping;
    Wrench::new(force, torque)
}

/// World-axes twist that carries `a` to `b` in `dt`.
pub fn finite_twist(a: &Pose, b: &Pose, dt: f64) -> Vector6<f64> {
    let v = (b.translation.vector - a.translation.vector) / dt;
    let w = (b.rotation * a.rotation.inverse()).scaled_axis() / dt;
    let mut out = Vector6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&v);
    out.fixed_rows_mut::<3>(3).copy_from(&w);
    out
}
