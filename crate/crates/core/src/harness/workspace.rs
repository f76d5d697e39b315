//! Operator arm reachability over a set of human hand poses, compared
//! across candidate mounting poses.
//!
//! The pose set is either read from a file or drawn from [`ReachModel`],
//! a synthetic seated-reach distribution: hand positions on rays from the
//! shoulder, concentrated in front of the body, with a tail of fully
//! extended reaches and a spread of wrist orientations around palm-down.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{pose_from_parts, quat_wxyz, solve_ik, IkParams, KinematicChain, Pose};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("pose set is empty")]
    NoPoses,
    #[error("no mount candidates")]
    NoMounts,
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// A pose as stored in pose and mount files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    #[serde(default)]
    pub name: Option<String>,
    pub translation: [f64; 3],
    /// w, x, y, z
    #[serde(default = "identity_wxyz")]
    pub rotation: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl PoseRecord {
    pub fn from_pose(p: &Pose, name: Option<String>) -> Self {
        Self { name, translation: p.translation.vector.into(), rotation: quat_wxyz(p) }
    }

    pub fn pose(&self) -> Pose {
        pose_from_parts(self.translation, self.rotation)
    }
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>, WorkspaceError> {
    let err = |message: String| WorkspaceError::File { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(format!("line {}: {e}", e.line())))
}

pub fn write_poses(path: &Path, poses: &[PoseRecord]) -> Result<(), WorkspaceError> {
    let text = serde_json::to_string_pretty(poses).expect("poses serialize");
    std::fs::write(path, text).map_err(|e| WorkspaceError::File { path: path.display().to_string(), message: e.to_string() })
}

/// Seated human reach distribution in the shared world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachModel {
    /// Shoulder position (m).
    pub shoulder: [f64; 3],
    /// Shoulder to palm at full extension (m).
    pub arm_length: f64,
    /// Azimuth spread around straight ahead (+x), standard deviation (rad).
    pub azimuth_sigma: f64,
    /// Mean and spread of the elevation (rad, negative is downward).
    pub elevation_mean: f64,
    pub elevation_sigma: f64,
    /// Shortest reach as a fraction of `arm_length`.
    pub min_extension: f64,
    /// Share of poses at 95-100% extension.
    pub extended_share: f64,
    /// Per-axis spread of the wrist orientation around palm-down (rad).
    pub orientation_sigma: f64,
}

impl Default for ReachModel {
    fn default() -> Self {
        Self {
            shoulder: [0.12, 0.0, 0.62],
            arm_length: 0.62,
            azimuth_sigma: 35f64.to_radians(),
            elevation_mean: -25f64.to_radians(),
            elevation_sigma: 25f64.to_radians(),
            min_extension: 0.35,
            extended_share: 0.1,
            orientation_sigma: 25f64.to_radians(),
        }
    }
}

impl ReachModel {
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Pose> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let az = Normal::new(0.0, self.azimuth_sigma).expect("finite sigma");
        let el = Normal::new(self.elevation_mean, self.elevation_sigma).expect("finite sigma");
        let rot = Normal::new(0.0, self.orientation_sigma).expect("finite sigma");
        let palm_down = UnitQuaternion::from_euler_angles(PI, 0.0, 0.0);
        let shoulder = Vector3::from(self.shoulder);
        (0..count)
            .map(|_| {
                let a: f64 = az.sample(&mut rng).clamp(-PI / 2.0, PI / 2.0);
                let e: f64 = el.sample(&mut rng).clamp(-1.4, 1.2);
                let ext = if rng.gen_bool(self.extended_share) {
                    rng.gen_range(0.95..=1.0)
                } else {
                    self.min_extension + (0.95 - self.min_extension) * rng.gen::<f64>().sqrt()
                };
                let dir = Vector3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin());
                let p = shoulder + dir * (ext * self.arm_length);
                let tilt = UnitQuaternion::from_scaled_axis(Vector3::new(rot.sample(&mut rng), rot.sample(&mut rng), rot.sample(&mut rng)));
                // Wrist yaw follows the reach direction.
                let yaw = UnitQuaternion::from_euler_angles(0.0, 0.0, a);
                Pose::from_parts(Translation3::from(p), yaw * tilt * palm_down)
            })
            .collect()
    }
}

/// Candidate mounts: `base` first (named "initial"), then `count` random
/// perturbations of it within the given translation and rotation spreads.
pub fn perturbed_mounts(base: &Pose, count: usize, seed: u64, translation_spread: f64, yaw_spread: f64, tilt_spread: f64) -> Vec<PoseRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![PoseRecord::from_pose(base, Some("initial".into()))];
    for i in 0..count {
        let mut sym = |s: f64| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
        let dt = Vector3::new(sym(translation_spread), sym(translation_spread), sym(translation_spread));
        let dr = UnitQuaternion::from_euler_angles(sym(tilt_spread), sym(tilt_spread), sym(yaw_spread));
        let pose = Pose::from_parts(Translation3::from(base.translation.vector + dt), dr * base.rotation);
        out.push(PoseRecord::from_pose(&pose, Some(format!("candidate_{i}"))));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountResult {
    pub mount: PoseRecord,
    pub reached: usize,
    pub missed: usize,
    pub percent: f64,
    /// Mean IK residual over all poses (m + rad).
    pub mean_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceReport {
    pub poses: usize,
    pub mounts: Vec<MountResult>,
    /// Index into `mounts` of the mount reaching the most poses.
    pub best: usize,
}

impl WorkspaceReport {
    pub fn table(&self) -> String {
        let mut s = format!("{:<16} {:>8} {:>8} {:>9}\n", "mount", "reached", "missed", "reached%");
        for (i, m) in self.mounts.iter().enumerate() {
            let name = m.mount.name.clone().unwrap_or_else(|| format!("mount_{i}"));
            let mark = if i == self.best { " *" } else { "" };
            s += &format!("{:<16} {:>8} {:>8} {:>8.1}%{mark}\n", name, m.reached, m.missed, m.percent);
        }
        s
    }
}

/// Reachability of one mount.
pub fn evaluate_mount(chain: &KinematicChain, mount: &PoseRecord, poses: &[Pose], ik: &IkParams) -> MountResult {
    let chain = chain.clone().with_mount(mount.pose());
    let seed = chain.mid_configuration();
    let mut reached = 0;
    let mut residual = 0.0;
    for p in poses {
        match solve_ik(&chain, p, &seed, ik) {
            Ok(sol) => {
                reached += 1;
                residual += sol.residual_translation + sol.residual_rotation;
            }
            Err(e) => residual += e.residual(),
        }
    }
    MountResult {
        mount: mount.clone(),
        reached,
        missed: poses.len() - reached,
        percent: 100.0 * reached as f64 / poses.len() as f64,
        mean_residual: residual / poses.len() as f64,
    }
}

/// Evaluates every mount; the best has the most reached poses, ties going
/// to the lower mean residual.
pub fn analyze_workspace(chain: &KinematicChain, mounts: &[PoseRecord], poses: &[Pose], ik: &IkParams) -> Result<WorkspaceReport, WorkspaceError> {
    if poses.is_empty() {
        return Err(WorkspaceError::NoPoses);
    }
    if mounts.is_empty() {
        return Err(WorkspaceError::NoMounts);
    }
    let results: Vec<MountResult> = mounts.iter().map(|m| evaluate_mount(chain, m, poses, ik)).collect();
    let best = (0..results.len())
        .min_by(|&a, &b| {
            let (ra, rb) = (&results[a], &results[b]);
            rb.reached.cmp(&ra.reached).then(ra.mean_residual.total_cmp(&rb.mean_residual))
        })
        .expect("non-empty");
    Ok(WorkspaceReport { poses: poses.len(), mounts: results, best })
}
