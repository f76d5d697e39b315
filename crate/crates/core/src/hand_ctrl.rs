//! Glove-to-hand joint mapping and binary per-finger brake feedback.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joints reported by the glove: five fingers with four values each,
/// ordered thumb to little finger, each as `[abduction, mcp, pip, dip]`.
pub const GLOVE_JOINTS: usize = 20;
pub const FINGERS: usize = 5;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("pair {0}: source index {1} is outside the glove's {GLOVE_JOINTS} joints")]
    Source(usize, usize),
    #[error("pair {0}: target index {1} is outside the hand's {2} joints")]
    Target(usize, usize, usize),
    #[error("target index {0} is mapped twice")]
    DuplicateTarget(usize),
    #[error("pair {0}: range must have hi > lo")]
    Range(usize),
    #[error("threshold for finger {0} must be positive")]
    Threshold(usize),
    #[error("hysteresis must lie in [0, 1), got {0}")]
    Hysteresis(f64),
    #[error("unknown preset {0:?} (expected svh9 or sih5)")]
    Preset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingPair {
    pub source: usize,
    pub target: usize,
    pub source_range: [f64; 2],
    pub target_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerMapping {
    pub name: String,
    pub hand_dof: usize,
    pub pairs: Vec<MappingPair>,
}

impl FingerMapping {
    pub fn new(name: impl Into<String>, hand_dof: usize, pairs: Vec<MappingPair>) -> Result<Self, MappingError> {
        let m = Self { name: name.into(), hand_dof, pairs };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let mut seen = vec![false; self.hand_dof];
        for (i, p) in self.pairs.iter().enumerate() {
            if p.source >= GLOVE_JOINTS {
                return Err(MappingError::Source(i, p.source));
            }
            if p.target >= self.hand_dof {
                return Err(MappingError::Target(i, p.target, self.hand_dof));
            }
            if std::mem::replace(&mut seen[p.target], true) {
                return Err(MappingError::DuplicateTarget(p.target));
            }
            if !(p.source_range[1] > p.source_range[0] && p.target_range[1] > p.target_range[0]) {
                return Err(MappingError::Range(i));
            }
        }
        Ok(())
    }

    /// Finger (0 = thumb) each hand joint takes its command from.
    pub fn finger_of_target(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.hand_dof];
        for p in &self.pairs {
            out[p.target] = Some(p.source / 4);
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, MappingError> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MappingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn preset(name: &str) -> Result<Self, MappingError> {
        match name {
            "svh9" => Ok(Self::svh9()),
            "sih5" => Ok(Self::sih5()),
            other => Err(MappingError::Preset(other.to_string())),
        }
    }

    /// Nine-actuator hand: thumb flexion and opposition, two joints each on
    /// index and middle, ring, little, and spread. Joint choice is a
    /// plausible configuration, not a published one.
    pub fn svh9() -> Self {
        let flex = [0.0, 1.6];
        let pairs = vec![
            pair(1, 0, flex, [0.0, 0.97]),     // thumb flexion
            pair(0, 1, [0.0, 1.0], [0.0, 0.99]), // thumb opposition
            pair(6, 2, flex, [0.0, 1.33]),     // index distal
            pair(5, 3, flex, [0.0, 0.8]),      // index proximal
            pair(10, 4, flex, [0.0, 1.33]),    // middle distal
            pair(9, 5, flex, [0.0, 0.8]),      // middle proximal
            pair(13, 6, flex, [0.0, 0.98]),    // ring
            pair(17, 7, flex, [0.0, 0.98]),    // little
            pair(16, 8, [0.0, 0.4], [0.0, 0.58]), // spread
        ];
        Self::new("svh9", 9, pairs).expect("preset is valid")
    }

    /// Five-actuator hand: thumb flexion and opposition, index, middle, and
    /// ring plus little. Joint choice is a plausible configuration, not a
    /// published one.
    pub fn sih5() -> Self {
        let flex = [0.0, 1.6];
        let pairs = vec![
            pair(1, 0, flex, [0.0, 1.0]),
            pair(0, 1, [0.0, 1.0], [0.0, 1.0]),
            pair(5, 2, flex, [0.0, 1.0]),
            pair(9, 3, flex, [0.0, 1.0]),
            pair(13, 4, flex, [0.0, 1.0]),
        ];
        Self::new("sih5", 5, pairs).expect("preset is valid")
    }
}

fn pair(source: usize, target: usize, source_range: [f64; 2], target_range: [f64; 2]) -> MappingPair {
    MappingPair { source, target, source_range, target_range }
}

/// Affine map of each selected glove joint onto its hand joint, clamped to
/// the target range. Unmapped hand joints are 0.
pub fn map_fingers(glove: &[f64; GLOVE_JOINTS], m: &FingerMapping) -> Vec<f64> {
    let mut out = vec![0.0; m.hand_dof];
    for p in &m.pairs {
        let [s0, s1] = p.source_range;
        let [t0, t1] = p.target_range;
        let v = t0 + (glove[p.source] - s0) * (t1 - t0) / (s1 - s0);
        out[p.target] = v.clamp(t0, t1);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HapticThresholds {
    /// Per-finger motor current threshold, A.
    pub current: [f64; FINGERS],
    /// Release happens below `current * (1 - hysteresis)`.
    pub hysteresis: f64,
}

impl Default for HapticThresholds {
    fn default() -> Self {
        Self { current: [0.4; FINGERS], hysteresis: 0.1 }
    }
}

impl HapticThresholds {
    pub fn validate(&self) -> Result<(), MappingError> {
        if let Some(i) = self.current.iter().position(|c| !(*c > 0.0)) {
            return Err(MappingError::Threshold(i));
        }
        if !(0.0..1.0).contains(&self.hysteresis) {
            return Err(MappingError::Hysteresis(self.hysteresis));
        }
        Ok(())
    }
}

/// Largest actuator current driven by each glove finger.
pub fn finger_currents(actuator_currents: &[f64], m: &FingerMapping) -> [f64; FINGERS] {
    let mut out = [0.0_f64; FINGERS];
    for (a, finger) in m.finger_of_target().into_iter().enumerate() {
        if let (Some(f), Some(c)) = (finger, actuator_currents.get(a)) {
            out[f] = out[f].max(c.abs());
        }
    }
    out
}

/// Brake on above the threshold, off below the release level, unchanged
/// in between.
pub fn haptic_brakes(currents: &[f64; FINGERS], t: &HapticThresholds, prev: &[bool; FINGERS]) -> [bool; FINGERS] {
    std::array::from_fn(|i| {
        if currents[i] > t.current[i] {
            true
        } else if currents[i] < t.current[i] * (1.0 - t.hysteresis) {
            false
        } else {
            prev[i]
        }
    })
}

/// First-order servo per hand joint. Current grows with the tracking error,
/// so blocking a joint against an object raises it.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPlant {
    pub position: Vec<f64>,
    /// s
    pub time_constant: f64,
    /// A per rad of tracking error.
    pub current_gain: f64,
    /// Joint positions past which an object blocks further closing.
    pub obstacle: Vec<Option<f64>>,
}

impl HandPlant {
    pub fn new(dof: usize) -> Self {
        Self { position: vec![0.0; dof], time_constant: 0.05, current_gain: 1.0, obstacle: vec![None; dof] }
    }

    /// Advances by `dt` toward `cmd` and returns the motor currents.
    pub fn step(&mut self, cmd: &[f64], dt: f64) -> Vec<f64> {
        let a = dt / (self.time_constant + dt);
        self.position
            .iter_mut()
            .zip(cmd)
            .zip(&self.obstacle)
            .map(|((p, c), o)| {
                *p += a * (c - *p);
                if let Some(limit) = o {
                    *p = p.min(*limit);
                }
                self.current_gain * (c - *p).abs()
            })
            .collect()
    }
}
