use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avatar_ctrl::AvatarConfig;
use crate::hand_ctrl::{FingerMapping, HapticThresholds, MappingError};
use crate::kinematics::{pose_from_parts, ChainError, ChainFile, KinematicChain, Pose};
use crate::op_ctrl::OperatorGains;
use crate::signal::ObserverConfig;

use super::channel::ChannelConfig;
use super::contact::ContactPlane;
use super::human::{HumanParams, Script};
use super::plant::PlantParams;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("chain {name:?}: {source}")]
    Chain { name: String, source: ChainError },
    #[error("hand mapping: {0}")]
    Hand(#[from] MappingError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A chain given by builtin name, by path (relative to the scenario file),
/// or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainRef {
    Named(String),
    Inline(ChainFile),
}

/// Avatar arm: a Panda at the world origin.
pub fn avatar_chain() -> KinematicChain {
    KinematicChain::panda()
}

/// Operator arm: a Panda mounted beside and slightly in front of the
/// seated operator, base turned toward the shared workspace.
pub fn operator_chain() -> KinematicChain {
    let mount = Pose::from_parts(
        nalgebra::Translation3::new(0.05, 0.62, 0.05),
        UnitQuaternion::from_euler_angles(0.0, 0.0, -65f64.to_radians()),
    );
    let mut c = KinematicChain::panda().with_mount(mount);
    c.name = "panda_operator".to_string();
    c
}

pub fn builtin_chain(name: &str) -> Option<KinematicChain> {
    match name {
        "panda" | "panda_avatar" => Some(avatar_chain()),
        "panda_operator" => Some(operator_chain()),
        _ => None,
    }
}

impl ChainRef {
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<KinematicChain, ScenarioError> {
        match self {
            ChainRef::Inline(file) => {
                KinematicChain::from_file(file).map_err(|source| ScenarioError::Chain { name: file.name.clone(), source })
            }
            ChainRef::Named(name) => {
                if let Some(c) = builtin_chain(name) {
                    return Ok(c);
                }
                let path = match base_dir {
                    Some(d) => d.join(name),
                    None => PathBuf::from(name),
                };
                KinematicChain::load(&path).map_err(|source| ScenarioError::Chain { name: name.clone(), source })
            }
        }
    }
}

fn default_avatar_chain_ref() -> ChainRef {
    ChainRef::Named("panda".into())
}

fn default_operator_chain_ref() -> ChainRef {
    ChainRef::Named("panda_operator".into())
}

fn default_true() -> bool {
    true
}

fn default_cutoff() -> f64 {
    15.0
}

fn default_dt() -> f64 {
    0.001
}

/// Avatar start posture: hand in front of the base, palm down.
pub const AVATAR_Q0: [f64; 7] = [0.0, -0.2, 0.0, -2.2, 0.0, 2.0, 0.785];

fn default_avatar_q0() -> [f64; 7] {
    AVATAR_Q0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSide {
    #[serde(default = "default_operator_chain_ref")]
    pub chain: ChainRef,
    /// IK seed for the start posture matching the avatar hand pose.
    #[serde(default)]
    pub q_seed: Option<[f64; 7]>,
    #[serde(default)]
    pub gains: OperatorGains,
    #[serde(default)]
    pub plant: PlantParams,
    /// `false` commands zero torque, leaving only the arm's own gravity
    /// compensation.
    #[serde(default = "default_true")]
    pub controller_enabled: bool,
    #[serde(default = "default_cutoff")]
    pub sensor_cutoff_hz: f64,
    /// Standard deviation of additive FT force noise, N.
    #[serde(default)]
    pub force_noise_n: f64,
}

impl Default for OperatorSide {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvatarSide {
    #[serde(default = "default_avatar_chain_ref")]
    pub chain: ChainRef,
    #[serde(default = "default_avatar_q0")]
    pub q0: [f64; 7],
    #[serde(default)]
    pub config: AvatarConfig,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default = "default_cutoff")]
    pub sensor_cutoff_hz: f64,
}

impl Default for AvatarSide {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelPair {
    pub command: ChannelConfig,
    pub feedback: ChannelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSettings {
    /// When off, the observer still runs and is logged but the applied
    /// feedback gain stays 1.
    pub enabled: bool,
    pub config: ObserverConfig,
}

impl Default for ObserverSettings {
    fn default() -> Self {
        Self { enabled: true, config: ObserverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanSettings {
    pub params: HumanParams,
    pub script: Script,
}

impl Default for HumanSettings {
    fn default() -> Self {
        Self { params: HumanParams::default(), script: Script::Hold }
    }
}

/// External force pushed onto the avatar hand for a while, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub start_s: f64,
    pub duration_s: f64,
    pub force: [f64; 3],
}

/// Glove script and hand plant for the optional finger loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandSettings {
    /// Preset name or mapping file path.
    pub mapping: String,
    #[serde(default)]
    pub thresholds: HapticThresholds,
    /// Closing frequency of the scripted glove, Hz.
    #[serde(default = "default_grip_hz")]
    pub grip_frequency_hz: f64,
    /// Peak glove flexion, rad.
    #[serde(default = "default_grip_amplitude")]
    pub grip_amplitude: f64,
    /// Hand joint index blocked by a grasped object at the given position.
    #[serde(default)]
    pub obstacle: Option<(usize, f64)>,
}

fn default_grip_hz() -> f64 {
    0.25
}

fn default_grip_amplitude() -> f64 {
    1.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub operator: OperatorSide,
    #[serde(default)]
    pub avatar: AvatarSide,
    #[serde(default)]
    pub channel: ChannelPair,
    #[serde(default)]
    pub observer: ObserverSettings,
    #[serde(default)]
    pub human: HumanSettings,
    #[serde(default)]
    pub contacts: Vec<ContactPlane>,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub hand: Option<HandSettings>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    /// Minimal scenario: both arms at rest, nothing scripted.
    pub fn idle(duration_s: f64) -> Self {
        Self {
            name: "idle".into(),
            duration_s,
            dt_s: default_dt(),
            seed: 0,
            operator: OperatorSide::default(),
            avatar: AvatarSide::default(),
            channel: ChannelPair::default(),
            observer: ObserverSettings::default(),
            human: HumanSettings::default(),
            contacts: Vec::new(),
            disturbances: Vec::new(),
            hand: None,
            base_dir: None,
        }
    }

    pub fn from_json(text: &str, path_label: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path_label.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let mut sc = Self::from_json(&text, &path.display().to_string())?;
        sc.base_dir = path.parent().map(Path::to_path_buf);
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn ticks(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.dt_s > 0.0 && self.dt_s <= 0.01) {
            return bad(format!("dt_s must be in (0, 0.01], got {}", self.dt_s));
        }
        let rate = 1.0 / self.dt_s;
        for (side, fc) in [("operator", self.operator.sensor_cutoff_hz), ("avatar", self.avatar.sensor_cutoff_hz)] {
            if !(fc > 0.0 && fc < rate / 2.0) {
                return bad(format!("{side}.sensor_cutoff_hz must be in (0, {})", rate / 2.0));
            }
        }
        if !(self.operator.gains.filter_cutoff_hz < rate / 2.0) {
            return bad("operator.gains.filter_cutoff_hz must be below Nyquist".into());
        }
        if !(self.operator.force_noise_n >= 0.0) {
            return bad("operator.force_noise_n must be non-negative".into());
        }
        self.operator.gains.validate().map_err(ScenarioError::Invalid)?;
        self.operator.plant.validate().map_err(ScenarioError::Invalid)?;
        self.avatar.plant.validate().map_err(ScenarioError::Invalid)?;
        self.avatar.config.gains.validate().map_err(ScenarioError::Invalid)?;
        self.channel.command.validate().map_err(ScenarioError::Invalid)?;
        self.channel.feedback.validate().map_err(ScenarioError::Invalid)?;
        self.observer.config.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.human.script.validate().map_err(ScenarioError::Invalid)?;
        for c in &self.contacts {
            c.validate().map_err(ScenarioError::Invalid)?;
        }
        for d in &self.disturbances {
            if !(d.duration_s > 0.0) {
                return bad("disturbance duration_s must be positive".into());
            }
        }
        if let Some(h) = &self.hand {
            h.thresholds.validate()?;
        }
        Ok(())
    }

    pub fn operator_chain(&self) -> Result<KinematicChain, ScenarioError> {
        self.operator.chain.resolve(self.base_dir.as_deref())
    }

    pub fn avatar_chain(&self) -> Result<KinematicChain, ScenarioError> {
        self.avatar.chain.resolve(self.base_dir.as_deref())
    }

    pub fn hand_mapping(&self) -> Result<Option<FingerMapping>, ScenarioError> {
        let Some(h) = &self.hand else { return Ok(None) };
        match FingerMapping::preset(&h.mapping) {
            Ok(m) => Ok(Some(m)),
            Err(_) => {
                let path = match &self.base_dir {
                    Some(d) => d.join(&h.mapping),
                    None => PathBuf::from(&h.mapping),
                };
                Ok(Some(FingerMapping::load(path)?))
            }
        }
    }
}

/// Convenience for building poses in scenario code.
pub fn pose(translation: [f64; 3]) -> Pose {
    pose_from_parts(translation, [1.0, 0.0, 0.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let sc = Scenario::from_json(r#"{"name": "x", "duration_s": 1.0}"#, "x.json").unwrap();
        assert_eq!(sc.ticks(), 1000);
        assert_eq!(sc.operator.gains, OperatorGains::default());
        assert!(sc.observer.enabled);
    }

    #[test]
    fn unknown_field_reports_position() {
        let text = "{\n  \"name\": \"x\",\n  \"duration_s\": 1.0,\n  \"bogus\": 3\n}";
        match Scenario::from_json(text, "s.json") {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Scenario::from_json(r#"{"name": "x", "duration_s": -1.0}"#, "x").is_err());
        let text = r#"{"name": "x", "duration_s": 1.0, "channel": {"command": {"drop_rate": 2.0}}}"#;
        assert!(matches!(Scenario::from_json(text, "x"), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn chains_resolve() {
        let sc = Scenario::idle(1.0);
        assert_eq!(sc.avatar_chain().unwrap(), KinematicChain::panda());
        assert_eq!(sc.operator_chain().unwrap().name, "panda_operator");
        let inline = ChainRef::Inline(KinematicChain::panda().to_file());
        assert_eq!(inline.resolve(None).unwrap(), KinematicChain::panda());
        assert!(ChainRef::Named("missing.json".into()).resolve(None).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let sc = Scenario::idle(2.0);
        let back = Scenario::from_json(&sc.to_json(), "x").unwrap();
        assert_eq!(back, sc);
    }
}
