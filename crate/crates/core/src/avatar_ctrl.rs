//! Avatar-side Cartesian impedance controller with the hold / fade / track /
//! safety-stop mode machine.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::kinematics::{
    interpolate_pose, jt_pinv, nullspace_projector, world_pose_error, JointVector, KinematicChain, Matrix6x7, Pose,
    Wrench, NS_LAMBDA_DEFAULT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AvatarMode {
    Hold,
    InitFade,
    Track,
    SafetyStop,
}

impl AvatarMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AvatarMode::Hold => "HOLD",
            AvatarMode::InitFade => "INIT_FADE",
            AvatarMode::Track => "TRACK",
            AvatarMode::SafetyStop => "SAFETY_STOP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "HOLD" => AvatarMode::Hold,
            "INIT_FADE" => AvatarMode::InitFade,
            "TRACK" => AvatarMode::Track,
            "SAFETY_STOP" => AvatarMode::SafetyStop,
            _ => return None,
        })
    }

    /// Whether `self -> next` is one of the permitted edges (self loops
    /// included).
    pub fn can_transition_to(self, next: AvatarMode) -> bool {
        use AvatarMode::*;
        self == next
            || next == SafetyStop
            || matches!((self, next), (Hold, InitFade) | (InitFade, Track) | (Track, Hold) | (SafetyStop, InitFade))
    }
}

/// Diagonal Cartesian stiffness/damping plus null-space posture gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpedanceGains {
    /// `[x, y, z]` N/m then `[rx, ry, rz]` N·m/rad.
    pub stiffness: [f64; 6],
    /// N·s/m then N·m·s/rad.
    pub damping: [f64; 6],
    pub ns_stiffness: [f64; 7],
    pub ns_damping: [f64; 7],
    /// Posture the null-space term pulls toward; `None` uses the start pose.
    pub q_rest: Option<[f64; 7]>,
    pub ns_lambda: f64,
}

impl Default for ImpedanceGains {
    fn default() -> Self {
        let (st, sr) = (600.0_f64, 30.0_f64);
        Self {
            stiffness: [st, st, st, sr, sr, sr],
            damping: [2.0 * st.sqrt(), 2.0 * st.sqrt(), 2.0 * st.sqrt(), 2.0 * sr.sqrt(), 2.0 * sr.sqrt(), 2.0 * sr.sqrt()],
            ns_stiffness: [4.0; 7],
            ns_damping: [0.8; 7],
            q_rest: None,
            ns_lambda: NS_LAMBDA_DEFAULT,
        }
    }
}

impl ImpedanceGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = self.stiffness.iter().chain(&self.damping).chain(&self.ns_stiffness).chain(&self.ns_damping);
        if all.clone().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err("impedance gains must be finite and non-negative".into());
        }
        if !(self.ns_lambda >= 0.0) {
            return Err("ns_lambda must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyThresholds {
    /// Per-axis force limit, N.
    pub force_n: f64,
    /// Per-axis torque limit, N·m.
    pub torque_nm: f64,
    /// Per-joint speed limit, rad/s.
    pub joint_velocity: f64,
}

impl Default for SafetyThresholds {
    fn default() -> Self {
        Self { force_n: 40.0, torque_nm: 20.0, joint_velocity: 2.6 }
    }
}

impl SafetyThresholds {
    pub fn violated(&self, contact: &Wrench, qdot: &JointVector) -> bool {
        contact.force.amax() > self.force_n
            || contact.torque.amax() > self.torque_nm
            || qdot.amax() > self.joint_velocity
            || !contact.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvatarConfig {
    pub gains: ImpedanceGains,
    pub safety: SafetyThresholds,
    /// Command silence after which the arm holds its pose.
    pub watchdog_ticks: u64,
    /// Length of the initialisation fade.
    pub fade_ticks: u64,
    /// Ticks spent in safety stop before an automatic restart; `None`
    /// waits for [`AvatarController::request_restart`].
    pub restart_delay_ticks: Option<u64>,
}

impl Default for AvatarConfig {
    fn default() -> Self {
        Self {
            gains: ImpedanceGains::default(),
            safety: SafetyThresholds::default(),
            watchdog_ticks: 100,
            fade_ticks: 3000,
            restart_delay_ticks: Some(1000),
        }
    }
}

/// Feedback the avatar sends to the operator every tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvatarFeedback {
    pub tick: u64,
    /// Compensated FT-sensor wrench in the hand frame.
    pub sensor_wrench: Wrench,
    /// Hand-frame force estimated from the joint torque residual.
    pub panda_force: Vector3<f64>,
    pub q: JointVector,
    pub qdot: JointVector,
    pub mode: AvatarMode,
}

const FORCE_ESTIMATE_DAMPING: f64 = 0.01;

/// `J^T (-S dp - D J qdot)`.
pub fn impedance_torque(j: &Matrix6x7, delta_p: &Vector6<f64>, qdot: &JointVector, gains: &ImpedanceGains) -> JointVector {
    let s = Vector6::from_row_slice(&gains.stiffness);
    let d = Vector6::from_row_slice(&gains.damping);
    let twist = j * qdot;
    let f = -s.component_mul(delta_p) - d.component_mul(&twist);
    j.transpose() * f
}

/// Hand-frame force equivalent of the external joint torques, the way an
/// arm without a wrist sensor estimates end-effector forces.
pub fn estimate_hand_force(chain: &KinematicChain, q: &JointVector, tau_ext: &JointVector) -> Vector3<f64> {
    let w = jt_pinv(&chain.body_jacobian(q), FORCE_ESTIMATE_DAMPING) * tau_ext;
    w.fixed_rows::<3>(0).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvatarOutput {
    pub tau: JointVector,
    pub brake: bool,
    pub mode: AvatarMode,
    /// Pose the impedance law pulled toward this tick.
    pub goal: Pose,
    pub fade_progress: f64,
    pub safety_event: bool,
}

#[derive(Debug, Clone)]
pub struct AvatarController {
    chain: KinematicChain,
    config: AvatarConfig,
    q_rest: JointVector,
    mode: AvatarMode,
    hold_pose: Pose,
    latest_cmd: Option<Pose>,
    last_cmd_tick: Option<u64>,
    fade_count: u64,
    stop_tick: u64,
    restart_requested: bool,
    safety_events: u64,
}

impl AvatarController {
    /// Starts in hold at the pose of `q0`.
    pub fn new(chain: KinematicChain, config: AvatarConfig, q0: &JointVector) -> Self {
        let q_rest = config.gains.q_rest.map(|q| JointVector::from_row_slice(&q)).unwrap_or(*q0);
        let hold_pose = chain.forward_kinematics(q0);
        Self {
            chain,
            config,
            q_rest,
            mode: AvatarMode::Hold,
            hold_pose,
            latest_cmd: None,
            last_cmd_tick: None,
            fade_count: 0,
            stop_tick: 0,
            restart_requested: false,
            safety_events: 0,
        }
    }

    pub fn mode(&self) -> AvatarMode {
        self.mode
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn config(&self) -> &AvatarConfig {
        &self.config
    }

    pub fn fade_progress(&self) -> f64 {
        match self.mode {
            AvatarMode::InitFade => self.fade_count as f64 / self.config.fade_ticks.max(1) as f64,
            AvatarMode::Track => 1.0,
            _ => 0.0,
        }
    }

    pub fn safety_events(&self) -> u64 {
        self.safety_events
    }

    pub fn request_restart(&mut self) {
        self.restart_requested = true;
    }

    fn enter_fade(&mut self, q: &JointVector) {
        self.hold_pose = self.chain.forward_kinematics(q);
        self.fade_count = 0;
        self.mode = AvatarMode::InitFade;
    }

    /// One control tick. `cmd` is a goal pose delivered this tick, if any.
    pub fn tick(&mut self, now: u64, cmd: Option<Pose>, q: &JointVector, qdot: &JointVector, contact: &Wrench) -> AvatarOutput {
        if let Some(c) = cmd {
            self.latest_cmd = Some(c);
            self.last_cmd_tick = Some(now);
        }
        let silent = match self.last_cmd_tick {
            Some(t) => now.saturating_sub(t) >= self.config.watchdog_ticks,
            None => true,
        };

        let violated = self.config.safety.violated(contact, qdot);
        let mut safety_event = false;
        if self.mode != AvatarMode::SafetyStop && violated {
            self.mode = AvatarMode::SafetyStop;
            self.stop_tick = now;
            self.restart_requested = false;
            self.safety_events += 1;
            safety_event = true;
        }

        match self.mode {
            AvatarMode::SafetyStop => {
                let auto = self.config.restart_delay_ticks.is_some_and(|d| now >= self.stop_tick + d);
                // Never resume while a threshold is still exceeded.
                if (self.restart_requested || auto) && !violated {
                    self.restart_requested = false;
                    self.enter_fade(q);
                }
            }
            AvatarMode::Hold => {
                if cmd.is_some() {
                    self.enter_fade(q);
                }
            }
            AvatarMode::InitFade => {
                self.fade_count += 1;
                if self.fade_count >= self.config.fade_ticks {
                    self.mode = AvatarMode::Track;
                }
            }
            AvatarMode::Track => {
                if silent {
                    self.hold_pose = self.chain.forward_kinematics(q);
                    self.mode = AvatarMode::Hold;
                }
            }
        }

        let progress = self.fade_progress();
        let goal = match (self.mode, self.latest_cmd) {
            (AvatarMode::Track, Some(c)) => c,
            (AvatarMode::InitFade, Some(c)) => interpolate_pose(&self.hold_pose, &c, progress),
            _ => self.hold_pose,
        };

        if self.mode == AvatarMode::SafetyStop {
            return AvatarOutput { tau: JointVector::zeros(), brake: true, mode: self.mode, goal, fade_progress: 0.0, safety_event };
        }

        let j = self.chain.zero_jacobian(q);
        let dp = world_pose_error(&self.chain.forward_kinematics(q), &goal);
        let g = &self.config.gains;
        let tau_cmd = impedance_torque(&j, &dp, qdot, g);
        let k = JointVector::from_row_slice(&g.ns_stiffness);
        let d = JointVector::from_row_slice(&g.ns_damping);
        let posture = k.component_mul(&(self.q_rest - q)) - d.component_mul(qdot);
        let tau_ns = nullspace_projector(&j, g.ns_lambda) * posture;
        AvatarOutput { tau: tau_cmd + tau_ns, brake: false, mode: self.mode, goal, fade_progress: progress, safety_event }
    }
}
