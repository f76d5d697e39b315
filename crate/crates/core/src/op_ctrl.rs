//! Operator-side torque controller.
//!
//! The commanded torque is
//! `alpha * tau_cmd + beta * tau_f + tau_lo + tau_la + tau_no + tau_co`
//! with `alpha` applied per joint. Gravity is left to the arm's own
//! compensation.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::avatar_ctrl::AvatarFeedback;
use crate::kinematics::{
    jt_pinv, nullspace_projector, solve_ik, IkParams, JointVector, KinematicChain, Matrix6x7, Pose, Wrench, DOF,
    NS_LAMBDA_DEFAULT,
};
use crate::signal::{LowPassFilter, LowPassVec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorGains {
    /// N·m·rad
    pub gamma_p: f64,
    /// N·m·rad/s
    pub gamma_v: f64,
    /// Position distance at which limit avoidance activates, rad.
    pub t_p: f64,
    /// Velocity margin at which limit avoidance activates, rad/s.
    pub t_v: f64,
    /// Clip for each joint of `tau_lo` and of the avatar-side model torque.
    pub tau_max: f64,
    pub ns_stiffness: [f64; 7],
    pub ns_damping: [f64; 7],
    /// Null-space posture target; `None` uses the start configuration.
    pub q_rest: Option<[f64; 7]>,
    pub ik: IkParams,
    /// Damping of `(J_A^T)^+` in the avatar-limit term.
    pub lambda_pinv: f64,
    /// Damping of the null-space projector. Zero gives an exact projector.
    pub ns_lambda: f64,
    /// Cutoff of the feedback-force and predicted-velocity filters, Hz.
    pub filter_cutoff_hz: f64,
    /// Feedback older than this is ignored, ticks.
    pub feedback_timeout_ticks: u64,
}

impl Default for OperatorGains {
    fn default() -> Self {
        Self {
            gamma_p: 5.0,
            gamma_v: 0.05,
            t_p: 10f64.to_radians(),
            t_v: 40f64.to_radians(),
            tau_max: 30.0,
            ns_stiffness: [2.0; 7],
            ns_damping: [0.5; 7],
            q_rest: None,
            ik: IkParams::default(),
            lambda_pinv: NS_LAMBDA_DEFAULT,
            ns_lambda: 0.0,
            filter_cutoff_hz: 15.0,
            feedback_timeout_ticks: 100,
        }
    }
}

impl OperatorGains {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_p > 0.0 && self.t_v > 0.0) {
            return Err(format!("t_p and t_v must be positive (got {}, {})", self.t_p, self.t_v));
        }
        let scalars = [self.gamma_p, self.gamma_v, self.tau_max, self.lambda_pinv, self.ns_lambda];
        let all = scalars.iter().chain(&self.ns_stiffness).chain(&self.ns_damping);
        if all.clone().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err("operator gains must be finite and non-negative".into());
        }
        if !(self.filter_cutoff_hz > 0.0) {
            return Err("filter_cutoff_hz must be positive".into());
        }
        Ok(())
    }
}

/// Per-tick torque components and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueBreakdown {
    pub tau_cmd: JointVector,
    pub tau_f: JointVector,
    pub tau_lo: JointVector,
    pub tau_la: JointVector,
    pub tau_no: JointVector,
    pub tau_co: JointVector,
    pub alpha: JointVector,
    pub beta: f64,
    pub tau_total: JointVector,
}

impl TorqueBreakdown {
    /// Element-wise sum in a fixed order; the logged total is produced by it
    /// and the offline audit re-runs it on the logged parts.
    #[allow(clippy::too_many_arguments)]
    pub fn recompose(
        tau_cmd: &[f64],
        tau_f: &[f64],
        tau_lo: &[f64],
        tau_la: &[f64],
        tau_no: &[f64],
        tau_co: &[f64],
        alpha: &[f64],
        beta: f64,
    ) -> JointVector {
        JointVector::from_fn(|i, _| alpha[i] * tau_cmd[i] + beta * tau_f[i] + tau_lo[i] + tau_la[i] + tau_no[i] + tau_co[i])
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tau_cmd: JointVector,
        tau_f: JointVector,
        tau_lo: JointVector,
        tau_la: JointVector,
        tau_no: JointVector,
        tau_co: JointVector,
        alpha: JointVector,
        beta: f64,
    ) -> Self {
        let tau_total = Self::recompose(
            tau_cmd.as_slice(),
            tau_f.as_slice(),
            tau_lo.as_slice(),
            tau_la.as_slice(),
            tau_no.as_slice(),
            tau_co.as_slice(),
            alpha.as_slice(),
            beta,
        );
        Self { tau_cmd, tau_f, tau_lo, tau_la, tau_no, tau_co, alpha, beta, tau_total }
    }

    pub fn is_consistent(&self) -> bool {
        let r = Self::recompose(
            self.tau_cmd.as_slice(),
            self.tau_f.as_slice(),
            self.tau_lo.as_slice(),
            self.tau_la.as_slice(),
            self.tau_no.as_slice(),
            self.tau_co.as_slice(),
            self.alpha.as_slice(),
            self.beta,
        );
        r == self.tau_total
    }
}

/// `J^T F`.
pub fn tau_from_wrench(j: &Matrix6x7, f: &Wrench) -> JointVector {
    j.transpose() * f.to_vector()
}

/// Per-joint scale for `tau_cmd`: 1 outside the thresholds, falling
/// linearly to 0 at half of them.
pub fn alpha_scale(d_p: f64, d_v: f64, g: &OperatorGains) -> f64 {
    (2.0 * (d_p / g.t_p).min(d_v / g.t_v) - 1.0).clamp(0.0, 1.0)
}

/// Distance of joint `i` to its nearer position limit (negative if
/// outside) and the signed direction pointing back into the interval.
fn position_margin(chain: &KinematicChain, q: &JointVector, i: usize) -> (f64, f64) {
    let lo = q[i] - chain.lower(i);
    let hi = chain.upper(i) - q[i];
    if lo < hi {
        (lo, 1.0)
    } else {
        (hi, -1.0)
    }
}

fn barrier(d: f64, threshold: f64, gain: f64, cap: f64) -> f64 {
    if d >= threshold {
        0.0
    } else if d <= 0.0 {
        cap
    } else {
        (gain * (1.0 / d - 1.0 / threshold)).min(cap)
    }
}

/// Hyperbolic push away from position and velocity limits, positive
/// toward the interior of each joint interval and opposing the velocity.
pub fn limit_avoidance_torque(q: &JointVector, qdot: &JointVector, chain: &KinematicChain, g: &OperatorGains) -> JointVector {
    JointVector::from_fn(|i, _| {
        let (d_p, dir) = position_margin(chain, q, i);
        let pos = dir * barrier(d_p, g.t_p, g.gamma_p, g.tau_max);
        let d_v = chain.velocity_limits[i] - qdot[i].abs();
        let vel = -qdot[i].signum() * barrier(d_v, g.t_v, g.gamma_v, g.tau_max);
        (pos + vel).clamp(-g.tau_max, g.tau_max)
    })
}

/// Per-joint `alpha` from the local position and velocity margins.
pub fn alpha_vector(q: &JointVector, qdot: &JointVector, chain: &KinematicChain, g: &OperatorGains) -> JointVector {
    JointVector::from_fn(|i, _| {
        let d_p = position_margin(chain, q, i).0.max(0.0);
        let d_v = (chain.velocity_limits[i] - qdot[i].abs()).max(0.0);
        alpha_scale(d_p, d_v, g)
    })
}

/// `N (K (q_rest - q) - D qdot)`.
pub fn nullspace_torque(j: &Matrix6x7, q: &JointVector, qdot: &JointVector, q_rest: &JointVector, g: &OperatorGains) -> JointVector {
    let k = JointVector::from_row_slice(&g.ns_stiffness);
    let d = JointVector::from_row_slice(&g.ns_damping);
    nullspace_projector(j, g.ns_lambda) * (k.component_mul(&(q_rest - q)) - d.component_mul(qdot))
}

/// Low-pass state for the two end-effector force estimates.
#[derive(Debug, Clone)]
pub struct FeedbackFilters {
    pub panda: LowPassVec3,
    pub sensor: LowPassVec3,
}

impl FeedbackFilters {
    pub fn new(cutoff_hz: f64, rate_hz: f64) -> Self {
        Self { panda: LowPassVec3::new(cutoff_hz, rate_hz), sensor: LowPassVec3::new(cutoff_hz, rate_hz) }
    }
}

/// `J_O^T F_sensor + J_O^T [f_panda_lp - f_sensor_lp; 0]`. The force
/// difference is the part of the contact the wrist sensor cannot see, such
/// as the forearm touching the table.
pub fn feedback_torque(j_o: &Matrix6x7, fb: &AvatarFeedback, filters: &mut FeedbackFilters) -> JointVector {
    let tau_sensor = tau_from_wrench(j_o, &fb.sensor_wrench);
    let f_diff = filters.panda.step(&fb.panda_force) - filters.sensor.step(&fb.sensor_wrench.force);
    tau_sensor + tau_from_wrench(j_o, &Wrench::from_force(f_diff))
}

/// Operator-side copy of the avatar arm used to anticipate its joint limits.
#[derive(Debug, Clone)]
pub struct AvatarPredictor {
    chain: KinematicChain,
    q_pred: Option<JointVector>,
    qdot_filters: Vec<LowPassFilter>,
    qdot_pred: JointVector,
    rate_hz: f64,
    failures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub q: JointVector,
    pub qdot: JointVector,
    pub tau_model: JointVector,
    pub tau_la: JointVector,
    /// IK did not converge this tick and the previous prediction was reused.
    pub stale: bool,
}

impl AvatarPredictor {
    pub fn new(chain: KinematicChain, cutoff_hz: f64, rate_hz: f64) -> Self {
        Self {
            chain,
            q_pred: None,
            qdot_filters: (0..DOF).map(|_| LowPassFilter::new(cutoff_hz, rate_hz)).collect(),
            qdot_pred: JointVector::zeros(),
            rate_hz,
            failures: 0,
        }
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn ik_failures(&self) -> u64 {
        self.failures
    }

    /// Solves the avatar IK for `goal` seeded at `last_avatar_q`, updates
    /// the filtered velocity, and maps the avatar-side limit torque through
    /// the common hand frame onto the operator joints.
    pub fn update(&mut self, goal: &Pose, last_avatar_q: &JointVector, j_o: &Matrix6x7, g: &OperatorGains) -> Prediction {
        let (q_new, stale) = match solve_ik(&self.chain, goal, last_avatar_q, &g.ik) {
            Ok(sol) => (sol.q, false),
            Err(_) => {
                self.failures += 1;
                (self.q_pred.unwrap_or(*last_avatar_q), true)
            }
        };
        let raw = match self.q_pred {
            Some(prev) => (q_new - prev) * self.rate_hz,
            None => JointVector::zeros(),
        };
        for i in 0..DOF {
            self.qdot_pred[i] = self.qdot_filters[i].step(raw[i]);
        }
        self.q_pred = Some(q_new);
        let tau_model = limit_avoidance_torque(&q_new, &self.qdot_pred, &self.chain, g);
        let tau_la = if tau_model.iter().all(|t| *t == 0.0) {
            JointVector::zeros()
        } else {
            let wrench: Vector6<f64> = jt_pinv(&self.chain.body_jacobian(&q_new), g.lambda_pinv) * tau_model;
            j_o.transpose() * wrench
        };
        Prediction { q: q_new, qdot: self.qdot_pred, tau_model, tau_la, stale }
    }
}

/// Everything the operator controller reads in one tick.
#[derive(Debug, Clone, Copy)]
pub struct OperatorInputs<'a> {
    pub tick: u64,
    pub q: &'a JointVector,
    pub qdot: &'a JointVector,
    /// Compensated operator FT wrench, hand frame.
    pub wrench: &'a Wrench,
    /// Latest avatar feedback received, if any.
    pub feedback: Option<&'a AvatarFeedback>,
    pub beta: f64,
    /// Coriolis torque supplied by the plant model.
    pub tau_co: JointVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOutput {
    pub breakdown: TorqueBreakdown,
    /// Current operator hand pose, sent to the avatar as its goal.
    pub command_pose: Pose,
    pub prediction: Option<Prediction>,
    pub feedback_stale: bool,
}

#[derive(Debug, Clone)]
pub struct OperatorController {
    chain: KinematicChain,
    gains: OperatorGains,
    q_rest: JointVector,
    predictor: AvatarPredictor,
    filters: FeedbackFilters,
}

impl OperatorController {
    pub fn new(chain: KinematicChain, avatar_chain: KinematicChain, gains: OperatorGains, q0: &JointVector, rate_hz: f64) -> Self {
        let q_rest = gains.q_rest.map(|q| JointVector::from_row_slice(&q)).unwrap_or(*q0);
        Self {
            chain,
            predictor: AvatarPredictor::new(avatar_chain, gains.filter_cutoff_hz, rate_hz),
            filters: FeedbackFilters::new(gains.filter_cutoff_hz, rate_hz),
            gains,
            q_rest,
        }
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn gains(&self) -> &OperatorGains {
        &self.gains
    }

    pub fn predictor(&self) -> &AvatarPredictor {
        &self.predictor
    }

    pub fn tick(&mut self, inp: &OperatorInputs<'_>) -> OperatorOutput {
        let g = &self.gains;
        let (q, qdot) = (inp.q, inp.qdot);
        let j = self.chain.body_jacobian(q);
        let pose = self.chain.forward_kinematics(q);

        let tau_cmd = tau_from_wrench(&j, inp.wrench);
        let alpha = alpha_vector(q, qdot, &self.chain, g);
        let tau_lo = limit_avoidance_torque(q, qdot, &self.chain, g);
        let tau_no = nullspace_torque(&j, q, qdot, &self.q_rest, g);

        let fresh = inp.feedback.filter(|fb| inp.tick.saturating_sub(fb.tick) <= g.feedback_timeout_ticks);
        let tau_f = match fresh {
            Some(fb) => feedback_torque(&j, fb, &mut self.filters),
            None => JointVector::zeros(),
        };
        let prediction = fresh.map(|fb| self.predictor.update(&pose, &fb.q, &j, g));
        let tau_la = prediction.map(|p| p.tau_la).unwrap_or_else(JointVector::zeros);

        let breakdown = TorqueBreakdown::new(tau_cmd, tau_f, tau_lo, tau_la, tau_no, inp.tau_co, alpha, inp.beta);
        OperatorOutput { breakdown, command_pose: pose, prediction, feedback_stale: inp.feedback.is_some() && fresh.is_none() }
    }
}
