use std::fs;
use std::io::BufWriter;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::avatar_ctrl::{estimate_hand_force, AvatarController, AvatarFeedback, AvatarOutput};
use crate::hand_ctrl::{finger_currents, haptic_brakes, map_fingers, FingerMapping, HandPlant, FINGERS, GLOVE_JOINTS};
use crate::kinematics::{random_configuration, solve_ik, IkParams, JointVector, KinematicChain, Pose, Wrench, DOF};
use crate::op_ctrl::{OperatorController, OperatorInputs, OperatorOutput, TorqueBreakdown};
use crate::signal::{LowPassVec3, ObserverState};

use super::channel::{Channel, Message};
use super::human::{finite_twist, human_wrench};
use super::logs::{indexed, LogError, LogWriter, Row, AVATAR_LOG, CHANNEL_LOG, HANDS_LOG, OBSERVER_LOG, OPERATOR_LOG};
use super::plant::ArmPlant;
use super::scenario::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no operator posture reaches the avatar start pose (residual {0:.3e})")]
    StartPosture(f64),
    #[error("non-finite {what} at tick {tick}")]
    NumericFault { tick: u64, what: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Operator posture reaching `target`, preferring solutions far from the
/// joint limits. Candidates start from `seed`, the mid configuration and a
/// fixed set of pseudo-random postures.
pub fn start_posture(chain: &KinematicChain, target: &Pose, seed: Option<&JointVector>) -> Result<JointVector, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e);
    let mut seeds: Vec<JointVector> = seed.into_iter().copied().collect();
    seeds.push(chain.mid_configuration());
    seeds.extend((0..32).map(|_| random_configuration(chain, &mut rng, 0.2)));
    let params = IkParams { max_iters: 200, ..IkParams::default() };
    let margin = |q: &JointVector| {
        (0..DOF)
            .map(|i| (q[i] - chain.lower(i)).min(chain.upper(i) - q[i]) / (chain.upper(i) - chain.lower(i)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best: Option<(f64, JointVector)> = None;
    let mut best_residual = f64::INFINITY;
    for (k, s) in seeds.iter().enumerate() {
        match solve_ik(chain, target, s, &params) {
            Ok(sol) => {
                // An explicit seed wins whenever it converges with a usable margin.
                let m = margin(&sol.q);
                if k == 0 && seed.is_some() && m > 0.03 {
                    return Ok(sol.q);
                }
                if best.as_ref().map_or(true, |(bm, _)| m > *bm) {
                    best = Some((m, sol.q));
                }
            }
            Err(e) => best_residual = best_residual.min(e.residual()),
        }
    }
    best.map(|(_, q)| q).ok_or(SimError::StartPosture(best_residual))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Pace ticks to the wall clock.
    pub realtime: bool,
    /// Replaces the scenario seed.
    pub seed: Option<u64>,
}

/// Everything observable after one tick.
#[derive(Debug, Clone, Copy)]
pub struct TickRecord {
    pub tick: u64,
    pub operator: OperatorOutput,
    pub avatar: AvatarOutput,
    pub human_goal: Pose,
    pub operator_ft: Wrench,
    pub avatar_hand: Pose,
    pub operator_q: JointVector,
    pub operator_qd: JointVector,
    /// Avatar state sent back this tick.
    pub avatar_feedback: AvatarFeedback,
    /// Newest feedback message the operator had.
    pub feedback: Option<Message<AvatarFeedback>>,
    pub observer_input: Vector3<f64>,
    pub beta_observer: f64,
    pub beta_applied: f64,
    pub hand_contact_force: f64,
    pub link_contact_force: f64,
}

struct HandLoop {
    mapping: FingerMapping,
    plant: HandPlant,
    brakes: [bool; FINGERS],
    thresholds: crate::hand_ctrl::HapticThresholds,
    frequency: f64,
    amplitude: f64,
}

/// The bilateral loop advanced one fixed tick at a time.
pub struct Simulation {
    pub scenario: Scenario,
    pub operator_plant: ArmPlant,
    pub avatar_plant: ArmPlant,
    pub operator: OperatorController,
    pub avatar: AvatarController,
    pub observer: ObserverState,
    pub command_channel: Channel<Pose>,
    pub feedback_channel: Channel<AvatarFeedback>,
    operator_start: Pose,
    operator_ft_force: LowPassVec3,
    operator_ft_torque: LowPassVec3,
    avatar_ft_force: LowPassVec3,
    avatar_ft_torque: LowPassVec3,
    avatar_panda_force: LowPassVec3,
    noise_rng: ChaCha8Rng,
    last_cmd_send: Option<u64>,
    prev_goal: Pose,
    hand: Option<HandLoop>,
    tick: u64,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        Self::with_seed(scenario, None)
    }

    pub fn with_seed(scenario: Scenario, seed: Option<u64>) -> Result<Self, SimError> {
        scenario.validate()?;
        let seed = seed.unwrap_or(scenario.seed);
        let op_chain = scenario.operator_chain()?;
        let av_chain = scenario.avatar_chain()?;
        let dt = scenario.dt_s;
        let rate = 1.0 / dt;

        let av_q0 = av_chain.clamp(&JointVector::from_row_slice(&scenario.avatar.q0));
        let start = av_chain.forward_kinematics(&av_q0);
        let op_seed = scenario.operator.q_seed.map(|q| JointVector::from_row_slice(&q));
        let op_q0 = start_posture(&op_chain, &start, op_seed.as_ref())?;

        let operator = OperatorController::new(op_chain.clone(), av_chain.clone(), scenario.operator.gains, &op_q0, rate);
        let avatar = AvatarController::new(av_chain.clone(), scenario.avatar.config, &av_q0);
        let observer = ObserverState::new(scenario.observer.config).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let tick_ms = dt * 1000.0;
        let hand = match scenario.hand_mapping()? {
            Some(mapping) => {
                let h = scenario.hand.as_ref().expect("mapping implies settings");
                let mut plant = HandPlant::new(mapping.hand_dof);
                if let Some((j, pos)) = h.obstacle {
                    if j < mapping.hand_dof {
                        plant.obstacle[j] = Some(pos);
                    }
                }
                Some(HandLoop {
                    mapping,
                    plant,
                    brakes: [false; FINGERS],
                    thresholds: h.thresholds,
                    frequency: h.grip_frequency_hz,
                    amplitude: h.grip_amplitude,
                })
            }
            None => None,
        };
        Ok(Self {
            operator_plant: ArmPlant::new(op_chain, &scenario.operator.plant, &op_q0),
            avatar_plant: ArmPlant::new(av_chain, &scenario.avatar.plant, &av_q0),
            operator,
            avatar,
            observer,
            command_channel: Channel::new(scenario.channel.command, tick_ms, seed.wrapping_mul(2).wrapping_add(1)),
            feedback_channel: Channel::new(scenario.channel.feedback, tick_ms, seed.wrapping_mul(2).wrapping_add(2)),
            operator_start: start,
            operator_ft_force: LowPassVec3::new(scenario.operator.sensor_cutoff_hz, rate),
            operator_ft_torque: LowPassVec3::new(scenario.operator.sensor_cutoff_hz, rate),
            avatar_ft_force: LowPassVec3::new(scenario.avatar.sensor_cutoff_hz, rate),
            avatar_ft_torque: LowPassVec3::new(scenario.avatar.sensor_cutoff_hz, rate),
            avatar_panda_force: LowPassVec3::new(scenario.avatar.sensor_cutoff_hz, rate),
            noise_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(2).wrapping_add(3)),
            last_cmd_send: None,
            prev_goal: scenario.human.script.pose(&start, 0.0),
            hand,
            tick: 0,
            scenario,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn start_pose(&self) -> Pose {
        self.operator_start
    }

    pub fn dt(&self) -> f64 {
        self.scenario.dt_s
    }

    /// Advances the whole loop by one tick.
    pub fn step(&mut self) -> Result<TickRecord, SimError> {
        let now = self.tick;
        let dt = self.scenario.dt_s;
        let t = now as f64 * dt;
        let fault = |what: &str| SimError::NumericFault { tick: now, what: what.to_string() };

        // Operator side.
        let op_chain = self.operator_plant.chain.clone();
        let (oq, oqd) = (self.operator_plant.q, self.operator_plant.qdot);
        let hand_pose = op_chain.forward_kinematics(&oq);
        let j0 = op_chain.zero_jacobian(&oq);
        let twist = j0 * oqd;
        let goal = self.scenario.human.script.pose(&self.operator_start, t);
        let goal_twist = if now == 0 { Vector6::zeros() } else { finite_twist(&self.prev_goal, &goal, dt) };
        self.prev_goal = goal;
        let human = human_wrench(&self.scenario.human.params, &goal, &hand_pose, &twist, &goal_twist);
        let inv = hand_pose.rotation.inverse();
        let mut ft_force = inv * human.force;
        if self.scenario.operator.force_noise_n > 0.0 {
            let n = Normal::new(0.0, self.scenario.operator.force_noise_n).expect("validated sigma");
            ft_force += Vector3::from_fn(|_, _| n.sample(&mut self.noise_rng));
        }
        let operator_ft = Wrench::new(self.operator_ft_force.step(&ft_force), self.operator_ft_torque.step(&(inv * human.torque)));

        self.feedback_channel.step(now);
        let feedback = self.feedback_channel.latest().cloned();
        let observer_input = feedback.as_ref().map_or(Vector3::zeros(), |m| m.payload.sensor_wrench.force);
        let beta_observer = self.observer.step(&observer_input, dt);
        let beta_applied = if self.scenario.observer.enabled { beta_observer } else { 1.0 };

        let mut operator = self.operator.tick(&OperatorInputs {
            tick: now,
            q: &oq,
            qdot: &oqd,
            wrench: &operator_ft,
            feedback: feedback.as_ref().map(|m| &m.payload),
            beta: beta_applied,
            tau_co: JointVector::zeros(),
        });
        if !self.scenario.operator.controller_enabled {
            let z = JointVector::zeros();
            operator.breakdown = TorqueBreakdown::new(z, z, z, z, z, z, JointVector::from_element(1.0), beta_applied);
        }
        if !operator.breakdown.tau_total.iter().all(|v| v.is_finite()) {
            return Err(fault("operator torque"));
        }
        self.command_channel.send(operator.command_pose, now);
        let human_vec = {
            let mut v = Vector6::zeros();
            v.fixed_rows_mut::<3>(0).copy_from(&human.force);
            v.fixed_rows_mut::<3>(3).copy_from(&human.torque);
            v
        };
        let op_ext = j0.transpose() * human_vec;
        self.operator_plant.step(&operator.breakdown.tau_total, &op_ext, dt);
        if !self.operator_plant.is_finite() {
            return Err(fault("operator state"));
        }

        // Avatar side.
        self.command_channel.step(now);
        let cmd = match self.command_channel.latest() {
            Some(m) if Some(m.send_tick) != self.last_cmd_send => {
                self.last_cmd_send = Some(m.send_tick);
                Some(m.payload)
            }
            _ => None,
        };
        let av_chain = self.avatar_plant.chain.clone();
        let (aq, aqd) = (self.avatar_plant.q, self.avatar_plant.qdot);
        let avatar_hand = av_chain.forward_kinematics(&aq);
        let mut tau_ext = JointVector::zeros();
        let mut hand_wrench = Wrench::zero();
        let (mut hand_fn, mut link_fn) = (0.0, 0.0);
        for plane in &self.scenario.contacts {
            let load = plane.evaluate(&av_chain, &aq, &aqd);
            tau_ext += load.tau_ext;
            hand_wrench = hand_wrench + load.hand_wrench;
            match plane.attachment {
                super::contact::Attachment::Hand { .. } => hand_fn += load.force_world.norm(),
                super::contact::Attachment::Link { .. } => link_fn += load.force_world.norm(),
            }
        }
        for d in &self.scenario.disturbances {
            if t >= d.start_s && t < d.start_s + d.duration_s {
                let f = Vector3::from(d.force);
                let mut w = Vector6::zeros();
                w.fixed_rows_mut::<3>(0).copy_from(&f);
                tau_ext += av_chain.zero_jacobian(&aq).transpose() * w;
                hand_wrench = hand_wrench + Wrench::from_force(avatar_hand.rotation.inverse() * f);
                hand_fn += f.norm();
            }
        }
        let sensor = Wrench::new(self.avatar_ft_force.step(&hand_wrench.force), self.avatar_ft_torque.step(&hand_wrench.torque));
        let panda_force = self.avatar_panda_force.step(&estimate_hand_force(&av_chain, &aq, &tau_ext));
        let avatar = self.avatar.tick(now, cmd, &aq, &aqd, &sensor);
        if !avatar.tau.iter().all(|v| v.is_finite()) {
            return Err(fault("avatar torque"));
        }
        self.avatar_plant.brake = avatar.brake;
        self.avatar_plant.step(&avatar.tau, &tau_ext, dt);
        if !self.avatar_plant.is_finite() {
            return Err(fault("avatar state"));
        }
        let fb = AvatarFeedback { tick: now, sensor_wrench: sensor, panda_force, q: aq, qdot: aqd, mode: avatar.mode };
        self.feedback_channel.send(fb, now);

        self.tick += 1;
        Ok(TickRecord {
            tick: now,
            operator,
            avatar,
            human_goal: goal,
            operator_ft,
            avatar_hand,
            operator_q: oq,
            operator_qd: oqd,
            avatar_feedback: fb,
            feedback,
            observer_input,
            beta_observer,
            beta_applied,
            hand_contact_force: hand_fn,
            link_contact_force: link_fn,
        })
    }

    fn hand_step(&mut self, t: f64, dt: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, [bool; FINGERS])> {
        let h = self.hand.as_mut()?;
        let s = 0.5 * (1.0 - (std::f64::consts::TAU * h.frequency * t).cos());
        let glove: [f64; GLOVE_JOINTS] = std::array::from_fn(|i| if i % 4 == 0 { 0.3 * s } else { h.amplitude * s });
        let cmd = map_fingers(&glove, &h.mapping);
        let currents = h.plant.step(&cmd, dt);
        h.brakes = haptic_brakes(&finger_currents(&currents, &h.mapping), &h.thresholds, &h.brakes);
        Some((cmd, h.plant.position.clone(), currents, h.brakes))
    }
}

fn operator_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["tick".into(), "t".into()];
    h.extend(indexed("q", 7));
    h.extend(indexed("qd", 7));
    for s in ["cmd_x", "cmd_y", "cmd_z", "cmd_qw", "cmd_qx", "cmd_qy", "cmd_qz", "goal_x", "goal_y", "goal_z"] {
        h.push(s.into());
    }
    for s in ["ft_fx", "ft_fy", "ft_fz", "ft_tx", "ft_ty", "ft_tz"] {
        h.push(s.into());
    }
    for p in ["tau_cmd", "tau_f", "tau_lo", "tau_la", "tau_no", "tau_co", "alpha"] {
        h.extend(indexed(p, 7));
    }
    h.push("beta".into());
    h.extend(indexed("tau_total", 7));
    h.extend(indexed("pred_q", 7));
    h.push("pred_stale".into());
    h.push("fb_tick".into());
    h.extend(indexed("fb_q", 7));
    h
}

fn avatar_header() -> Vec<String> {
    let mut h: Vec<String> = ["tick", "t", "mode", "fade", "goal_x", "goal_y", "goal_z", "hand_x", "hand_y", "hand_z", "hand_qw", "hand_qx", "hand_qy", "hand_qz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(indexed("q", 7));
    h.extend(indexed("qd", 7));
    h.extend(indexed("tau", 7));
    for s in ["ft_fx", "ft_fy", "ft_fz", "ft_tx", "ft_ty", "ft_tz", "panda_fx", "panda_fy", "panda_fz", "hand_contact_n", "link_contact_n", "brake", "safety_event", "cmd_tick"] {
        h.push(s.into());
    }
    h
}

fn channel_header() -> Vec<String> {
    ["tick", "cmd_sent", "cmd_delivered", "cmd_dropped", "cmd_latest", "cmd_in_flight", "fb_sent", "fb_delivered", "fb_dropped", "fb_latest", "fb_in_flight"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn observer_header() -> Vec<String> {
    ["tick", "t", "fx", "fy", "fz", "amp_x", "amp_y", "amp_z", "v_raw", "v", "beta_observer", "beta_applied", "enabled"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn hands_header(dof: usize) -> Vec<String> {
    let mut h = vec!["tick".to_string(), "t".to_string()];
    h.extend(indexed("cmd", dof));
    h.extend(indexed("pos", dof));
    h.extend(indexed("current", dof));
    h.extend(indexed("brake", FINGERS));
    h
}

fn quat(p: &Pose) -> [f64; 4] {
    crate::kinematics::quat_wxyz(p)
}

type Writer = LogWriter<BufWriter<File>>;

struct Writers {
    operator: Writer,
    avatar: Writer,
    channel: Writer,
    observer: Writer,
    hands: Option<Writer>,
}

impl Writers {
    fn create(dir: &Path, hand_dof: Option<usize>) -> Result<Self, SimError> {
        fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })?;
        Ok(Self {
            operator: LogWriter::create(&dir.join(OPERATOR_LOG), &operator_header())?,
            avatar: LogWriter::create(&dir.join(AVATAR_LOG), &avatar_header())?,
            channel: LogWriter::create(&dir.join(CHANNEL_LOG), &channel_header())?,
            observer: LogWriter::create(&dir.join(OBSERVER_LOG), &observer_header())?,
            hands: match hand_dof {
                Some(n) => Some(LogWriter::create(&dir.join(HANDS_LOG), &hands_header(n))?),
                None => None,
            },
        })
    }

    fn finish(self) -> Result<(), SimError> {
        self.operator.finish()?;
        self.avatar.finish()?;
        self.channel.finish()?;
        self.observer.finish()?;
        if let Some(h) = self.hands {
            h.finish()?;
        }
        Ok(())
    }
}

fn write_tick(w: &mut Writers, sim: &Simulation, r: &TickRecord, t: f64) -> Result<(), SimError> {
    let tick = r.tick as i64;
    let b = &r.operator.breakdown;
    let cmd = r.operator.command_pose;
    let mut row = Row::new();
    row.int(tick).num(t).nums(r.operator_q.iter()).nums(r.operator_qd.iter());
    row.nums(cmd.translation.vector.iter()).nums(quat(&cmd).iter()).nums(r.human_goal.translation.vector.iter());
    row.nums(r.operator_ft.force.iter()).nums(r.operator_ft.torque.iter());
    for v in [&b.tau_cmd, &b.tau_f, &b.tau_lo, &b.tau_la, &b.tau_no, &b.tau_co, &b.alpha] {
        row.nums(v.iter());
    }
    row.num(b.beta).nums(b.tau_total.iter());
    match r.operator.prediction {
        Some(p) => row.nums(p.q.iter()).flag(p.stale),
        None => row.nums([f64::NAN; 7].iter()).flag(false),
    };
    match &r.feedback {
        Some(m) => row.int(m.payload.tick as i64).nums(m.payload.q.iter()),
        None => row.int(-1).nums([f64::NAN; 7].iter()),
    };
    w.operator.write(&row)?;

    let a = &r.avatar;
    let fb = &r.avatar_feedback;
    let mut row = Row::new();
    row.int(tick).num(t).text(a.mode.as_str()).num(a.fade_progress);
    row.nums(a.goal.translation.vector.iter()).nums(r.avatar_hand.translation.vector.iter()).nums(quat(&r.avatar_hand).iter());
    row.nums(fb.q.iter()).nums(fb.qdot.iter()).nums(a.tau.iter());
    row.nums(fb.sensor_wrench.force.iter()).nums(fb.sensor_wrench.torque.iter()).nums(fb.panda_force.iter());
    row.num(r.hand_contact_force).num(r.link_contact_force).flag(a.brake).flag(a.safety_event);
    row.int(sim.last_cmd_send.map_or(-1, |s| s as i64));
    w.avatar.write(&row)?;

    let (cs, cd, cx) = sim.command_channel.counts();
    let (fs_, fd, fx) = sim.feedback_channel.counts();
    let mut row = Row::new();
    row.int(tick).int(cs as i64).int(cd as i64).int(cx as i64);
    row.int(sim.command_channel.latest().map_or(-1, |m| m.send_tick as i64)).int(sim.command_channel.in_flight() as i64);
    row.int(fs_ as i64).int(fd as i64).int(fx as i64);
    row.int(sim.feedback_channel.latest().map_or(-1, |m| m.send_tick as i64)).int(sim.feedback_channel.in_flight() as i64);
    w.channel.write(&row)?;

    let amps = sim.observer.amplitudes();
    let mut row = Row::new();
    row.int(tick).num(t).nums(r.observer_input.iter()).nums(amps.iter());
    row.num(sim.observer.v_raw()).num(sim.observer.normalized(sim.observer.v_raw()));
    row.num(r.beta_observer).num(r.beta_applied).flag(sim.scenario.observer.enabled);
    w.observer.write(&row)?;
    Ok(())
}

/// Result of a logged run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub ticks: u64,
    pub wall_time: Duration,
}

/// Runs a scenario to completion, writing the CSV streams to `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path, opts: &RunOptions) -> Result<RunReport, SimError> {
    let started = Instant::now();
    let mut sim = Simulation::with_seed(scenario.clone(), opts.seed)?;
    let hand_dof = sim.hand.as_ref().map(|h| h.mapping.hand_dof);
    let mut writers = Writers::create(out_dir, hand_dof)?;
    let ticks = scenario.ticks();
    let dt = scenario.dt_s;
    for _ in 0..ticks {
        let t = sim.tick() as f64 * dt;
        let rec = sim.step()?;
        write_tick(&mut writers, &sim, &rec, t)?;
        if let Some((cmd, pos, cur, brakes)) = sim.hand_step(t, dt) {
            let mut row = Row::new();
            row.int(rec.tick as i64).num(t).nums(cmd.iter()).nums(pos.iter()).nums(cur.iter());
            for b in brakes {
                row.flag(b);
            }
            writers.hands.as_mut().expect("hand log").write(&row)?;
        }
        if opts.realtime {
            let due = Duration::from_secs_f64((rec.tick + 1) as f64 * dt);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
    writers.finish()?;
    Ok(RunReport { out_dir: out_dir.to_path_buf(), ticks, wall_time: started.elapsed() })
}
