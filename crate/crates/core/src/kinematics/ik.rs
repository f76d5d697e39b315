use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{body_pose_error, JointVector, KinematicChain, Pose, DOF};

/// Damped-least-squares IK settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkParams {
    pub max_iters: usize,
    /// m
    pub tol_translation: f64,
    /// rad
    pub tol_rotation: f64,
    /// Starting damping; doubled after a rejected step, halved after an
    /// accepted one.
    pub damping: f64,
    pub min_damping: f64,
    pub max_damping: f64,
    /// Largest joint step per iteration (rad, infinity norm).
    pub max_step: f64,
    /// Extra attempts from pseudo-random in-limit seeds after a failure.
    pub restarts: usize,
    pub restart_seed: u64,
}

impl IkParams {
    /// Settings for cold-start queries (workspace analysis): eight restarts.
    pub fn global() -> Self {
        Self { restarts: 8, ..Self::default() }
    }
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol_translation: 1e-4,
            tol_rotation: 1e-3,
            damping: 0.05,
            min_damping: 1e-4,
            max_damping: 10.0,
            max_step: 0.5,
            restarts: 0,
            restart_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointVector,
    pub iterations: usize,
    pub residual_translation: f64,
    pub residual_rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IkError {
    #[error("IK did not converge (residual {residual_translation:.3e} m, {residual_rotation:.3e} rad)")]
    NotReached {
        /// Best configuration found.
        q: JointVector,
        residual_translation: f64,
        residual_rotation: f64,
    },
}

impl IkError {
    pub fn residual(&self) -> f64 {
        let IkError::NotReached { residual_translation, residual_rotation, .. } = self;
        residual_translation + residual_rotation
    }
}

fn dls_step(j: &super::Matrix6x7, e: &Vector6<f64>, lambda: f64) -> JointVector {
    let a: Matrix6<f64> = j * j.transpose() + Matrix6::identity() * (lambda * lambda);
    match a.cholesky() {
        Some(ch) => j.transpose() * ch.solve(e),
        None => JointVector::zeros(),
    }
}

fn residuals(e: &Vector6<f64>) -> (f64, f64) {
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm())
}

fn attempt(chain: &KinematicChain, target: &Pose, q_init: &JointVector, params: &IkParams) -> Result<IkSolution, IkError> {
    let mut q = chain.clamp(q_init);
    let mut e = body_pose_error(&chain.forward_kinematics(&q), target);
    let mut cost = e.norm_squared();
    let mut lambda = params.damping;

    for iter in 0..=params.max_iters {
        let (rt, rr) = residuals(&e);
        if rt <= params.tol_translation && rr <= params.tol_rotation {
            return Ok(IkSolution { q, iterations: iter, residual_translation: rt, residual_rotation: rr });
        }
        if iter == params.max_iters {
            break;
        }
        let mut j = chain.body_jacobian(&q);
        let mut dq = dls_step(&j, &e, lambda);
        // Joints resting on a limit and pushed outward are frozen for this step.
        let mut frozen = false;
        for i in 0..DOF {
            let at_lo = q[i] <= chain.lower(i) && dq[i] < 0.0;
            let at_hi = q[i] >= chain.upper(i) && dq[i] > 0.0;
            if at_lo || at_hi {
                j.column_mut(i).fill(0.0);
                frozen = true;
            }
        }
        if frozen {
            dq = dls_step(&j, &e, lambda);
        }
        let amax = dq.amax();
        if amax > params.max_step {
            dq *= params.max_step / amax;
        }
        let q_new = chain.clamp(&(q + dq));
        let e_new = body_pose_error(&chain.forward_kinematics(&q_new), target);
        let cost_new = e_new.norm_squared();
        if cost_new < cost {
            q = q_new;
            e = e_new;
            cost = cost_new;
            lambda = (lambda * 0.5).max(params.min_damping);
        } else {
            lambda = (lambda * 2.0).min(params.max_damping);
        }
    }
    let (rt, rr) = residuals(&e);
    Err(IkError::NotReached { q, residual_translation: rt, residual_rotation: rr })
}

/// Damped least squares from `q_init`, with joint-limit clamping every
/// iteration and adaptive damping. The rotation residual is the log map of
/// `R_current^-1 R_target`.
pub fn solve_ik(chain: &KinematicChain, target: &Pose, q_init: &JointVector, params: &IkParams) -> Result<IkSolution, IkError> {
    let mut best = match attempt(chain, target, q_init, params) {
        Ok(sol) => return Ok(sol),
        Err(e) => e,
    };
    if params.restarts == 0 {
        return Err(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.restart_seed);
    for _ in 0..params.restarts {
        let seed = random_configuration(chain, &mut rng, 0.0);
        match attempt(chain, target, &seed, params) {
            Ok(sol) => return Ok(sol),
            Err(e) if e.residual() < best.residual() => best = e,
            Err(_) => {}
        }
    }
    Err(best)
}

/// Uniformly random configuration inside the limits, shrunk by `margin` rad.
pub fn random_configuration<R: Rng>(chain: &KinematicChain, rng: &mut R, margin: f64) -> JointVector {
    JointVector::from_fn(|i, _| rng.gen_range(chain.lower(i) + margin..chain.upper(i) - margin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_solved_returns_seed() {
        let chain = KinematicChain::panda();
        let q0 = JointVector::from_row_slice(&[0.1, -0.3, 0.2, -2.0, 0.1, 1.8, 0.7]);
        let sol = solve_ik(&chain, &chain.forward_kinematics(&q0), &q0, &IkParams::default()).unwrap();
        assert_eq!(sol.q, q0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let chain = KinematicChain::panda();
        let q0 = chain.mid_configuration();
        let shoulder = chain.link_frames(&q0)[1].translation.vector;
        let target = Pose::translation(shoulder.x + 1.5, shoulder.y, shoulder.z);
        let err = solve_ik(&chain, &target, &q0, &IkParams::default()).unwrap_err();
        assert!(err.residual() > 0.1);
    }

    #[test]
    fn nearby_target_converges_within_limits() {
        let chain = KinematicChain::panda();
        let q0 = JointVector::from_row_slice(&[0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.785]);
        let q1 = q0 + JointVector::from_element(0.15);
        let target = chain.forward_kinematics(&q1);
        let sol = solve_ik(&chain, &target, &q0, &IkParams::default()).unwrap();
        assert!(chain.within_limits(&sol.q));
        assert!(sol.residual_translation <= 1e-4 && sol.residual_rotation <= 1e-3);
    }
}
