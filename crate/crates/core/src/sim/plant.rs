use serde::{Deserialize, Serialize};

use crate::kinematics::{JointVector, KinematicChain, DOF};

/// Diagonal joint inertia and viscous friction of a simulated arm. Gravity
/// is assumed compensated by the arm itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// kg·m²
    pub inertia: [f64; 7],
    /// N·m·s/rad
    pub viscous: [f64; 7],
}

impl Default for PlantParams {
    fn default() -> Self {
        Self { inertia: [0.6, 0.6, 0.4, 0.4, 0.1, 0.1, 0.04], viscous: [1.2, 1.2, 0.8, 0.8, 0.25, 0.25, 0.1] }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.inertia.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err("plant inertia must be positive".into());
        }
        if self.viscous.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err("plant viscous friction must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ArmPlant {
    pub chain: KinematicChain,
    pub q: JointVector,
    pub qdot: JointVector,
    pub inertia: JointVector,
    pub viscous: JointVector,
    /// Engaged brakes hold the joints still.
    pub brake: bool,
}

impl ArmPlant {
    pub fn new(chain: KinematicChain, params: &PlantParams, q0: &JointVector) -> Self {
        let q = chain.clamp(q0);
        Self {
            chain,
            q,
            qdot: JointVector::zeros(),
            inertia: JointVector::from_row_slice(&params.inertia),
            viscous: JointVector::from_row_slice(&params.viscous),
            brake: false,
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.qdot.component_mul(&self.qdot).dot(&self.inertia)
    }

    /// Semi-implicit Euler with an inelastic stop at the position limits.
    /// Returns the indices of joints that hit a stop this step.
    pub fn step(&mut self, tau: &JointVector, tau_ext: &JointVector, dt: f64) -> Vec<usize> {
        if self.brake {
            self.qdot = JointVector::zeros();
            return Vec::new();
        }
        let acc = (tau + tau_ext - self.viscous.component_mul(&self.qdot)).component_div(&self.inertia);
        self.qdot += acc * dt;
        self.q += self.qdot * dt;
        let mut hit = Vec::new();
        for i in 0..DOF {
            let (lo, hi) = (self.chain.lower(i), self.chain.upper(i));
            if self.q[i] < lo {
                self.q[i] = lo;
                self.qdot[i] = self.qdot[i].max(0.0);
                hit.push(i);
            } else if self.q[i] > hi {
                self.q[i] = hi;
                self.qdot[i] = self.qdot[i].min(0.0);
                hit.push(i);
            }
        }
        hit
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}
