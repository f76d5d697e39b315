use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::spectral::{SignalError, SpectralWindow};

/// Oscillation observer settings (config keys match the field names).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    pub dft_size: usize,
    pub dft_bin: usize,
    /// Un-normalised amplitude norm where feedback reduction starts.
    pub v_min: f64,
    /// Amplitude norm at which feedback is fully removed.
    pub v_max: f64,
    /// Time to ramp beta from 1 to 0.
    pub beta_down_seconds: f64,
    /// Time to ramp beta from 0 to 1.
    pub beta_up_seconds: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self { dft_size: 512, dft_bin: 4, v_min: 163.0, v_max: 500.0, beta_down_seconds: 0.8, beta_up_seconds: 1.7 }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        SpectralWindow::new(self.dft_size, self.dft_bin)?;
        if !(self.v_min < self.v_max) {
            return Err(SignalError::Thresholds { v_min: self.v_min, v_max: self.v_max });
        }
        for (name, value) in [("beta_down_seconds", self.beta_down_seconds), ("beta_up_seconds", self.beta_up_seconds)] {
            if !(value > 0.0) {
                return Err(SignalError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    /// Centre frequency of the observed bin at the given sample rate.
    pub fn bin_frequency(&self, sample_rate_hz: f64) -> f64 {
        self.dft_bin as f64 * sample_rate_hz / self.dft_size as f64
    }
}

/// Per-axis spectral windows over the feedback force and the rate-limited
/// feedback gain `beta` derived from them.
#[derive(Debug, Clone)]
pub struct ObserverState {
    config: ObserverConfig,
    windows: [SpectralWindow; 3],
    amplitudes: [f64; 3],
    v_raw: f64,
    beta: f64,
}

impl ObserverState {
    pub fn new(config: ObserverConfig) -> Result<Self, SignalError> {
        config.validate()?;
        let w = SpectralWindow::new(config.dft_size, config.dft_bin)?;
        Ok(Self { config, windows: [w.clone(), w.clone(), w], amplitudes: [0.0; 3], v_raw: 0.0, beta: 1.0 })
    }

    pub fn config(&self) -> &ObserverConfig {
        &self.config
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Euclidean norm of the three axis amplitudes from the last step.
    pub fn v_raw(&self) -> f64 {
        self.v_raw
    }

    pub fn amplitudes(&self) -> [f64; 3] {
        self.amplitudes
    }

    /// `v_raw` mapped linearly from `[v_min, v_max]` onto `[0, 1]`.
    pub fn normalized(&self, v_raw: f64) -> f64 {
        ((v_raw - self.config.v_min) / (self.config.v_max - self.config.v_min)).clamp(0.0, 1.0)
    }

    /// Pushes one force sample per axis and advances `beta` toward `1 - v`
    /// at no more than the configured ramp rates.
    pub fn step(&mut self, forces: &Vector3<f64>, dt: f64) -> f64 {
        assert!(dt > 0.0, "observer dt must be positive");
        for (axis, w) in self.windows.iter_mut().enumerate() {
            w.push(forces[axis]);
            self.amplitudes[axis] = w.amplitude();
        }
        self.v_raw = self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        let target = 1.0 - self.normalized(self.v_raw);
        let down = dt / self.config.beta_down_seconds;
        let up = dt / self.config.beta_up_seconds;
        self.beta = if target < self.beta {
            (self.beta - down).max(target)
        } else {
            (self.beta + up).min(target)
        }
        .clamp(0.0, 1.0);
        self.beta
    }
}
