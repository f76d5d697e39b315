//! Force/torque sensor calibration.
//!
//! A static sensor reads `f = b_f + m g` and `t = b_t + r x g` where `g` is
//! gravity in the sensor frame and `r = m c` is the first mass moment of
//! everything mounted after the sensor. Substituting `r` for `m c` makes the
//! model linear in `(b_f, m, b_t, r)`, which is solved by least squares.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Pose, Wrench};

pub const GRAVITY: f64 = 9.81;
/// Minimum number of static poses accepted by [`calibrate`].
pub const MIN_SAMPLES: usize = 20;
/// Readings averaged per pose.
pub const READINGS_PER_SAMPLE: usize = 100;
/// Default maximum force residual RMS for an acceptable fit.
pub const DEFAULT_MAX_RESIDUAL: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { got: usize, required: usize },
    #[error("gravity directions do not span 3D (smallest scatter eigenvalue {0:.3e})")]
    DegenerateData(f64),
    #[error("sample {index}: gravity norm {norm:.3} m/s^2 is not close to {GRAVITY}")]
    GravityNorm { index: usize, norm: f64 },
    #[error("force residual RMS {rms:.4} N exceeds {max:.4} N")]
    PoorFit { rms: f64, max: f64 },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One static pose: gravity in the sensor frame and the averaged reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub gravity_in_sensor: Vector3<f64>,
    pub mean_wrench: Wrench,
}

impl CalibrationSample {
    /// Averages a batch of raw readings taken at one static pose.
    pub fn from_readings(gravity_in_sensor: Vector3<f64>, readings: &[Wrench]) -> Self {
        let n = readings.len().max(1) as f64;
        let sum = readings.iter().fold(Wrench::zero(), |acc, w| acc + *w);
        Self { gravity_in_sensor, mean_wrench: Wrench::new(sum.force / n, sum.torque / n) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtCalibration {
    /// N
    pub force_bias: Vector3<f64>,
    /// N·m
    pub torque_bias: Vector3<f64>,
    /// kg
    pub mass: f64,
    /// Centre of mass in the sensor frame, m.
    pub com: Vector3<f64>,
    /// RMS of the force-equation residuals, N.
    pub force_residual_rms: f64,
    /// RMS of the torque-equation residuals, N·m.
    pub torque_residual_rms: f64,
}

impl FtCalibration {
    pub fn identity() -> Self {
        Self {
            force_bias: Vector3::zeros(),
            torque_bias: Vector3::zeros(),
            mass: 0.0,
            com: Vector3::zeros(),
            force_residual_rms: 0.0,
            torque_residual_rms: 0.0,
        }
    }

    /// Static load (bias plus gravity) the sensor reads for gravity `g` in
    /// its frame.
    pub fn static_load(&self, gravity_in_sensor: &Vector3<f64>) -> Wrench {
        let r = self.com * self.mass;
        Wrench::new(self.force_bias + gravity_in_sensor * self.mass, self.torque_bias + r.cross(gravity_in_sensor))
    }

    /// Raw reading produced by an external wrench (sensor frame) under this
    /// calibration's biases and load.
    pub fn forward_model(&self, external: &Wrench, sensor_orientation: &UnitQuaternion<f64>) -> Wrench {
        self.static_load(&gravity_in_sensor(sensor_orientation)) + *external
    }

    pub fn to_file(&self) -> CalibrationFile {
        CalibrationFile {
            format: 1,
            force_bias_n: self.force_bias.into(),
            torque_bias_nm: self.torque_bias.into(),
            mass_kg: self.mass,
            com_m: self.com.into(),
            force_residual_rms_n: self.force_residual_rms,
            torque_residual_rms_nm: self.torque_residual_rms,
        }
    }
}

/// JSON layout of a calibration with explicit units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub format: u32,
    pub force_bias_n: [f64; 3],
    pub torque_bias_nm: [f64; 3],
    pub mass_kg: f64,
    pub com_m: [f64; 3],
    pub force_residual_rms_n: f64,
    pub torque_residual_rms_nm: f64,
}

impl From<&CalibrationFile> for FtCalibration {
    fn from(f: &CalibrationFile) -> Self {
        Self {
            force_bias: f.force_bias_n.into(),
            torque_bias: f.torque_bias_nm.into(),
            mass: f.mass_kg,
            com: f.com_m.into(),
            force_residual_rms: f.force_residual_rms_n,
            torque_residual_rms: f.torque_residual_rms_nm,
        }
    }
}

/// Gravity expressed in the sensor frame for a sensor with world
/// orientation `r` (world gravity is `-z`).
pub fn gravity_in_sensor(sensor_orientation: &UnitQuaternion<f64>) -> Vector3<f64> {
    sensor_orientation.inverse() * Vector3::new(0.0, 0.0, -GRAVITY)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Least-squares estimate of biases, mass and centre of mass.
pub fn calibrate(samples: &[CalibrationSample]) -> Result<FtCalibration, CalibrationError> {
    calibrate_with_minimum(samples, MIN_SAMPLES)
}

/// [`calibrate`] with a custom minimum sample count (never below 4, the
/// smallest count that can determine all ten unknowns).
pub fn calibrate_with_minimum(samples: &[CalibrationSample], min_samples: usize) -> Result<FtCalibration, CalibrationError> {
    let required = min_samples.max(4);
    if samples.len() < required {
        return Err(CalibrationError::TooFewSamples { got: samples.len(), required });
    }
    let mut scatter = Matrix3::zeros();
    for (index, s) in samples.iter().enumerate() {
        let norm = s.gravity_in_sensor.norm();
        if (norm - GRAVITY).abs() > 0.2 {
            return Err(CalibrationError::GravityNorm { index, norm });
        }
        let d = s.gravity_in_sensor / norm;
        scatter += d * d.transpose();
    }
    scatter /= samples.len() as f64;
    let min_eig = SymmetricEigen::new(scatter).eigenvalues.min();
    if min_eig < 1e-3 {
        return Err(CalibrationError::DegenerateData(min_eig));
    }

    // Unknowns: [b_f (3), m, b_t (3), r (3)].
    let rows = 6 * samples.len();
    let mut a = DMatrix::zeros(rows, 10);
    let mut b = DVector::zeros(rows);
    for (i, s) in samples.iter().enumerate() {
        let g = s.gravity_in_sensor;
        let r0 = 6 * i;
        for k in 0..3 {
            a[(r0 + k, k)] = 1.0;
            a[(r0 + k, 3)] = g[k];
            b[r0 + k] = s.mean_wrench.force[k];
            a[(r0 + 3 + k, 4 + k)] = 1.0;
            b[r0 + 3 + k] = s.mean_wrench.torque[k];
        }
        // r x g = -[g]x r
        let m = -skew(&g);
        for k in 0..3 {
            for c in 0..3 {
                a[(r0 + 3 + k, 7 + c)] = m[(k, c)];
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|_| CalibrationError::DegenerateData(min_eig))?;
    let residual = &a * &x - &b;
    let (mut fsq, mut tsq) = (0.0, 0.0);
    for i in 0..samples.len() {
        for k in 0..3 {
            fsq += residual[6 * i + k].powi(2);
            tsq += residual[6 * i + 3 + k].powi(2);
        }
    }
    let n = (3 * samples.len()) as f64;
    let mass = x[3].max(0.0);
    let r = Vector3::new(x[7], x[8], x[9]);
    let com = if mass < 1e-6 { Vector3::zeros() } else { r / mass };
    Ok(FtCalibration {
        force_bias: Vector3::new(x[0], x[1], x[2]),
        torque_bias: Vector3::new(x[4], x[5], x[6]),
        mass,
        com,
        force_residual_rms: (fsq / n).sqrt(),
        torque_residual_rms: (tsq / n).sqrt(),
    })
}

/// [`calibrate_with_minimum`] plus a residual gate on the force RMS.
pub fn calibrate_checked(samples: &[CalibrationSample], min_samples: usize, max_residual: f64) -> Result<FtCalibration, CalibrationError> {
    let cal = calibrate_with_minimum(samples, min_samples)?;
    if cal.force_residual_rms > max_residual {
        return Err(CalibrationError::PoorFit { rms: cal.force_residual_rms, max: max_residual });
    }
    Ok(cal)
}

/// Removes bias and payload gravity from a raw reading and re-expresses the
/// remaining external wrench in the hand frame. `hand_from_sensor` is the
/// sensor pose in the hand frame.
pub fn compensate(raw: &Wrench, sensor_orientation: &UnitQuaternion<f64>, calib: &FtCalibration, hand_from_sensor: &Pose) -> Wrench {
    let external = *raw - calib.static_load(&gravity_in_sensor(sensor_orientation));
    external.transformed(hand_from_sensor)
}

/// One line of a calibration sample file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleLine {
    /// m/s^2, sensor frame
    pub gravity: [f64; 3],
    /// `[fx, fy, fz, tx, ty, tz]`
    pub wrench: [f64; 6],
}

impl From<&SampleLine> for CalibrationSample {
    fn from(l: &SampleLine) -> Self {
        let w = &l.wrench;
        CalibrationSample {
            gravity_in_sensor: l.gravity.into(),
            mean_wrench: Wrench::new(Vector3::new(w[0], w[1], w[2]), Vector3::new(w[3], w[4], w[5])),
        }
    }
}

impl From<&CalibrationSample> for SampleLine {
    fn from(s: &CalibrationSample) -> Self {
        let (f, t) = (s.mean_wrench.force, s.mean_wrench.torque);
        SampleLine { gravity: s.gravity_in_sensor.into(), wrench: [f.x, f.y, f.z, t.x, t.y, t.z] }
    }
}

/// Reads JSON-lines samples; blank lines are skipped.
pub fn read_samples(reader: impl BufRead) -> Result<Vec<CalibrationSample>, CalibrationError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SampleLine =
            serde_json::from_str(&line).map_err(|source| CalibrationError::Parse { line: i + 1, source })?;
        out.push(CalibrationSample::from(&parsed));
    }
    Ok(out)
}

pub fn write_samples(mut writer: impl Write, samples: &[CalibrationSample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut writer, &SampleLine::from(s))?;
        writeln!(writer)?;
    }
    Ok(())
}
