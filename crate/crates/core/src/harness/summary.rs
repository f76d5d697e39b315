//! Run summary recomputed purely from the CSV logs of a run directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kinematics::DOF;
use crate::op_ctrl::TorqueBreakdown;
use crate::sim::logs::{LogError, LogTable, AVATAR_LOG, CHANNEL_LOG, OBSERVER_LOG, OPERATOR_LOG};

use super::metrics::{shift_sweep, tracking_error, ErrorStats};

pub const SUMMARY_FILE: &str = "summary.json";
/// Largest shift considered by the summary's sweep (samples). Wider than
/// the CLI default so delayed runs do not pin the minimum to the edge.
pub const SUMMARY_MAX_SHIFT: usize = 250;

/// The four mandatory log streams of a run.
#[derive(Debug, Clone)]
pub struct RunLogs {
    pub operator: LogTable,
    pub avatar: LogTable,
    pub channel: LogTable,
    pub observer: LogTable,
}

impl RunLogs {
    pub fn read(dir: &Path) -> Result<Self, LogError> {
        Ok(Self {
            operator: LogTable::read(&dir.join(OPERATOR_LOG))?,
            avatar: LogTable::read(&dir.join(AVATAR_LOG))?,
            channel: LogTable::read(&dir.join(CHANNEL_LOG))?,
            observer: LogTable::read(&dir.join(OBSERVER_LOG))?,
        })
    }

    /// Commanded operator hand positions.
    pub fn command_positions(&self) -> Result<Vec<[f64; 3]>, LogError> {
        self.operator.points("cmd_x", "cmd_y", "cmd_z")
    }

    /// Measured avatar hand positions.
    pub fn avatar_positions(&self) -> Result<Vec<[f64; 3]>, LogError> {
        self.avatar.points("hand_x", "hand_y", "hand_z")
    }

    pub fn modes(&self) -> Result<Vec<String>, LogError> {
        self.avatar.text_col("mode")
    }

    /// `true` on ticks where the avatar was tracking commands.
    pub fn track_mask(&self) -> Result<Vec<bool>, LogError> {
        Ok(self.modes()?.iter().map(|m| m == "TRACK").collect())
    }

    pub fn dt(&self) -> f64 {
        match self.operator.col("t") {
            Ok(t) if t.len() > 1 => t[1] - t[0],
            _ => 0.001,
        }
    }

    /// Ticks whose logged total torque differs from the recomposition of
    /// the logged parts. Comparison is bit-exact.
    pub fn audit_failures(&self) -> Result<Vec<u64>, LogError> {
        let o = &self.operator;
        let parts: Vec<Vec<&[f64]>> = ["tau_cmd", "tau_f", "tau_lo", "tau_la", "tau_no", "tau_co", "alpha", "tau_total"]
            .iter()
            .map(|p| o.cols(p, DOF))
            .collect::<Result<_, _>>()?;
        let beta = o.col("beta")?;
        let tick = o.col("tick")?;
        let mut bad = Vec::new();
        for r in 0..o.rows() {
            let v = |k: usize| -> [f64; DOF] { std::array::from_fn(|i| parts[k][i][r]) };
            let total = TorqueBreakdown::recompose(&v(0), &v(1), &v(2), &v(3), &v(4), &v(5), &v(6), beta[r]);
            if total.iter().zip(v(7)).any(|(a, b)| a.to_bits() != b.to_bits()) {
                bad.push(tick[r] as u64);
            }
        }
        Ok(bad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub unshifted_mm: ErrorStats,
    pub best_shift_ms: f64,
    pub shifted_mm: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSummary {
    pub min: f64,
    pub mean: f64,
    pub final_value: f64,
    pub seconds_below_0_2: f64,
    /// After its minimum, β came back to at least 0.99.
    pub recovered: bool,
    pub peak_v_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ticks: usize,
    pub duration_s: f64,
    pub tracking: Option<TrackingSummary>,
    pub safety_events: usize,
    pub seconds_in_mode: Vec<(String, f64)>,
    pub beta: BetaSummary,
    pub max_hand_contact_n: f64,
    pub max_link_contact_n: f64,
    pub mean_operator_force_n: f64,
    pub audit_failures: usize,
    pub stale_predictions: usize,
    pub commands_sent: u64,
    pub commands_delivered: u64,
    pub commands_dropped: u64,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

impl Summary {
    pub fn from_dir(dir: &Path) -> Result<Self, LogError> {
        Self::from_logs(&RunLogs::read(dir)?)
    }

    pub fn from_logs(logs: &RunLogs) -> Result<Self, LogError> {
        let dt = logs.dt();
        let n = logs.operator.rows();
        let modes = logs.modes()?;
        let mask: Vec<bool> = modes.iter().map(|m| m == "TRACK").collect();

        let cmd = logs.command_positions()?;
        let av = logs.avatar_positions()?;
        let to_mm = |s: ErrorStats| ErrorStats { mean: s.mean * 1e3, p95: s.p95 * 1e3, max: s.max * 1e3, samples: s.samples };
        let tracking = match (tracking_error(&cmd, &av, 0, Some(&mask)), shift_sweep(&cmd, &av, SUMMARY_MAX_SHIFT, Some(&mask))) {
            (Ok(unshifted), Ok(sweep)) => tracking_error(&cmd, &av, sweep.argmin, Some(&mask)).ok().map(|shifted| TrackingSummary {
                unshifted_mm: to_mm(unshifted),
                best_shift_ms: sweep.argmin as f64 * dt * 1e3,
                shifted_mm: to_mm(shifted),
            }),
            _ => None,
        };

        let safety = logs.avatar.col("safety_event")?;
        let safety_events = safety.iter().filter(|&&v| v != 0.0).count();
        let mut ticks_in_mode: Vec<(String, usize)> = Vec::new();
        for m in &modes {
            match ticks_in_mode.iter_mut().find(|(k, _)| k == m) {
                Some((_, c)) => *c += 1,
                None => ticks_in_mode.push((m.clone(), 1)),
            }
        }
        let seconds_in_mode = ticks_in_mode.into_iter().map(|(m, c)| (m, c as f64 * dt)).collect();

        let beta = logs.observer.col("beta_applied")?;
        let (argmin, bmin) = beta
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 1.0));
        let beta_summary = BetaSummary {
            min: bmin,
            mean: if beta.is_empty() { 1.0 } else { beta.iter().sum::<f64>() / beta.len() as f64 },
            final_value: beta.last().copied().unwrap_or(1.0),
            seconds_below_0_2: beta.iter().filter(|&&b| b < 0.2).count() as f64 * dt,
            recovered: beta[argmin..].iter().any(|&b| b >= 0.99),
            peak_v_raw: max_of(logs.observer.col("v_raw")?),
        };

        let (fx, fy, fz) = (logs.operator.col("ft_fx")?, logs.operator.col("ft_fy")?, logs.operator.col("ft_fz")?);
        let mean_force = if n == 0 {
            0.0
        } else {
            (0..n).map(|i| (fx[i] * fx[i] + fy[i] * fy[i] + fz[i] * fz[i]).sqrt()).sum::<f64>() / n as f64
        };
        let last = |c: &str| -> Result<u64, LogError> { Ok(logs.channel.col(c)?.last().copied().unwrap_or(0.0) as u64) };
        Ok(Self {
            ticks: n,
            duration_s: n as f64 * dt,
            tracking,
            safety_events,
            seconds_in_mode,
            beta: beta_summary,
            max_hand_contact_n: max_of(logs.avatar.col("hand_contact_n")?),
            max_link_contact_n: max_of(logs.avatar.col("link_contact_n")?),
            mean_operator_force_n: mean_force,
            audit_failures: logs.audit_failures()?.len(),
            stale_predictions: logs.operator.col("pred_stale")?.iter().filter(|&&v| v != 0.0).count(),
            commands_sent: last("cmd_sent")?,
            commands_delivered: last("cmd_delivered")?,
            commands_dropped: last("cmd_dropped")?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<(), LogError> {
        let path = dir.join(SUMMARY_FILE);
        std::fs::write(&path, self.to_json()).map_err(|source| LogError::Io { path: path.display().to_string(), source })
    }
}
