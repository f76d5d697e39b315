//! Trajectory comparison metrics over logged position traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("traces differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("trace of {len} samples is too short for a shift of {max_shift}")]
    TooShort { len: usize, max_shift: usize },
    #[error("no samples selected")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
    pub samples: usize,
}

impl ErrorStats {
    fn from_errors(mut e: Vec<f64>) -> Result<Self, MetricError> {
        if e.is_empty() {
            return Err(MetricError::Empty);
        }
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        e.sort_by(f64::total_cmp);
        // Nearest-rank percentile.
        let rank = ((0.95 * e.len() as f64).ceil() as usize).clamp(1, e.len());
        Ok(Self { mean, p95: e[rank - 1], max: e[e.len() - 1], samples: e.len() })
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn check(reference: &[[f64; 3]], measured: &[[f64; 3]], mask: Option<&[bool]>) -> Result<(), MetricError> {
    if reference.len() != measured.len() {
        return Err(MetricError::LengthMismatch(reference.len(), measured.len()));
    }
    if let Some(m) = mask {
        if m.len() != measured.len() {
            return Err(MetricError::LengthMismatch(measured.len(), m.len()));
        }
    }
    Ok(())
}

/// Errors `|measured[t] - reference[t - shift]|` for `t` in `start..`.
fn shifted_errors(reference: &[[f64; 3]], measured: &[[f64; 3]], shift: usize, start: usize, mask: Option<&[bool]>) -> Vec<f64> {
    (start.max(shift)..measured.len())
        .filter(|&t| mask.map_or(true, |m| m[t]))
        .map(|t| dist(&measured[t], &reference[t - shift]))
        .collect()
}

/// Translation error of `measured` against `reference` delayed by `shift`
/// samples. `mask` selects which measured samples count.
pub fn tracking_error(reference: &[[f64; 3]], measured: &[[f64; 3]], shift: usize, mask: Option<&[bool]>) -> Result<ErrorStats, MetricError> {
    check(reference, measured, mask)?;
    if shift >= measured.len() {
        return Err(MetricError::TooShort { len: measured.len(), max_shift: shift });
    }
    ErrorStats::from_errors(shifted_errors(reference, measured, shift, 0, mask))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSweep {
    /// Mean error per shift, index = shift in samples.
    pub curve: Vec<f64>,
    pub argmin: usize,
    pub min_error: f64,
}

/// Mean error for every shift `0..=max_shift`. All shifts are evaluated
/// over the same sample set (`t >= max_shift`) so the curve is comparable.
pub fn shift_sweep(reference: &[[f64; 3]], measured: &[[f64; 3]], max_shift: usize, mask: Option<&[bool]>) -> Result<ShiftSweep, MetricError> {
    check(reference, measured, mask)?;
    if measured.len() <= max_shift {
        return Err(MetricError::TooShort { len: measured.len(), max_shift });
    }
    let mut curve = Vec::with_capacity(max_shift + 1);
    for s in 0..=max_shift {
        let e = shifted_errors(reference, measured, s, max_shift, mask);
        if e.is_empty() {
            return Err(MetricError::Empty);
        }
        curve.push(e.iter().sum::<f64>() / e.len() as f64);
    }
    let (argmin, min_error) = curve
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty curve");
    Ok(ShiftSweep { curve, argmin, min_error })
}

/// Normalized cross-correlation `c(l) = corr(a[t + l], b[t])` for
/// `l in -max_lag..=max_lag`, summed over channels. A peak at negative
/// `l` means `a` leads `b`.
pub fn cross_correlation(a: &[Vec<f64>], b: &[Vec<f64>], max_lag: usize) -> Vec<(i64, f64)> {
    let m = max_lag as i64;
    (-m..=m)
        .map(|lag| {
            let c: f64 = a.iter().zip(b).map(|(x, y)| correlation_at(x, y, lag)).sum();
            (lag, c)
        })
        .collect()
}

fn correlation_at(a: &[f64], b: &[f64], lag: i64) -> f64 {
    let n = a.len().min(b.len()) as i64;
    let lo = (-lag).max(0);
    let hi = (n - lag).min(n);
    if hi - lo < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (lo..hi).map(|t| a[(t + lag) as usize]).collect();
    let ys: Vec<f64> = (lo..hi).map(|t| b[t as usize]).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Lag of the correlation peak.
pub fn peak_lag(curve: &[(i64, f64)]) -> Option<i64> {
    curve.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|&(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 1e-3;
                [0.1 * (0.7 * t).sin() + 0.02 * (3.1 * t).cos(), 0.05 * (1.3 * t).cos(), 0.03 * (2.0 * t).sin()]
            })
            .collect()
    }

    #[test]
    fn identical_traces() {
        let a = trace(2000);
        let s = shift_sweep(&a, &a, 100, None).unwrap();
        assert_eq!(s.argmin, 0);
        assert_eq!(s.min_error, 0.0);
        assert_eq!(tracking_error(&a, &a, 0, None).unwrap().mean, 0.0);
    }

    #[test]
    fn constant_offset_is_mean() {
        let a = trace(500);
        let b: Vec<_> = a.iter().map(|p| [p[0], p[1] + 0.003, p[2] + 0.004]).collect();
        let e = tracking_error(&a, &b, 0, None).unwrap();
        assert!((e.mean - 0.005).abs() < 1e-15);
        assert!((e.p95 - 0.005).abs() < 1e-15);
    }

    #[test]
    fn injected_delay_recovered() {
        let a = trace(5000);
        let b: Vec<_> = (0..a.len()).map(|t| a[t.saturating_sub(44)]).collect();
        let s = shift_sweep(&a, &b, 100, None).unwrap();
        assert_eq!(s.argmin, 44);
        assert!(s.min_error < 1e-15);
    }

    #[test]
    fn too_short_is_an_error() {
        let a = trace(50);
        assert!(matches!(shift_sweep(&a, &a, 100, None), Err(MetricError::TooShort { .. })));
    }

    #[test]
    fn correlation_peak_sign() {
        let x: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.004).sin()).collect();
        // y lags x by 120 samples, so x leads: peak at -120.
        let y: Vec<f64> = (0..3000).map(|i| ((i as f64 - 120.0) * 0.004).sin()).collect();
        let c = cross_correlation(&[x], &[y], 300);
        assert_eq!(peak_lag(&c), Some(-120));
    }
}
