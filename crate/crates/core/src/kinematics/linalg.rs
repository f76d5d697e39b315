use nalgebra::{DMatrix, Matrix6};
use thiserror::Error;

use super::{Matrix6x7, Matrix7};

/// Damping used by [`nullspace_projector`] callers that do not pick their own.
pub const NS_LAMBDA_DEFAULT: f64 = 0.05;

/// Relative singular-value cutoff below which an undamped inverse is refused.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("damping must be non-negative, got {0}")]
    NegativeDamping(f64),
    #[error("matrix is rank deficient (sigma_min/sigma_max = {ratio:e}) and no damping was given")]
    RankDeficient { ratio: f64 },
}

/// Damped right/left pseudoinverse `M^T (M M^T + l^2 I)^-1` (or the
/// left-sided form for tall matrices).
///
/// Evaluated through the SVD as `V diag(s / (s^2 + l^2)) U^T`, which equals
/// both closed forms and stays accurate for `l = 0`.
pub fn damped_pinv(m: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>, LinalgError> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(LinalgError::NegativeDamping(lambda));
    }
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let svd = m.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    if lambda == 0.0 && (smax == 0.0 || smin <= RANK_TOL * smax) {
        let ratio = if smax == 0.0 { 0.0 } else { smin / smax };
        return Err(LinalgError::RankDeficient { ratio });
    }
    let l2 = lambda * lambda;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    for k in 0..s.len() {
        let g = s[k] / (s[k] * s[k] + l2);
        out += v_t.row(k).transpose() * u.column(k).transpose() * g;
    }
    Ok(out)
}

/// `(J^T)^+` for a 6x7 Jacobian, i.e. the map from joint torques to the
/// equivalent hand wrench. `lambda = 0` uses a truncated SVD so singular
/// Jacobians still produce a finite result.
pub fn jt_pinv(j: &Matrix6x7, lambda: f64) -> Matrix6x7 {
    if lambda > 0.0 {
        let a: Matrix6<f64> = j * j.transpose() + Matrix6::identity() * (lambda * lambda);
        if let Some(ch) = a.cholesky() {
            return ch.solve(j);
        }
    }
    let jt = j.transpose();
    match jt.pseudo_inverse(1e-9) {
        Ok(p) => p,
        Err(_) => Matrix6x7::zeros(),
    }
}

/// Torque null-space projector `N = I - J^T (J^T)^+`.
pub fn nullspace_projector(j: &Matrix6x7, lambda: f64) -> Matrix7 {
    Matrix7::identity() - j.transpose() * jt_pinv(j, lambda)
}
