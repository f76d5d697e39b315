//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use telemanip::kinematics::{JointVector, KinematicChain, DOF};

pub type Mat4 = [[f64; 4]; 4];

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(format!("{name}.json"))
}

/// Every shipped scenario file, sorted by name.
pub fn shipped_scenarios() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(repo_root().join("scenarios"))
        .expect("scenarios directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map_or(false, |e| e == "json"))
        .collect();
    v.sort();
    v
}

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Homogeneous matrix from a translation and a w,x,y,z quaternion.
fn homogeneous(t: [f64; 3], q: [f64; 4]) -> Mat4 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), t[0]],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), t[1]],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Rodrigues rotation about a unit axis as a homogeneous matrix.
fn axis_rotation(a: [f64; 3], angle: f64) -> Mat4 {
    let (s, c) = angle.sin_cos();
    let v = 1.0 - c;
    let [x, y, z] = a;
    [
        [c + x * x * v, x * y * v - z * s, x * z * v + y * s, 0.0],
        [y * x * v + z * s, c + y * y * v, y * z * v - x * s, 0.0],
        [z * x * v - y * s, z * y * v + x * s, c + z * z * v, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Forward kinematics by explicit 4x4 matrix products, built from the
/// chain's serialized description rather than its runtime types.
pub fn fk_oracle(chain: &KinematicChain, q: &JointVector) -> Mat4 {
    let file = chain.to_file();
    let mut t = homogeneous(file.mount.translation, file.mount.rotation);
    for (i, j) in file.joints.iter().enumerate() {
        t = mat_mul(&t, &homogeneous(j.origin_translation, j.origin_rotation_quaternion));
        t = mat_mul(&t, &axis_rotation(j.axis, q[i]));
    }
    mat_mul(&t, &homogeneous(file.tool.translation, file.tool.rotation))
}

/// Central-difference body Jacobian from the matrix oracle: linear rows
/// are `R^T dp/dq`, angular rows the vee of `R^T dR/dq`.
pub fn fd_body_jacobian(chain: &KinematicChain, q: &JointVector, h: f64) -> [[f64; DOF]; 6] {
    let t0 = fk_oracle(chain, q);
    let mut jac = [[0.0; DOF]; 6];
    for c in 0..DOF {
        let mut qp = *q;
        let mut qm = *q;
        qp[c] += h;
        qm[c] -= h;
        let (tp, tm) = (fk_oracle(chain, &qp), fk_oracle(chain, &qm));
        let mut dp = [0.0; 3];
        let mut dr = [[0.0; 3]; 3];
        for i in 0..3 {
            dp[i] = (tp[i][3] - tm[i][3]) / (2.0 * h);
            for j in 0..3 {
                dr[i][j] = (tp[i][j] - tm[i][j]) / (2.0 * h);
            }
        }
        // R^T dp and R^T dR
        let mut w = [[0.0; 3]; 3];
        for i in 0..3 {
            jac[i][c] = (0..3).map(|k| t0[k][i] * dp[k]).sum();
            for j in 0..3 {
                w[i][j] = (0..3).map(|k| t0[k][i] * dr[k][j]).sum();
            }
        }
        jac[3][c] = 0.5 * (w[2][1] - w[1][2]);
        jac[4][c] = 0.5 * (w[0][2] - w[2][0]);
        jac[5][c] = 0.5 * (w[1][0] - w[0][1]);
    }
    jac
}

/// Magnitude of one bin of the Hanning-windowed DFT of `x`, evaluated
/// naively with the window written as sin^2.
pub fn windowed_dft_bin(x: &[f64], bin: usize) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let w = (PI * k as f64 / n).sin().powi(2);
        let ph = 2.0 * PI * (bin * k) as f64 / n;
        re += w * v * ph.cos();
        im -= w * v * ph.sin();
    }
    (re * re + im * im).sqrt()
}

/// Synthetic FT sensor: the reading for gravity `g` (sensor frame) with
/// the given biases, mass and centre of mass.
pub fn synthetic_reading(g: [f64; 3], force_bias: [f64; 3], torque_bias: [f64; 3], mass: f64, com: [f64; 3]) -> [f64; 6] {
    let f = [mass * g[0], mass * g[1], mass * g[2]];
    let t = [com[1] * f[2] - com[2] * f[1], com[2] * f[0] - com[0] * f[2], com[0] * f[1] - com[1] * f[0]];
    [
        force_bias[0] + f[0],
        force_bias[1] + f[1],
        force_bias[2] + f[2],
        torque_bias[0] + t[0],
        torque_bias[1] + t[1],
        torque_bias[2] + t[2],
    ]
}
