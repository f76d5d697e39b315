mod common;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, Unit, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use telemanip::kinematics::{
    damped_pinv, nullspace_projector, pose_from_parts, random_configuration, solve_ik, IkError, IkParams, Joint, JointVector,
    KinematicChain, Matrix6x7, Pose, DOF,
};
use telemanip::sim::scenario::operator_chain;

use common::{fd_body_jacobian, fk_oracle};

/// Seven z-axis joints stacked at the origin with a 1 m tool along x.
fn planar_chain() -> KinematicChain {
    let joints = (0..DOF).map(|_| Joint { axis: Unit::new_normalize(Vector3::z()), origin: Pose::identity() }).collect();
    KinematicChain::new("planar", joints, [[-PI, PI]; DOF], [2.0; DOF], Pose::identity(), pose_from_parts([1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]))
        .unwrap()
}

#[test]
fn fk_matches_matrix_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for chain in [KinematicChain::panda(), operator_chain()] {
        for _ in 0..1000 {
            let q = random_configuration(&chain, &mut rng, 0.0);
            let p = chain.forward_kinematics(&q);
            let t = fk_oracle(&chain, &q);
            let r = p.rotation.to_rotation_matrix();
            for i in 0..3 {
                assert!((p.translation.vector[i] - t[i][3]).abs() < 1e-12);
                for j in 0..3 {
                    assert!((r[(i, j)] - t[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn zero_configuration_composes_fixed_transforms() {
    let chain = KinematicChain::panda();
    let q = JointVector::zeros();
    let mut t = chain.mount;
    for j in &chain.joints {
        t *= j.origin;
    }
    t *= chain.tool;
    let p = chain.forward_kinematics(&q);
    assert!((p.translation.vector - t.translation.vector).norm() < 1e-15);
    assert!(p.rotation.angle_to(&t.rotation) < 1e-12);
}

#[test]
fn quarter_turn_on_planar_chain() {
    let chain = planar_chain();
    let mut q = JointVector::zeros();
    q[0] = PI / 2.0;
    let p = chain.forward_kinematics(&q).translation.vector;
    assert!((p - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    // Lever arm 1: tangential unit velocity plus unit yaw rate.
    let j = chain.body_jacobian(&q);
    let col = j.column(0);
    assert!((col[1] - 1.0).abs() < 1e-12 && col[0].abs() < 1e-12 && col[2].abs() < 1e-12);
    assert!((col[5] - 1.0).abs() < 1e-12);
}

#[test]
fn joint_through_hand_origin_has_no_linear_column() {
    let chain = KinematicChain::panda().with_tool(Pose::identity());
    let q = chain.mid_configuration();
    let j = chain.body_jacobian(&q);
    let c = j.column(DOF - 1);
    assert!(c.fixed_rows::<3>(0).norm() < 1e-12);
    assert!((c.fixed_rows::<3>(3).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn body_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for chain in [KinematicChain::panda(), operator_chain()] {
        for _ in 0..1000 {
            let q = random_configuration(&chain, &mut rng, 0.0);
            let j = chain.body_jacobian(&q);
            let fd = fd_body_jacobian(&chain, &q, 1e-6);
            let fdm = Matrix6x7::from_fn(|r, c| fd[r][c]);
            worst = worst.max((j - fdm).norm() / j.norm());
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn ik_round_trip_success_rate() {
    let chain = KinematicChain::panda();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params = IkParams::global();
    let seed = chain.mid_configuration();
    let started = Instant::now();
    let mut solved = 0;
    for _ in 0..1000 {
        let target = chain.forward_kinematics(&random_configuration(&chain, &mut rng, 0.0));
        if let Ok(sol) = solve_ik(&chain, &target, &seed, &params) {
            let p = chain.forward_kinematics(&sol.q);
            assert!((p.translation.vector - target.translation.vector).norm() <= params.tol_translation * 1.0001);
            assert!(chain.within_limits(&sol.q));
            solved += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(solved >= 990, "{solved}/1000 solved");
    assert!(elapsed < 1.0, "took {elapsed:.2} s");
}

#[test]
fn target_beyond_reach_is_not_reached() {
    let chain = KinematicChain::panda();
    let shoulder = chain.link_frames(&JointVector::zeros())[1].translation.vector;
    let target = pose_from_parts((shoulder + Vector3::new(1.0, 0.0, 0.0)).into(), [1.0, 0.0, 0.0, 0.0]);
    match solve_ik(&chain, &target, &chain.mid_configuration(), &IkParams::global()) {
        Err(IkError::NotReached { residual_translation, .. }) => assert!(residual_translation > 0.1),
        Ok(_) => panic!("reached a target 1 m from the shoulder"),
    }
}

fn random_jacobian(seed: u64) -> Matrix6x7 {
    let chain = KinematicChain::panda();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chain.body_jacobian(&random_configuration(&chain, &mut rng, 0.2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ik_result_respects_limits(seed in 0u64..10_000) {
        let chain = KinematicChain::panda();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = chain.forward_kinematics(&random_configuration(&chain, &mut rng, 0.0));
        let init = random_configuration(&chain, &mut rng, 0.0);
        let q = match solve_ik(&chain, &target, &init, &IkParams::default()) {
            Ok(s) => {
                let p = chain.forward_kinematics(&s.q);
                prop_assert!((p.translation.vector - target.translation.vector).norm() <= 1e-4 * 1.0001);
                s.q
            }
            Err(IkError::NotReached { q, .. }) => q,
        };
        for i in 0..DOF {
            prop_assert!(q[i] >= chain.lower(i) && q[i] <= chain.upper(i));
        }
    }

    #[test]
    fn pinv_is_continuous_in_lambda(seed in 0u64..10_000, lambda in 0.001f64..0.2) {
        // Each singular gain s/(s^2+l^2) moves at most 0.65/l^2 per unit l.
        let m = DMatrix::from_column_slice(6, 7, random_jacobian(seed).as_slice());
        let h = 1e-7;
        let a = damped_pinv(&m, lambda).unwrap();
        let b = damped_pinv(&m, lambda + h).unwrap();
        prop_assert!((a - b).norm() <= 6f64.sqrt() * 0.65 / (lambda * lambda) * h * 1.01);
    }

    #[test]
    fn undamped_pinv_is_moore_penrose(seed in 0u64..10_000) {
        let m = DMatrix::from_column_slice(6, 7, random_jacobian(seed).as_slice());
        let p = damped_pinv(&m, 0.0).unwrap();
        prop_assert!((&m * &p * &m - &m).norm() < 1e-9);
        prop_assert!((&p * &m * &p - &p).norm() < 1e-9);
    }

    #[test]
    fn projector_annihilates(seed in 0u64..10_000, v in proptest::array::uniform7(-10.0f64..10.0)) {
        let j = random_jacobian(seed);
        let n = nullspace_projector(&j, 0.0);
        let v = JointVector::from_row_slice(&v);
        prop_assert!((j * n * v).norm() <= 1e-6 * j.norm() * v.norm().max(1.0));
        prop_assert!((n * n - n).norm() < 1e-9);
    }
}
