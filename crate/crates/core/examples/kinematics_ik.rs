//! Forward kinematics, Jacobians and inverse kinematics on the default arm.
//!
//! cargo run --example kinematics_ik

use nalgebra::Vector3;
use telemanip::kinematics::{nullspace_projector, quat_wxyz, solve_ik, IkParams, JointVector, KinematicChain, Pose};

fn main() {
    let chain = KinematicChain::panda();
    let q = chain.mid_configuration();
    let hand = chain.forward_kinematics(&q);
    println!("mid configuration {:.3?}", q.as_slice());
    println!("hand at {:.4?}, wxyz {:.4?}", hand.translation.vector.as_slice(), quat_wxyz(&hand));

    let j = chain.body_jacobian(&q);
    let svd = j.svd(false, false);
    println!("body Jacobian singular values {:.3?}", svd.singular_values.as_slice());

    // Move the hand 10 cm forward and solve for it from the current posture.
    let target = Pose::from_parts((hand.translation.vector + Vector3::new(0.1, 0.0, 0.0)).into(), hand.rotation);
    match solve_ik(&chain, &target, &q, &IkParams::default()) {
        Ok(sol) => {
            println!("IK converged in {} iterations, residual {:.2e} m / {:.2e} rad", sol.iterations, sol.residual_translation, sol.residual_rotation);
            println!("solution {:.3?}", sol.q.as_slice());
        }
        Err(e) => println!("IK failed: {e}"),
    }

    // Posture motion that leaves the hand where it is.
    let n = nullspace_projector(&j, 0.0);
    let dq = n * JointVector::from_element(0.1);
    let moved = chain.forward_kinematics(&(q + dq * 1e-3));
    println!(
        "null-space step of {:.4} rad moves the hand {:.2e} m",
        dq.norm() * 1e-3,
        (moved.translation.vector - hand.translation.vector).norm()
    );
}
