//! The operator-side model of the avatar arm: as the goal pushes one avatar
//! joint toward its limit, the model produces an operator torque resisting
//! the motion before the real (lagging) avatar gets there. Joints 0 and 2
//! are parallel at the mid configuration, so once the goal settles the IK
//! shares the remaining rotation with joint 2 and the prediction stops short.
//!
//! cargo run --example predictive_limits

use telemanip::kinematics::KinematicChain;
use telemanip::op_ctrl::{AvatarPredictor, OperatorGains};

fn main() {
    let avatar = KinematicChain::panda();
    let operator = KinematicChain::panda();
    let g = OperatorGains::default();
    let mut pred = AvatarPredictor::new(avatar.clone(), g.filter_cutoff_hz, 1000.0);
    let q_op = operator.mid_configuration();
    let j_o = operator.body_jacobian(&q_op);

    let mut q_goal = avatar.mid_configuration();
    q_goal[0] = avatar.upper(0) - 0.3;
    let mut last = q_goal;
    println!("{:>8} {:>8} {:>8} {:>10} {:>10}", "goal", "margin", "qd_pred", "tau_model", "|tau_la|");
    for k in 0..800 {
        // Sweep the first avatar joint toward its upper limit at 0.5 rad/s.
        q_goal[0] = (q_goal[0] + 0.0005).min(avatar.upper(0) - 0.01);
        let goal = avatar.forward_kinematics(&q_goal);
        let p = pred.update(&goal, &last, &j_o, &g);
        last = p.q;
        if k % 50 == 0 {
            println!(
                "{:>8.3} {:>8.3} {:>8.3} {:>10.3} {:>10.3}",
                avatar.upper(0) - q_goal[0],
                avatar.upper(0) - p.q[0],
                p.qdot[0],
                p.tau_model[0],
                p.tau_la.norm()
            );
        }
    }
}
