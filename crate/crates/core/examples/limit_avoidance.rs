//! Operator joint-limit avoidance: the command scale and the barrier torque
//! as one joint approaches its upper limit, at rest and while moving.
//!
//! cargo run --example limit_avoidance

use telemanip::kinematics::{JointVector, KinematicChain};
use telemanip::op_ctrl::{alpha_vector, limit_avoidance_torque, OperatorGains};

fn main() {
    let chain = KinematicChain::panda();
    let g = OperatorGains::default();
    println!("activation at {:.1} deg, command scale zero at {:.1} deg", g.t_p.to_degrees(), (g.t_p / 2.0).to_degrees());
    println!("{:>9} {:>7} {:>10} {:>12}", "margin", "alpha", "tau_lo", "tau_lo@1rad/s");
    let mut q = chain.mid_configuration();
    for step in 0..=12 {
        let margin = g.t_p * (1.2 - 0.1 * step as f64);
        q[3] = chain.upper(3) - margin.max(1e-4);
        let rest = JointVector::zeros();
        let mut moving = JointVector::zeros();
        moving[3] = 1.0;
        let a = alpha_vector(&q, &rest, &chain, &g)[3];
        let t0 = limit_avoidance_torque(&q, &rest, &chain, &g)[3];
        let t1 = limit_avoidance_torque(&q, &moving, &chain, &g)[3];
        println!("{:>7.2}° {a:>7.3} {t0:>10.3} {t1:>12.3}", margin.to_degrees());
    }
}
