//! Reachability of the operator arm over sampled seated-reach hand poses,
//! for the default mount and a few perturbed candidates.
//!
//! cargo run --release --example workspace_analysis -- 500

use telemanip::harness::{analyze_workspace, perturbed_mounts, ReachModel};
use telemanip::kinematics::{IkParams, Pose};
use telemanip::sim::scenario::operator_chain;

fn main() {
    let count: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(400);
    let chain = operator_chain();
    let poses = ReachModel::default().sample(count, 1);
    let mounts = perturbed_mounts(&chain.mount, 6, 1, 0.2, 45f64.to_radians(), 15f64.to_radians());
    let base = chain.with_mount(Pose::identity());
    let report = analyze_workspace(&base, &mounts, &poses, &IkParams::global()).expect("analysis");
    print!("{}", report.table());
    let best = &report.mounts[report.best];
    println!(
        "best mount at {:.3?} reaches {}/{} = {:.1}%",
        best.mount.translation, best.reached, report.poses, best.percent
    );
}
