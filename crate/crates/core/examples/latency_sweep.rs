//! Estimates the command-to-motion lag of the avatar arm from closed-loop
//! logs, with and without an injected channel delay.
//!
//! cargo run --release --example latency_sweep

use telemanip::harness::{shift_sweep, tracking_error, RunLogs};
use telemanip::sim::{run_scenario, ChannelConfig, RunOptions, Scenario};

fn best_shift_ms(sc: &Scenario, dir: &std::path::Path) -> (f64, f64, f64) {
    run_scenario(sc, dir, &RunOptions::default()).expect("run");
    let logs = RunLogs::read(dir).expect("logs");
    let mask = logs.track_mask().unwrap();
    let (cmd, av) = (logs.command_positions().unwrap(), logs.avatar_positions().unwrap());
    let sweep = shift_sweep(&cmd, &av, 250, Some(&mask)).unwrap();
    let unshifted = tracking_error(&cmd, &av, 0, Some(&mask)).unwrap();
    (sweep.argmin as f64 * logs.dt() * 1e3, unshifted.mean * 1e3, sweep.min_error * 1e3)
}

fn main() {
    let dir = std::env::temp_dir().join("telemanip_latency_sweep");
    let mut sc = Scenario::load("scenarios/tracking.json").expect("scenario");
    sc.duration_s = 16.0;
    let mut results = Vec::new();
    for delay in [0.0, 20.0, 44.0] {
        sc.channel.command = ChannelConfig::with_delay(delay);
        let (shift, raw, best) = best_shift_ms(&sc, &dir.join(format!("d{delay}")));
        println!("channel delay {delay:>4.0} ms: error minimum at {shift:>5.0} ms ({raw:.2} mm unshifted, {best:.2} mm shifted)");
        results.push(shift);
    }
    println!("execution lag {:.0} ms; recovered delays {:.0} ms and {:.0} ms", results[0], results[1] - results[0], results[2] - results[0]);
}
