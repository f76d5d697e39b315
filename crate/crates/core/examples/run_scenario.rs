//! Runs a scenario file through the full bilateral loop and prints the
//! summary recomputed from its logs.
//!
//! cargo run --release --example run_scenario -- scenarios/vase.json out/vase

use std::path::PathBuf;

use telemanip::harness::Summary;
use telemanip::sim::{run_scenario, RunOptions, Scenario};

fn main() {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("scenarios/tracking.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/example_run"));
    let sc = match Scenario::load(&scenario) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    println!("{}: {:.1} s at {} Hz", sc.name, sc.duration_s, 1.0 / sc.dt_s);
    let report = run_scenario(&sc, &out, &RunOptions::default()).expect("run");
    println!("{} ticks in {:.2} s wall time, logs in {}", report.ticks, report.wall_time.as_secs_f64(), out.display());
    let summary = Summary::from_dir(&out).expect("summary");
    summary.write(&out).expect("write summary");
    if let Some(t) = &summary.tracking {
        println!("tracking: {:.2} mm mean, best shift {:.0} ms -> {:.2} mm", t.unshifted_mm.mean, t.best_shift_ms, t.shifted_mm.mean);
    }
    println!("feedback gain: min {:.3}, peak oscillation amplitude {:.0}", summary.beta.min, summary.beta.peak_v_raw);
    println!("safety events {}, torque audit mismatches {}", summary.safety_events, summary.audit_failures);
    for (mode, secs) in &summary.seconds_in_mode {
        println!("  {mode:<12} {secs:.2} s");
    }
}
