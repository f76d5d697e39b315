//! The feedback oscillation observer: a burst of force ringing near the
//! observed frequency pulls the feedback gain down at its maximum rate, and
//! the gain recovers once the ringing stops. Slow motion is ignored.
//!
//! cargo run --example oscillation_observer

use std::f64::consts::PI;

use nalgebra::Vector3;
use telemanip::signal::{ObserverConfig, ObserverState};

fn main() {
    let cfg = ObserverConfig::default();
    let dt = 0.001;
    let ring = cfg.bin_frequency(1.0 / dt);
    println!("window {} samples, bin {} = {ring:.2} Hz, thresholds {}..{}", cfg.dft_size, cfg.dft_bin, cfg.v_min, cfg.v_max);

    let mut o = ObserverState::new(cfg).unwrap();
    println!("{:>6} {:>9} {:>8} {:>6}", "t", "force_z", "v_raw", "beta");
    for k in 0..6000 {
        let t = k as f64 * dt;
        // Slow 1 Hz hand motion throughout, an 8 N ring from 1 s to 2.5 s.
        let slow = 10.0 * (2.0 * PI * t).sin();
        let fast = if (1.0..2.5).contains(&t) { 8.0 * (2.0 * PI * ring * t).sin() } else { 0.0 };
        let f = Vector3::new(0.3 * slow, 0.0, slow + fast);
        let beta = o.step(&f, dt);
        if k % 250 == 0 {
            println!("{t:>6.2} {:>9.2} {:>8.1} {beta:>6.3}", f.z, o.v_raw());
        }
    }
}
