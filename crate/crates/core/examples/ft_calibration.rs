//! Wrist force/torque sensor calibration from static poses, then gravity
//! compensation of a reading with an external push.
//!
//! cargo run --example ft_calibration

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use telemanip::ftcal::{calibrate, compensate, gravity_in_sensor, CalibrationSample, FtCalibration, MIN_SAMPLES, READINGS_PER_SAMPLE};
use telemanip::kinematics::{Pose, Wrench};

fn main() {
    // The sensor we pretend to have: biased, carrying a 0.9 kg hand.
    let mut truth = FtCalibration::identity();
    truth.force_bias = Vector3::new(1.2, -0.4, 3.1);
    truth.torque_bias = Vector3::new(0.05, 0.02, -0.08);
    truth.mass = 0.9;
    truth.com = Vector3::new(0.012, -0.006, 0.048);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let samples: Vec<CalibrationSample> = (0..MIN_SAMPLES)
        .map(|_| {
            let r = UnitQuaternion::from_euler_angles(rng.gen_range(-3.1..3.1), rng.gen_range(-1.5..1.5), rng.gen_range(-3.1..3.1));
            let clean = truth.forward_model(&Wrench::zero(), &r);
            let readings: Vec<Wrench> = (0..READINGS_PER_SAMPLE)
                .map(|_| Wrench::new(clean.force.map(|f| f + noise.sample(&mut rng)), clean.torque.map(|t| t + 0.1 * noise.sample(&mut rng))))
                .collect();
            CalibrationSample::from_readings(gravity_in_sensor(&r), &readings)
        })
        .collect();

    let cal = calibrate(&samples).expect("calibration");
    println!("mass {:.4} kg (true {:.4})", cal.mass, truth.mass);
    println!("com  {:.4?} m", cal.com.as_slice());
    println!("force bias  {:.4?} N", cal.force_bias.as_slice());
    println!("torque bias {:.5?} N·m", cal.torque_bias.as_slice());
    println!("residual rms {:.4} N, {:.5} N·m", cal.force_residual_rms, cal.torque_residual_rms);
    println!("{}", serde_json::to_string_pretty(&cal.to_file()).unwrap());

    // A 5 N push along sensor x with the wrist tilted 30 degrees.
    let r = UnitQuaternion::from_euler_angles(0.5, 0.0, 0.0);
    let raw = truth.forward_model(&Wrench::from_force(Vector3::new(5.0, 0.0, 0.0)), &r);
    let hand_from_sensor = Pose::translation(0.0, 0.0, 0.1);
    let w = compensate(&raw, &r, &cal, &hand_from_sensor);
    println!("raw force {:.3?} -> compensated in hand frame {:.3?}", raw.force.as_slice(), w.force.as_slice());
}
