//! Glove-to-hand finger mapping with haptic brakes: the index finger closes
//! onto an object, its motor current rises and the glove brake engages.
//!
//! cargo run --example hand_mapping

use telemanip::hand_ctrl::{finger_currents, haptic_brakes, map_fingers, FingerMapping, HandPlant, HapticThresholds, FINGERS, GLOVE_JOINTS};

fn main() {
    let mapping = FingerMapping::svh9();
    let thresholds = HapticThresholds::default();
    let mut hand = HandPlant::new(mapping.hand_dof);
    // An object stops the index proximal joint (hand joint 3) at 0.4 rad.
    hand.obstacle[3] = Some(0.4);
    let mut brakes = [false; FINGERS];
    let dt = 0.01;
    println!("{:>5} {:>7} {:>7} {:>8}  brakes", "t", "glove", "index", "current");
    for k in 0..=150 {
        let t = k as f64 * dt;
        let close = (t / 1.0).min(1.0) * 1.5;
        let mut glove = [0.0; GLOVE_JOINTS];
        for (i, g) in glove.iter_mut().enumerate() {
            *g = if i % 4 == 0 { 0.2 } else { close };
        }
        let cmd = map_fingers(&glove, &mapping);
        let currents = hand.step(&cmd, dt);
        let per_finger = finger_currents(&currents, &mapping);
        brakes = haptic_brakes(&per_finger, &thresholds, &brakes);
        if k % 10 == 0 {
            let b: String = brakes.iter().map(|&on| if on { '#' } else { '.' }).collect();
            println!("{t:>5.2} {close:>7.2} {:>7.3} {:>8.3}  {b}", hand.position[3], per_finger[1]);
        }
    }
}
