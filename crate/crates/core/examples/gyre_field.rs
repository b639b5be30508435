//! Samples the double gyre and its random disturbance.
//!
//! cargo run --example gyre_field -- 1.0

use diffplan::flowfield::{FlowField, NoiseParams, Point2};
use diffplan::simulator::trial_rng;

fn main() -> diffplan::Result<()> {
    let a: f64 = std::env::args().nth(1).map_or(1.0, |s| s.parse().expect("strength"));
    let field = FlowField::default_gyre(a, NoiseParams::isotropic(1.0)?)?;

    println!("{:>6} {:>6} {:>8} {:>8} {:>7}", "x_km", "y_km", "vx", "vy", "|v|");
    for j in (0..=40).step_by(10) {
        for i in (0..=40).step_by(10) {
            let p = Point2::new(i as f64, j as f64);
            let v = field.velocity(p)?;
            println!("{:6.1} {:6.1} {:8.3} {:8.3} {:7.3}", p.x, p.y, v.vx, v.vy, v.speed());
        }
    }

    // the mean of many draws should sit on the deterministic velocity
    let p = Point2::new(11.0, 27.0);
    let mut rng = trial_rng(7, 0);
    let n = 20_000;
    let (mut sx, mut sy) = (0.0, 0.0);
    for _ in 0..n {
        let d = field.sample_disturbance(p, &mut rng)?;
        sx += d.vx;
        sy += d.vy;
    }
    let v = field.velocity(p)?;
    println!("\nat (11, 27): field ({:.3}, {:.3}), mean of {n} draws ({:.3}, {:.3})", v.vx, v.vy, sx / n as f64, sy / n as f64);
    Ok(())
}
