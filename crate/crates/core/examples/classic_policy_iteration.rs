//! Exact policy iteration on the 20x20 gyre grid, printed as arrows.
//!
//! cargo run --release --example classic_policy_iteration -- 0.5 1.0

use diffplan::flowfield::{FlowField, NoiseParams, Rect};
use diffplan::mdp::{build_model, classic_policy_iteration, value_iteration, MdpParams, StateSpace};

const ARROWS: [char; 8] = ['↑', '↗', '→', '↘', '↓', '↙', '←', '↖'];

fn main() -> diffplan::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("number")).collect();
    let a = args.first().copied().unwrap_or(0.5);
    let sigma = args.get(1).copied().unwrap_or(1.0);

    let field = FlowField::default_gyre(a, NoiseParams::isotropic(sigma)?)?;
    let states = StateSpace::tiling(Rect::default_ocean(), 20, 20, (19, 19))?.with_obstacles(&[(8, 9), (9, 9), (10, 9)])?;
    let model = build_model(&field, &states, MdpParams::default())?;
    let pi = classic_policy_iteration(&model)?;
    println!("A={a} sigma={sigma}: {} iterations", pi.iterations);

    for j in (0..states.ny()).rev() {
        let row: String = (0..states.nx())
            .map(|i| {
                let s = states.index(i, j);
                if s == states.goal() {
                    'G'
                } else if states.is_obstacle(s) {
                    '#'
                } else {
                    ARROWS[pi.policy.action(s)]
                }
            })
            .collect();
        println!("{row}");
    }

    let vi = value_iteration(&model, 1e-12, 100_000)?;
    println!("max |v_PI - v_VI| = {:.2e}", pi.values.max_abs_diff(&vi));
    println!("v(start) = {:.4}", pi.values.0[states.index(1, 1)]);
    Ok(())
}
