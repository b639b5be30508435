//! Approximate policy iteration on the full grid (k=1) and the checkerboard
//! subset (k=2), scored against the exact value table.
//!
//! cargo run --release --example approximate_pi

use std::time::Instant;

use diffplan::commands::sample_at_centers;
use diffplan::flowfield::{FlowField, NoiseParams, Rect};
use diffplan::mdp::{build_model, classic_policy_iteration, MdpParams, StateSpace};
use diffplan::policy_iter::{approximate_policy_iteration, ApiConfig};

fn main() -> diffplan::Result<()> {
    let field = FlowField::default_gyre(0.5, NoiseParams::isotropic(1.0)?)?;
    let states = StateSpace::tiling(Rect::default_ocean(), 20, 20, (19, 19))?;
    let model = build_model(&field, &states, MdpParams::default())?;
    let exact = classic_policy_iteration(&model)?;
    let max = exact.values.max_abs();

    for k in [1, 2] {
        let t0 = Instant::now();
        let r = approximate_policy_iteration(&model, &ApiConfig { k, ..ApiConfig::default() })?;
        let took = t0.elapsed();
        println!("k={k}: {} iterations, converged {}, {:.0} ms", r.iterations, r.converged, took.as_secs_f64() * 1e3);
        for d in &r.diagnostics {
            println!(
                "  it {:2}  changes {:3}  v in [{:.3}, {:.3}]  Peclet {:.2}",
                d.iteration, d.policy_changes, d.value_min, d.value_max, d.max_peclet
            );
        }
        let v = sample_at_centers(&r.value, &states);
        let rmse = (v.0.iter().zip(&exact.values.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let same = (0..states.len()).filter(|&s| r.policy.action(s) == exact.policy.action(s)).count();
        println!("  rmse {rmse:.4} ({:.1}% of max |v|), same action in {same}/{} cells", 100.0 * rmse / max, states.len());
    }
    Ok(())
}
