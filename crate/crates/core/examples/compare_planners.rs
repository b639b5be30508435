//! Ten noisy crossings of a strong gyre for each planner.
//!
//! cargo run --release --example compare_planners -- 1.5 3.0

use diffplan::flowfield::{FlowField, NoiseParams, Point2, Rect};
use diffplan::mdp::{build_model, classic_policy_iteration, MdpParams, StateSpace};
use diffplan::policy_iter::{approximate_policy_iteration, ApiConfig};
use diffplan::simulator::{run_trials, Planner, Scenario, SimParams, TrialStats};

fn main() -> diffplan::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("number")).collect();
    let a = args.first().copied().unwrap_or(1.5);
    let sigma = args.get(1).copied().unwrap_or(3.0);

    let field = FlowField::default_gyre(a, NoiseParams::isotropic(sigma)?)?;
    let states = StateSpace::tiling(Rect::default_ocean(), 20, 20, (19, 19))?;
    let model = build_model(&field, &states, MdpParams::default())?;
    let exact = classic_policy_iteration(&model)?;
    let k1 = approximate_policy_iteration(&model, &ApiConfig { k: 1, ..ApiConfig::default() })?;
    let k2 = approximate_policy_iteration(&model, &ApiConfig { k: 2, ..ApiConfig::default() })?;

    let scen = Scenario { field: &field, start: Point2::new(3.0, 3.0), goal: states.center(states.goal()), obstacles: Some(&states) };
    let params = SimParams::default();
    println!("A={a} sigma={sigma}, budget {} h", params.budget_h);
    println!("{:<14} {:>8} {:>14} {:>14}", "planner", "reached", "time h", "length km");
    for (name, planner) in [
        ("classic-pi", Planner::DiscretePolicy { policy: &exact.policy, states: &states }),
        ("api-k1", Planner::ContinuousPolicy { model: &model, result: &k1 }),
        ("api-k2", Planner::ContinuousPolicy { model: &model, result: &k2 }),
        ("goal-oriented", Planner::GoalOriented { goal: scen.goal }),
    ] {
        // same seed for every planner, so they face the same disturbances
        let s = TrialStats::from_trajectories(&run_trials(&scen, &planner, &params, 10, 42)?);
        println!(
            "{name:<14} {:>5}/{:<2} {:>7.2} ± {:<5.2} {:>7.2} ± {:<5.2}",
            s.reached, s.trials, s.mean_time_h, s.std_time_h, s.mean_len_km, s.std_len_km
        );
    }
    Ok(())
}
