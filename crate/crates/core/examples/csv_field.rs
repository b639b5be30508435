//! Plans through a current given as sampled lattice data instead of the
//! analytic gyre: a uniform eastward jet across the middle of the domain.
//!
//! A jet this mild barely bends the best path, so the straight-line planner
//! comes out about an hour ahead: the grid planners only steer along eight
//! compass headings.

use diffplan::flowfield::{load_grid_field, NoiseParams, Point2};
use diffplan::mdp::{build_model, classic_policy_iteration, MdpParams, StateSpace};
use diffplan::policy_iter::{approximate_policy_iteration, ApiConfig};
use diffplan::simulator::{run_trials, Planner, Scenario, SimParams, TrialStats};

fn main() -> diffplan::Result<()> {
    let mut text = String::from("x_km,y_km,vx_kmh,vy_kmh\n");
    for j in 0..=20 {
        for i in 0..=20 {
            let y = 2.0 * j as f64;
            let vx = if (15.0..=25.0).contains(&y) { 2.5 } else { 0.0 };
            text.push_str(&format!("{},{y},{vx},0\n", 2 * i));
        }
    }
    let field = load_grid_field(text.as_bytes(), NoiseParams::isotropic(0.5)?)?;
    println!("lattice covers {:?}", field.domain());

    let states = StateSpace::new(Point2::new(1.0, 1.0), 2.0, 20, 20, &[], (1, 19))?;
    let model = build_model(&field, &states, MdpParams::default())?;
    let exact = classic_policy_iteration(&model)?;
    let r = approximate_policy_iteration(&model, &ApiConfig::default())?;
    println!("approximate PI: {} iterations, converged {}", r.iterations, r.converged);

    let scen = Scenario { field: &field, start: Point2::new(35.0, 3.0), goal: states.center(states.goal()), obstacles: None };
    let params = SimParams::default();
    for (name, p) in [
        ("classic-pi", Planner::DiscretePolicy { policy: &exact.policy, states: &states }),
        ("api-k1", Planner::ContinuousPolicy { model: &model, result: &r }),
        ("goal-oriented", Planner::GoalOriented { goal: scen.goal }),
    ] {
        let s = TrialStats::from_trajectories(&run_trials(&scen, &p, &params, 10, 1)?);
        println!("{name:<14} reached {}/10, {:.2} h, {:.2} km", s.reached, s.mean_time_h, s.mean_len_km);
    }
    Ok(())
}
