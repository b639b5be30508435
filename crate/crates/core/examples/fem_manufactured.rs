//! Mesh refinement against a known solution of the steady PDE.
//!
//! v = cos(pi x) cos(pi y) - 1 on the unit square, pinned to 0 at the origin.

use std::f64::consts::PI;
use std::sync::Arc;

use diffplan::fem::{assemble, build_mesh, constrain_goal, solve, ContinuousValue};
use diffplan::flowfield::Point2;
use diffplan::mdp::StateSpace;
use diffplan::taylor_pde::{NodeCoefficients, PdeCoefficients};

fn main() -> diffplan::Result<()> {
    let gamma = 0.95;
    let mut last: Option<f64> = None;
    println!("{:>4} {:>7} {:>12} {:>6}", "n", "nodes", "L2 error", "rate");
    for n in [5, 9, 17, 33, 65] {
        let states = StateSpace::new(Point2::new(0.0, 0.0), 1.0 / (n - 1) as f64, n, n, &[], (0, 0))?;
        let mesh = Arc::new(build_mesh(&states, 1)?);
        let nodes = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let c = (PI * p.x).cos() * (PI * p.y).cos();
                NodeCoefficients {
                    state: mesh.node_to_state()[k],
                    mu: [0.0, 0.0],
                    sigma: [[1.0, 0.0], [0.0, 1.0]],
                    source: -(gamma * PI * PI * c + (1.0 - gamma) * (c - 1.0)),
                }
            })
            .collect();
        let coeffs = PdeCoefficients::from_nodes(nodes, gamma, mesh.goal_node())?;
        let (c, residual) = solve(&constrain_goal(&assemble(&mesh, &coeffs)?, mesh.goal_node()))?;
        let v = ContinuousValue::new(mesh.clone(), c)?;
        let err = v.l2_error(|p| (PI * p.x).cos() * (PI * p.y).cos() - 1.0);
        let rate = last.map_or(String::from("-"), |e| format!("{:.2}", (e / err).log2()));
        println!("{n:4} {:7} {err:12.4e} {rate:>6}   (residual {residual:.1e})", mesh.node_count());
        last = Some(err);
    }
    Ok(())
}
