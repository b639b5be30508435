//! The batch commands behind the `diffplan` binary. Each takes a validated
//! config and an output directory, writes CSV and JSON-lines artifacts and
//! returns a summary. Output is a pure function of the config (including
//! its seed).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, FieldSource, PlannerKind};
use crate::error::{Error, Result};
use crate::fem::{build_mesh, ContinuousValue};
use crate::mdp::{
    build_model, classic_policy_iteration, write_policy, write_value_table, Compass, MdpModel,
    StateSpace, ValueTable,
};
use crate::policy_iter::{
    approximate_policy_iteration, value_mse, write_diagnostics, ApiConfig, ApiResult,
    ImprovementSet,
};
use crate::simulator::{
    run_trials, write_stats, write_trajectories, NoiseMode, Planner, Scenario, StatsRow,
    Trajectory, TrialStats,
};
use crate::taylor_pde::{assemble_coefficients, write_coefficients};

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json_lines<T: Serialize>(out: &Path, name: &str, records: &[T]) -> Result<()> {
    let mut w = create(out, name)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Continuous value sampled at every state center.
pub fn sample_at_centers(v: &ContinuousValue, states: &StateSpace) -> ValueTable {
    ValueTable((0..states.len()).map(|s| v.evaluate_extended(states.center(s))).collect())
}

fn rmse(a: &ValueTable, b: &ValueTable) -> f64 {
    let n = a.len().max(1) as f64;
    (a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub classic_iterations: usize,
    pub api_iterations: usize,
    pub api_converged: bool,
    pub unknowns: usize,
    /// Largest `|v|` of the classic table.
    pub max_abs_value: f64,
    /// RMSE of the continuous value at the state centers against the table.
    pub rmse: f64,
    /// States where the two policies pick the same action.
    pub policy_agreement: usize,
}

/// Classic PI and approximate PI on the configured grid.
///
/// Writes `policy_classic.csv`, `policy_api.csv`, `values_classic.csv`,
/// `values_api.csv`, `value_raster.csv`, `mesh_nodes.csv`,
/// `mesh_triangles.csv`, `coefficients.csv`, `diagnostics.jsonl` and, when
/// `api.points` is set, `point_actions.csv`.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<SolveSummary> {
    std::fs::create_dir_all(out)?;
    let field = cfg.flow_field()?;
    let states = cfg.state_space()?;
    let model = build_model(&field, &states, cfg.mdp_params())?;
    let classic = classic_policy_iteration(&model)?;
    let api = approximate_policy_iteration(&model, &cfg.api_config(cfg.api.k))?;
    let mesh = api.value.mesh().clone();
    let sampled = sample_at_centers(&api.value, &states);

    write_policy(create(out, "policy_classic.csv")?, &classic.policy)?;
    write_policy(create(out, "policy_api.csv")?, &api.policy)?;
    write_value_table(create(out, "values_classic.csv")?, &states, &classic.values)?;
    write_value_table(create(out, "values_api.csv")?, &states, &sampled)?;
    let (lo, hi) = states.center_bounds();
    let r = cfg.output.raster_resolution;
    api.value
        .write_raster(create(out, "value_raster.csv")?, lo, hi, r, r)?;
    mesh.write_nodes(create(out, "mesh_nodes.csv")?)?;
    mesh.write_triangles(create(out, "mesh_triangles.csv")?)?;
    let coeffs = assemble_coefficients(&model, &api.moments, &api.policy, mesh.node_to_state())?
        .with_form(cfg.api.diffusion_form);
    write_coefficients(create(out, "coefficients.csv")?, &coeffs, mesh.nodes())?;
    let mut diag = create(out, "diagnostics.jsonl")?;
    write_diagnostics(&mut diag, &api.diagnostics)?;
    diag.flush()?;

    if !cfg.api.points.is_empty() {
        let mut w = csv::Writer::from_writer(create(out, "point_actions.csv")?);
        w.write_record(["x_km", "y_km", "action"])?;
        for (p, &a) in cfg.api.points.iter().zip(&api.point_actions) {
            w.write_record([
                p[0].to_string(),
                p[1].to_string(),
                format!("{:?}", Compass::ALL[a]),
            ])?;
        }
        w.flush()?;
    }

    Ok(SolveSummary {
        classic_iterations: classic.iterations,
        api_iterations: api.iterations,
        api_converged: api.converged,
        unknowns: mesh.node_count(),
        max_abs_value: classic.values.max_abs(),
        rmse: rmse(&sampled, &classic.values),
        policy_agreement: states.len() - api.policy.changes_from(&classic.policy),
    })
}

struct SweepPoint {
    rows: Vec<StatsRow>,
    runs: Vec<(String, Vec<Trajectory>)>,
    diagnostics: Vec<serde_json::Value>,
}

fn solve_api(model: &MdpModel, cfg: &ExperimentConfig, k: usize) -> Result<ApiResult> {
    approximate_policy_iteration(
        model,
        &ApiConfig {
            improvement_set: ImprovementSet::GridStates,
            ..cfg.api_config(k)
        },
    )
}

fn simulate_strength(cfg: &ExperimentConfig, a: f64) -> Result<SweepPoint> {
    let field = cfg.flow_field_with_strength(a)?;
    let states = cfg.state_space()?;
    let model = build_model(&field, &states, cfg.mdp_params())?;
    let wants = |p: PlannerKind| cfg.sim.planners.contains(&p);

    let classic = if wants(PlannerKind::ClassicPi) {
        Some(classic_policy_iteration(&model)?)
    } else {
        None
    };
    let api1 = if wants(PlannerKind::ApiK1) {
        Some(solve_api(&model, cfg, 1)?)
    } else {
        None
    };
    let api2 = if wants(PlannerKind::ApiK2) {
        Some(solve_api(&model, cfg, 2)?)
    } else {
        None
    };

    let mut params = cfg.sim_params();
    let calm = cfg.field.kind == FieldSource::Gyre && a == 0.0;
    if calm && cfg.sim.noise_free_when_calm {
        params.noise_mode = NoiseMode::None;
    }
    let sigma = if params.noise_mode == NoiseMode::None {
        0.0
    } else {
        cfg.field.noise_kmh[0]
    };
    let scenario = Scenario {
        field: &field,
        start: cfg.start(),
        goal: states.center(states.goal()),
        obstacles: Some(&states),
    };

    let mut point = SweepPoint {
        rows: Vec::new(),
        runs: Vec::new(),
        diagnostics: Vec::new(),
    };
    for &kind in &cfg.sim.planners {
        let planner = match kind {
            PlannerKind::ClassicPi => {
                let c = classic.as_ref().expect("solved above");
                point.diagnostics.push(json!({
                    "A": a, "planner": kind.label(), "iterations": c.iterations,
                    "converged": true, "changes": c.changes,
                }));
                Planner::DiscretePolicy {
                    policy: &c.policy,
                    states: &states,
                }
            }
            PlannerKind::ApiK1 | PlannerKind::ApiK2 => {
                let r = if kind == PlannerKind::ApiK1 { &api1 } else { &api2 };
                let r = r.as_ref().expect("solved above");
                point.diagnostics.push(json!({
                    "A": a, "planner": kind.label(), "iterations": r.iterations,
                    "converged": r.converged, "changes": r.changes,
                }));
                Planner::ContinuousPolicy {
                    model: &model,
                    result: r,
                }
            }
            PlannerKind::GoalOriented => Planner::GoalOriented {
                goal: scenario.goal,
            },
        };
        // same master seed for every planner: trial i sees the same noise stream
        let runs = run_trials(&scenario, &planner, &params, cfg.sim.trials, cfg.seed)?;
        point.rows.push(StatsRow {
            planner: kind.label().to_string(),
            strength: a,
            sigma,
            stats: TrialStats::from_trajectories(&runs),
        });
        point
            .runs
            .push((format!("trajectories_{}_A{a}.csv", kind.label()), runs));
    }
    Ok(point)
}

/// Runs every configured planner at every strength of the sweep.
///
/// Writes `stats.csv`, one `trajectories_<planner>_A<strength>.csv` per
/// sweep point and `diagnostics.jsonl` with the solver iteration counts.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<StatsRow>> {
    std::fs::create_dir_all(out)?;
    let points = cfg
        .strengths()
        .par_iter()
        .map(|&a| simulate_strength(cfg, a))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for p in points {
        for (name, runs) in &p.runs {
            write_trajectories(create(out, name)?, runs)?;
        }
        rows.extend(p.rows);
        diagnostics.extend(p.diagnostics);
    }
    write_stats(create(out, "stats.csv")?, &rows)?;
    write_json_lines(out, "simulate_diagnostics.jsonl", &diagnostics)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub grid_n: usize,
    pub k: usize,
    pub mse: f64,
    pub max_abs_value: f64,
}

/// `n x n` tiling of the configured domain. Goal and obstacles carry over
/// from the configured grid by position.
pub fn resampled_states(cfg: &ExperimentConfig, n: usize) -> Result<StateSpace> {
    let base = cfg.state_space()?;
    let probe = StateSpace::tiling(cfg.domain_rect()?, n, n, (0, 0))?;
    let goal = probe.coords(probe.nearest_state(base.center(base.goal())));
    let half = base.cell_km() / 2.0;
    let (lo, hi) = base.center_bounds();
    let obstacles: Vec<_> = (0..probe.len())
        .filter(|&s| {
            let p = probe.center(s);
            let inside = p.x >= lo.x - half
                && p.x <= hi.x + half
                && p.y >= lo.y - half
                && p.y <= hi.y + half;
            inside && base.is_obstacle(base.nearest_state(p))
        })
        .map(|s| probe.coords(s))
        .filter(|&c| c != goal)
        .collect();
    StateSpace::tiling(cfg.domain_rect()?, n, n, goal)?.with_obstacles(&obstacles)
}

/// Value MSE between approximate PI and classic PI over a sweep of grid
/// sizes and mesh factors. Writes `mse.csv` and `diagnostics.jsonl`.
pub fn cmd_mse(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MseRow>> {
    std::fs::create_dir_all(out)?;
    let field = cfg.flow_field()?;
    let jobs: Vec<(usize, usize)> = cfg
        .mse
        .grid_sizes
        .iter()
        .flat_map(|&n| cfg.mse.ks.iter().map(move |&k| (n, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(n, k)| {
            let states = resampled_states(cfg, n)?;
            let model = build_model(&field, &states, cfg.mdp_params())?;
            let classic = classic_policy_iteration(&model)?;
            let (value, diag) = if cfg.mse.oracle_coefficients {
                let mesh = std::sync::Arc::new(build_mesh(&states, k)?);
                let coeffs = mesh.node_to_state().iter().map(|&s| classic.values.0[s]).collect();
                (ContinuousValue::new(mesh, coeffs)?, json!({ "grid_n": n, "k": k, "oracle": true }))
            } else {
                let api = solve_api(&model, cfg, k)?;
                let d = json!({
                    "grid_n": n, "k": k, "iterations": api.iterations,
                    "converged": api.converged, "unknowns": api.value.mesh().node_count(),
                });
                (api.value, d)
            };
            let row = MseRow {
                grid_n: n,
                k,
                mse: value_mse(&value, &classic.values, &states),
                max_abs_value: classic.values.max_abs(),
            };
            Ok((row, diag))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(create(out, "mse.csv")?);
    w.write_record(["grid_n", "k", "mse", "max_abs_value"])?;
    for (r, _) in &results {
        w.write_record([
            r.grid_n.to_string(),
            r.k.to_string(),
            r.mse.to_string(),
            r.max_abs_value.to_string(),
        ])?;
    }
    w.flush()?;
    let diagnostics: Vec<_> = results.iter().map(|(_, d)| d.clone()).collect();
    write_json_lines(out, "mse_diagnostics.jsonl", &diagnostics)?;
    Ok(results.into_iter().map(|(r, _)| r).collect())
}
