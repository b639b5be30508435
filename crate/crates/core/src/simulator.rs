//! Trajectory simulation: a vehicle commanded by a planner drifts through a
//! noisy flow field under explicit Euler integration.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{sample_noise, FlowField, Point2};
use crate::mdp::{MdpModel, Policy, StateSpace};
use crate::policy_iter::{continuous_action, ApiResult};

/// How disturbance noise is drawn during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Fresh `N(0, σ²)` velocity noise every integration step.
    #[default]
    PerStep,
    /// Velocity noise with std `σ / √dt_sim`, so the displacement variance
    /// per hour does not depend on the step.
    Brownian,
    /// One draw per trial, held for the whole trajectory.
    PerTrial,
    /// Noise-free simulation (the planner's model may still include noise).
    None,
}

/// Heading (radians, counter-clockwise from east) and speed (km/h).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub psi: f64,
    pub speed: f64,
}

pub enum Planner<'a> {
    /// Looks up the action of the cell containing the vehicle.
    DiscretePolicy {
        policy: &'a Policy,
        states: &'a StateSpace,
    },
    /// Greedy action against the continuous value at the exact position.
    ContinuousPolicy {
        model: &'a MdpModel,
        result: &'a ApiResult,
    },
    /// Full speed straight at the goal.
    GoalOriented { goal: Point2 },
}

impl Planner<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Planner::DiscretePolicy { .. } => "discrete",
            Planner::ContinuousPolicy { .. } => "continuous",
            Planner::GoalOriented { .. } => "goal-oriented",
        }
    }

    fn is_discrete(&self) -> bool {
        matches!(self, Planner::DiscretePolicy { .. })
    }

    fn command(&self, p: Point2, goal: Point2, v_max: f64) -> Command {
        match self {
            Planner::DiscretePolicy { policy, states } => {
                let s = states.nearest_state(p);
                if s == states.goal() {
                    // the goal cell has no meaningful action; finish the approach
                    return goal_oriented_action(p, goal, v_max);
                }
                Command {
                    psi: crate::mdp::Compass::ALL[policy.action(s)].heading(),
                    speed: v_max,
                }
            }
            Planner::ContinuousPolicy { model, result } => {
                let states = model.states();
                if states.nearest_state(p) == states.goal() {
                    return goal_oriented_action(p, goal, v_max);
                }
                let a = continuous_action(model, &result.moments, &result.value, p);
                Command {
                    psi: crate::mdp::Compass::ALL[a].heading(),
                    speed: v_max,
                }
            }
            Planner::GoalOriented { goal } => goal_oriented_action(p, *goal, v_max),
        }
    }
}

/// Heading straight at `goal` at full speed; zero command once there.
pub fn goal_oriented_action(p: Point2, goal: Point2, v_max: f64) -> Command {
    if p == goal {
        return Command::default();
    }
    Command {
        psi: (goal.y - p.y).atan2(goal.x - p.x),
        speed: v_max,
    }
}

/// Euler step with a given noise draw; the result is clamped to the domain.
pub fn step_with_noise(
    field: &FlowField,
    p: Point2,
    cmd: Command,
    dt_sim: f64,
    noise: (f64, f64),
) -> Result<Point2> {
    let base = field.velocity(p)?;
    let vx = base.vx + noise.0 + cmd.speed * cmd.psi.cos();
    let vy = base.vy + noise.1 + cmd.speed * cmd.psi.sin();
    Ok(field
        .domain()
        .clamp(Point2::new(p.x + vx * dt_sim, p.y + vy * dt_sim)))
}

/// Euler step with a fresh disturbance draw.
pub fn step<R: Rng + ?Sized>(
    field: &FlowField,
    p: Point2,
    cmd: Command,
    dt_sim: f64,
    rng: &mut R,
) -> Result<Point2> {
    let noise = sample_noise(field.noise(), rng);
    step_with_noise(field, p, cmd, dt_sim, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt_sim_h: f64,
    pub budget_h: f64,
    pub goal_radius_km: f64,
    pub v_max_kmh: f64,
    /// Discrete planners re-query at least this often (the MDP action time).
    pub replan_h: f64,
    pub noise_mode: NoiseMode,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_sim_h: 0.1,
            budget_h: 30.0,
            goal_radius_km: 1.0,
            v_max_kmh: 3.0,
            replan_h: 1.0,
            noise_mode: NoiseMode::PerStep,
        }
    }
}

impl SimParams {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("sim.{name}"), format!("must be positive, got {v}")))
            }
        };
        positive("dt_h", self.dt_sim_h)?;
        positive("budget_h", self.budget_h)?;
        positive("goal_radius_km", self.goal_radius_km)?;
        positive("replan_h", self.replan_h)?;
        if !(self.v_max_kmh >= 0.0 && self.v_max_kmh.is_finite()) {
            return Err(Error::config("mdp.v_max_kmh", "must be non-negative"));
        }
        Ok(())
    }
}

/// Environment of one trial. `obstacles` supplies the cell mask used to end
/// a trial on collision.
#[derive(Clone, Copy)]
pub struct Scenario<'a> {
    pub field: &'a FlowField,
    pub start: Point2,
    pub goal: Point2,
    pub obstacles: Option<&'a StateSpace>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub p: Point2,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub reached: bool,
    pub time_cost: f64,
    pub length: f64,
}

impl Trajectory {
    pub fn end(&self) -> Point2 {
        self.samples.last().map(|s| s.p).unwrap_or_default()
    }
}

fn hits_obstacle(states: Option<&StateSpace>, p: Point2) -> bool {
    states.is_some_and(|s| s.is_obstacle(s.nearest_state(p)))
}

/// Runs one trial until the goal radius is entered, an obstacle cell is
/// entered, or the budget runs out. Failed trials cost the full budget.
pub fn simulate_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    planner: &Planner,
    params: &SimParams,
    rng: &mut R,
) -> Result<Trajectory> {
    params.validate()?;
    let field = scenario.field;
    let domain = field.domain();
    for (name, p) in [("start", scenario.start), ("goal", scenario.goal)] {
        if !domain.contains(p) {
            return Err(Error::Domain(format!(
                "{name} ({}, {}) lies outside the field domain",
                p.x, p.y
            )));
        }
    }

    let dt = params.dt_sim_h;
    let max_steps = (params.budget_h / dt - 1e-9).ceil() as usize;
    let replan_steps = ((params.replan_h / dt).round() as usize).max(1);
    let scale = match params.noise_mode {
        NoiseMode::Brownian => 1.0 / dt.sqrt(),
        _ => 1.0,
    };
    let trial_noise = sample_noise(field.noise(), rng);

    let mut p = scenario.start;
    let mut cmd = planner.command(p, scenario.goal, params.v_max_kmh);
    let plan_cell = |q: Point2| match planner {
        Planner::DiscretePolicy { states, .. } => Some(states.nearest_state(q)),
        _ => None,
    };
    let mut cell = plan_cell(p);
    let mut since_plan = 0;
    let mut samples = vec![Sample { t: 0.0, p, psi: cmd.psi }];
    let mut length = 0.0;
    let within = |q: Point2| q.distance(&scenario.goal) <= params.goal_radius_km;

    if within(p) {
        return Ok(Trajectory {
            samples,
            reached: true,
            time_cost: 0.0,
            length,
        });
    }
    for k in 1..=max_steps {
        let noise = match params.noise_mode {
            NoiseMode::PerTrial => trial_noise,
            NoiseMode::None => (0.0, 0.0),
            _ => {
                let (wx, wy) = sample_noise(field.noise(), rng);
                (wx * scale, wy * scale)
            }
        };
        let next = step_with_noise(field, p, cmd, dt, noise)?;
        length += p.distance(&next);
        p = next;
        let t = (k as f64 * dt).min(params.budget_h);
        since_plan += 1;

        if within(p) {
            samples.push(Sample { t, p, psi: cmd.psi });
            return Ok(Trajectory {
                samples,
                reached: true,
                time_cost: t,
                length,
            });
        }
        if hits_obstacle(scenario.obstacles, p) {
            samples.push(Sample { t, p, psi: cmd.psi });
            break;
        }

        let requery = if planner.is_discrete() {
            let now = plan_cell(p);
            let changed = now != cell;
            cell = now;
            changed || since_plan >= replan_steps
        } else {
            true
        };
        if requery {
            cmd = planner.command(p, scenario.goal, params.v_max_kmh);
            since_plan = 0;
        }
        samples.push(Sample { t, p, psi: cmd.psi });
    }
    Ok(Trajectory {
        samples,
        reached: false,
        time_cost: params.budget_h,
        length,
    })
}

/// Independent random stream for trial `index` of a run seeded by `master`.
pub fn trial_rng(master: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Runs `trials` independent trials in parallel.
pub fn run_trials(
    scenario: &Scenario,
    planner: &Planner,
    params: &SimParams,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(master_seed, i as u64);
            simulate_trial(scenario, planner, params, &mut rng)
        })
        .collect()
}

/// Mean and sample standard deviation over all trials (failures count at
/// the full budget).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: usize,
    pub mean_time_h: f64,
    pub std_time_h: f64,
    pub mean_len_km: f64,
    pub std_len_km: f64,
    pub reached: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let Some(first) = values.clone().next() else {
        return (f64::NAN, f64::NAN);
    };
    // shifted by the first sample: identical samples give exactly zero spread
    let nf = n as f64;
    let sum: f64 = values.clone().map(|v| v - first).sum();
    let mean = first + sum / nf;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: f64 = values.map(|v| (v - first) * (v - first)).sum();
    let var = ((sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, var.sqrt())
}

impl TrialStats {
    pub fn from_trajectories(runs: &[Trajectory]) -> Self {
        let (mean_time_h, std_time_h) = mean_std(runs.iter().map(|t| t.time_cost));
        let (mean_len_km, std_len_km) = mean_std(runs.iter().map(|t| t.length));
        Self {
            trials: runs.len(),
            mean_time_h,
            std_time_h,
            mean_len_km,
            std_len_km,
            reached: runs.iter().filter(|t| t.reached).count(),
        }
    }
}

/// One row of the stats table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub planner: String,
    pub strength: f64,
    pub sigma: f64,
    pub stats: TrialStats,
}

/// CSV `planner,A,sigma,mean_time_h,std_time_h,mean_len_km,std_len_km,reached`.
pub fn write_stats<W: Write>(out: W, rows: &[StatsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "planner",
        "A",
        "sigma",
        "mean_time_h",
        "std_time_h",
        "mean_len_km",
        "std_len_km",
        "reached",
    ])?;
    for r in rows {
        w.write_record([
            r.planner.clone(),
            r.strength.to_string(),
            r.sigma.to_string(),
            r.stats.mean_time_h.to_string(),
            r.stats.std_time_h.to_string(),
            r.stats.mean_len_km.to_string(),
            r.stats.std_len_km.to_string(),
            r.stats.reached.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `trial,t_h,x_km,y_km,psi_rad`.
pub fn write_trajectories<W: Write>(out: W, runs: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "t_h", "x_km", "y_km", "psi_rad"])?;
    for (i, run) in runs.iter().enumerate() {
        for s in &run.samples {
            w.write_record([
                i.to_string(),
                s.t.to_string(),
                s.p.x.to_string(),
                s.p.y.to_string(),
                s.psi.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::flowfield::{NoiseParams, Rect, Velocity2};

    fn still(noise: f64) -> FlowField {
        FlowField::uniform(
            Velocity2::default(),
            NoiseParams::isotropic(noise).unwrap(),
            Rect::default_ocean(),
        )
    }

    #[test]
    fn step_examples() {
        let mut rng = trial_rng(1, 0);
        let f = still(0.0);
        let p = step(&f, Point2::new(5.0, 5.0), Command { psi: 0.0, speed: 3.0 }, 0.1, &mut rng).unwrap();
        assert!((p.x - 5.3).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);

        let drift = FlowField::uniform(Velocity2::new(1.0, -2.0), NoiseParams::zero(), Rect::default_ocean());
        let p = step(&drift, Point2::new(5.0, 5.0), Command::default(), 0.5, &mut rng).unwrap();
        assert!((p.x - 5.5).abs() < 1e-12 && (p.y - 4.0).abs() < 1e-12);

        // clamped at the wall
        let p = step(&f, Point2::new(39.9, 1.0), Command { psi: 0.0, speed: 3.0 }, 1.0, &mut rng).unwrap();
        assert_eq!(p, Point2::new(40.0, 1.0));
    }

    #[test]
    fn goal_oriented_examples() {
        let o = Point2::new(0.0, 0.0);
        assert_eq!(goal_oriented_action(o, Point2::new(1.0, 0.0), 3.0).psi, 0.0);
        assert!((goal_oriented_action(o, Point2::new(0.0, -1.0), 3.0).psi + PI / 2.0).abs() < 1e-15);
        let c = goal_oriented_action(Point2::new(1.0, 1.0), Point2::new(2.0, 2.0), 3.0);
        assert!((c.psi - PI / 4.0).abs() < 1e-15);
        assert_eq!(c.speed, 3.0);
        assert_eq!(goal_oriented_action(o, o, 3.0), Command::default());
    }

    #[test]
    fn monte_carlo_step_mean() {
        let field = FlowField::uniform(
            Velocity2::new(0.4, -0.3),
            NoiseParams::new(1.0, 2.0).unwrap(),
            Rect::default_ocean(),
        );
        let mut rng = trial_rng(7, 3);
        let cmd = Command { psi: 0.7, speed: 2.0 };
        let (dt, n) = (0.1, 100_000);
        let p0 = Point2::new(20.0, 20.0);
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = step(&field, p0, cmd, dt, &mut rng).unwrap();
            sx += p.x - p0.x;
            sy += p.y - p0.y;
        }
        let ex = (0.4 + 2.0 * 0.7f64.cos()) * dt;
        let ey = (-0.3 + 2.0 * 0.7f64.sin()) * dt;
        let (se_x, se_y) = (1.0 * dt / (n as f64).sqrt(), 2.0 * dt / (n as f64).sqrt());
        assert!((sx / n as f64 - ex).abs() < 2.0 * se_x);
        assert!((sy / n as f64 - ey).abs() < 2.0 * se_y);
    }

    #[test]
    fn straight_run_time_matches_distance() {
        let f = still(0.0);
        let scen = Scenario {
            field: &f,
            start: Point2::new(2.0, 2.0),
            goal: Point2::new(32.0, 2.0),
            obstacles: None,
        };
        let params = SimParams::default();
        let planner = Planner::GoalOriented { goal: scen.goal };
        let t = simulate_trial(&scen, &planner, &params, &mut trial_rng(0, 0)).unwrap();
        assert!(t.reached);
        let d = 30.0 - params.goal_radius_km;
        assert!((t.time_cost - d / 3.0).abs() <= params.dt_sim_h + 1e-9);
        assert!((t.length - 3.0 * t.time_cost).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_and_invariants() {
        let f = FlowField::uniform(Velocity2::new(-5.0, 0.0), NoiseParams::isotropic(0.5).unwrap(), Rect::default_ocean());
        let scen = Scenario {
            field: &f,
            start: Point2::new(5.0, 20.0),
            goal: Point2::new(35.0, 20.0),
            obstacles: None,
        };
        let params = SimParams {
            budget_h: 4.0,
            ..SimParams::default()
        };
        let planner = Planner::GoalOriented { goal: scen.goal };
        let t = simulate_trial(&scen, &planner, &params, &mut trial_rng(3, 1)).unwrap();
        assert!(!t.reached);
        assert_eq!(t.time_cost, 4.0);
        assert_eq!(t.samples.len(), 41);
        assert!(t.samples.windows(2).all(|w| w[1].t > w[0].t));
        let len: f64 = t.samples.windows(2).map(|w| w[0].p.distance(&w[1].p)).sum();
        assert!((len - t.length).abs() < 1e-9);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let f = still(1.0);
        let scen = Scenario {
            field: &f,
            start: Point2::new(3.0, 3.0),
            goal: Point2::new(30.0, 30.0),
            obstacles: None,
        };
        let planner = Planner::GoalOriented { goal: scen.goal };
        let p = SimParams::default();
        let a = run_trials(&scen, &planner, &p, 4, 11).unwrap();
        let b = run_trials(&scen, &planner, &p, 4, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn obstacle_ends_trial() {
        let f = still(0.0);
        let states = StateSpace::tiling(Rect::default_ocean(), 20, 20, (19, 10))
            .unwrap()
            .with_obstacles(&[(10, 10)])
            .unwrap();
        let scen = Scenario {
            field: &f,
            start: states.center(states.index(2, 10)),
            goal: states.center(states.goal()),
            obstacles: Some(&states),
        };
        let planner = Planner::GoalOriented { goal: scen.goal };
        let t = simulate_trial(&scen, &planner, &SimParams::default(), &mut trial_rng(0, 0)).unwrap();
        assert!(!t.reached);
        assert_eq!(t.time_cost, 30.0);
        let end = t.end();
        assert!(states.is_obstacle(states.nearest_state(end)));
    }

    #[test]
    fn stats_use_sample_std() {
        let mk = |time: f64, len: f64, reached: bool| Trajectory {
            samples: Vec::new(),
            reached,
            time_cost: time,
            length: len,
        };
        let s = TrialStats::from_trajectories(&[mk(1.0, 2.0, true), mk(3.0, 4.0, false)]);
        assert_eq!(s.mean_time_h, 2.0);
        assert!((s.std_time_h - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.reached, 1);
        let same = TrialStats::from_trajectories(&vec![mk(5.0, 1.0, true); 10]);
        assert_eq!(same.std_time_h, 0.0);
    }

    #[test]
    fn export_headers() {
        let mut a = Vec::new();
        write_stats(&mut a, &[]).unwrap();
        assert_eq!(
            String::from_utf8(a).unwrap(),
            "planner,A,sigma,mean_time_h,std_time_h,mean_len_km,std_len_km,reached\n"
        );
        let mut b = Vec::new();
        write_trajectories(&mut b, &[]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "trial,t_h,x_km,y_km,psi_rad\n");
    }
}
