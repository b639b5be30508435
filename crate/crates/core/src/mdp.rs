//! Discrete grid MDP: states at cell centers, eight compass actions,
//! bivariate-Gaussian transitions, and the exact solvers (policy iteration
//! and value iteration) used as the reference for the continuous planner.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{FlowField, NoiseParams, Point2, Rect};
use crate::sparse::{solve_direct, CsrMatrix};

pub const ACTION_COUNT: usize = 8;

/// Floor on the transition variance (km²); keeps the zero-noise limit finite.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Scores within this absolute margin count as ties. Absolute so that adding
/// a constant to every reward cannot move a pair in or out of a tie.
pub(crate) const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compass {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Compass {
    /// Fixed action order; also the tie-break order.
    pub const ALL: [Compass; ACTION_COUNT] = [
        Compass::N,
        Compass::NE,
        Compass::E,
        Compass::SE,
        Compass::S,
        Compass::SW,
        Compass::W,
        Compass::NW,
    ];

    /// Heading in radians, counter-clockwise from east.
    pub fn heading(self) -> f64 {
        match self {
            Compass::N => FRAC_PI_2,
            Compass::NE => FRAC_PI_4,
            Compass::E => 0.0,
            Compass::SE => -FRAC_PI_4,
            Compass::S => -FRAC_PI_2,
            Compass::SW => -3.0 * FRAC_PI_4,
            Compass::W => PI,
            Compass::NW => 3.0 * FRAC_PI_4,
        }
    }

    pub fn index(self) -> usize {
        Compass::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Reflection across a vertical axis (east and west swap).
    pub fn mirrored_x(self) -> Compass {
        match self {
            Compass::NE => Compass::NW,
            Compass::NW => Compass::NE,
            Compass::E => Compass::W,
            Compass::W => Compass::E,
            Compass::SE => Compass::SW,
            Compass::SW => Compass::SE,
            other => other,
        }
    }
}

/// A commanded `(heading, speed)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub compass: Compass,
    pub heading: f64,
    pub speed: f64,
}

impl Action {
    pub fn all(v_max: f64) -> [Action; ACTION_COUNT] {
        Compass::ALL.map(|compass| Action {
            compass,
            heading: compass.heading(),
            speed: v_max,
        })
    }
}

/// Grid of states at cell centers, row-major ids `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    origin: Point2,
    cell_km: f64,
    nx: usize,
    ny: usize,
    obstacles: Vec<bool>,
    goal: usize,
}

impl StateSpace {
    /// `origin` is the center of cell `(0, 0)`.
    pub fn new(
        origin: Point2,
        cell_km: f64,
        nx: usize,
        ny: usize,
        obstacles: &[(usize, usize)],
        goal: (usize, usize),
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || nx * ny < 4 {
            return Err(Error::Construction(format!(
                "state grid needs at least 4 states, got {nx}x{ny}"
            )));
        }
        if !(cell_km > 0.0 && cell_km.is_finite()) || !origin.is_finite() {
            return Err(Error::Construction(format!("invalid cell size {cell_km}")));
        }
        let mut mask = vec![false; nx * ny];
        for &(i, j) in obstacles {
            if i >= nx || j >= ny {
                return Err(Error::Construction(format!("obstacle ({i}, {j}) outside grid")));
            }
            mask[j * nx + i] = true;
        }
        if goal.0 >= nx || goal.1 >= ny {
            return Err(Error::Construction(format!(
                "goal ({}, {}) outside grid",
                goal.0, goal.1
            )));
        }
        let goal_id = goal.1 * nx + goal.0;
        if mask[goal_id] {
            return Err(Error::Construction("goal state is an obstacle".into()));
        }
        Ok(Self {
            origin,
            cell_km,
            nx,
            ny,
            obstacles: mask,
            goal: goal_id,
        })
    }

    /// `n x n` states tiling a square domain, centers at half-cell offsets.
    pub fn tiling(domain: Rect, nx: usize, ny: usize, goal: (usize, usize)) -> Result<Self> {
        let cell = domain.width / nx as f64;
        if ((domain.height / ny as f64) - cell).abs() > 1e-9 {
            return Err(Error::Construction(
                "tiling requires square cells".into(),
            ));
        }
        Self::new(
            Point2::new(domain.min.x + cell / 2.0, domain.min.y + cell / 2.0),
            cell,
            nx,
            ny,
            &[],
            goal,
        )
    }

    pub fn with_obstacles(mut self, obstacles: &[(usize, usize)]) -> Result<Self> {
        for &(i, j) in obstacles {
            if i >= self.nx || j >= self.ny {
                return Err(Error::Construction(format!("obstacle ({i}, {j}) outside grid")));
            }
            let id = self.index(i, j);
            if id == self.goal {
                return Err(Error::Construction("goal state is an obstacle".into()));
            }
            self.obstacles[id] = true;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_km(&self) -> f64 {
        self.cell_km
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, id: usize) -> (usize, usize) {
        (id % self.nx, id / self.nx)
    }

    pub fn center(&self, id: usize) -> Point2 {
        let (i, j) = self.coords(id);
        Point2::new(
            self.origin.x + i as f64 * self.cell_km,
            self.origin.y + j as f64 * self.cell_km,
        )
    }

    pub fn is_obstacle(&self, id: usize) -> bool {
        self.obstacles[id]
    }

    /// Goal and obstacles are absorbing.
    pub fn is_terminal(&self, id: usize) -> bool {
        id == self.goal || self.obstacles[id]
    }

    pub fn obstacle_cells(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .filter(|&id| self.obstacles[id])
            .map(|id| self.coords(id))
            .collect()
    }

    /// State whose cell contains `p` (nearest center, clamped to the grid).
    pub fn nearest_state(&self, p: Point2) -> usize {
        let snap = |c: f64, o: f64, n: usize| {
            let f = ((c - o) / self.cell_km).round();
            f.clamp(0.0, (n - 1) as f64) as usize
        };
        self.index(snap(p.x, self.origin.x, self.nx), snap(p.y, self.origin.y, self.ny))
    }

    /// Bounding box of the cell centers.
    pub fn center_bounds(&self) -> (Point2, Point2) {
        (self.origin, self.center(self.len() - 1))
    }

    /// Moore neighborhood plus the state itself, restricted to the grid.
    pub fn neighborhood(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(id);
        let (i, j) = (i as isize, j as isize);
        (-1isize..=1)
            .flat_map(move |dj| (-1isize..=1).map(move |di| (i + di, j + dj)))
            .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny)
            .map(|(a, b)| self.index(a as usize, b as usize))
    }

    /// Reflection of state `id` across the grid's vertical center line.
    pub fn mirror_x(&self, id: usize) -> usize {
        let (i, j) = self.coords(id);
        self.index(self.nx - 1 - i, j)
    }
}

/// Successor distribution for one `(state, action)` pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionRow {
    entries: Vec<(usize, f64)>,
}

impl TransitionRow {
    /// Validates positivity and normalization (1e-12).
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() || entries.iter().any(|&(_, p)| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Construction("transition probabilities must be positive".into()));
        }
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Construction(format!(
                "transition row sums to {total}, expected 1"
            )));
        }
        Ok(Self { entries })
    }

    pub fn absorbing(state: usize) -> Self {
        Self {
            entries: vec![(state, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn probability(&self, state: usize) -> f64 {
        self.entries
            .iter()
            .filter(|&&(s, _)| s == state)
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(s, p)| p * values[s]).sum()
    }
}

/// Per-transition reward constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    /// Reward for an ordinary move.
    pub step: f64,
    /// Reward for moving into an obstacle.
    pub obstacle: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            step: -0.1,
            obstacle: -1.0,
        }
    }
}

impl RewardSpec {
    /// `R(s, a, s')`; zero out of terminals and into the goal.
    pub fn transition_reward(&self, states: &StateSpace, s: usize, next: usize) -> f64 {
        if states.is_terminal(s) || next == states.goal() {
            0.0
        } else if states.is_obstacle(next) {
            self.obstacle
        } else {
            self.step
        }
    }
}

/// Parameters of the MDP besides the field and the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpParams {
    /// Action duration, hours.
    pub dt_h: f64,
    pub v_max_kmh: f64,
    pub gamma: f64,
    pub rewards: RewardSpec,
}

impl Default for MdpParams {
    fn default() -> Self {
        Self {
            dt_h: 1.0,
            v_max_kmh: 3.0,
            gamma: 0.95,
            rewards: RewardSpec::default(),
        }
    }
}

/// The assembled grid MDP.
#[derive(Debug, Clone)]
pub struct MdpModel {
    states: StateSpace,
    actions: [Action; ACTION_COUNT],
    params: MdpParams,
    field: FlowField,
    /// Indexed `s * ACTION_COUNT + a`.
    rows: Vec<TransitionRow>,
    rewards: Vec<f64>,
}

fn transition_row(
    field: &FlowField,
    states: &StateSpace,
    s: usize,
    action: &Action,
    dt: f64,
) -> Result<TransitionRow> {
    let center = states.center(s);
    let drift = field.velocity(center)?;
    let mean = Point2::new(
        center.x + (drift.vx + action.speed * action.heading.cos()) * dt,
        center.y + (drift.vy + action.speed * action.heading.sin()) * dt,
    );
    let noise: NoiseParams = field.noise();
    let var_x = (noise.sigma_x * noise.sigma_x * dt).max(VARIANCE_FLOOR);
    let var_y = (noise.sigma_y * noise.sigma_y * dt).max(VARIANCE_FLOOR);

    let log_w: Vec<(usize, f64)> = states
        .neighborhood(s)
        .map(|n| {
            let c = states.center(n);
            let dx = c.x - mean.x;
            let dy = c.y - mean.y;
            (n, -0.5 * (dx * dx / var_x + dy * dy / var_y))
        })
        .collect();
    let max = log_w
        .iter()
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Construction(format!("empty successor set for state {s}")));
    }
    // density normalization constants cancel
    let weights: Vec<(usize, f64)> = log_w
        .into_iter()
        .map(|(n, l)| (n, (l - max).exp()))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    Ok(TransitionRow {
        entries: weights.into_iter().map(|(n, w)| (n, w / total)).collect(),
    })
}

/// Builds transitions and expected rewards for every `(state, action)`.
pub fn build_model(field: &FlowField, states: &StateSpace, params: MdpParams) -> Result<MdpModel> {
    if !(params.v_max_kmh > 0.0 && params.dt_h > 0.0) {
        return Err(Error::Construction(format!(
            "v_max ({}) and dt ({}) must be positive",
            params.v_max_kmh, params.dt_h
        )));
    }
    if !(0.0..1.0).contains(&params.gamma) {
        return Err(Error::Construction(format!(
            "discount must lie in [0, 1), got {}",
            params.gamma
        )));
    }
    let domain = field.domain();
    let (lo, hi) = states.center_bounds();
    if !domain.contains(lo) || !domain.contains(hi) {
        return Err(Error::Construction(
            "state centers extend beyond the field domain".into(),
        ));
    }
    let actions = Action::all(params.v_max_kmh);

    let per_state: Vec<Vec<(TransitionRow, f64)>> = (0..states.len())
        .into_par_iter()
        .map(|s| {
            actions
                .iter()
                .map(|a| {
                    let row = if states.is_terminal(s) {
                        TransitionRow::absorbing(s)
                    } else {
                        transition_row(field, states, s, a, params.dt_h)?
                    };
                    let r = row
                        .entries
                        .iter()
                        .map(|&(n, p)| p * params.rewards.transition_reward(states, s, n))
                        .sum();
                    Ok((row, r))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(states.len() * ACTION_COUNT);
    let mut rewards = Vec::with_capacity(states.len() * ACTION_COUNT);
    for (row, r) in per_state.into_iter().flatten() {
        rows.push(row);
        rewards.push(r);
    }
    Ok(MdpModel {
        states: states.clone(),
        actions,
        params,
        field: field.clone(),
        rows,
        rewards,
    })
}

impl MdpModel {
    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &[Action; ACTION_COUNT] {
        &self.actions
    }

    pub fn params(&self) -> &MdpParams {
        &self.params
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn field(&self) -> &FlowField {
        &self.field
    }

    pub fn transition(&self, s: usize, a: usize) -> &TransitionRow {
        &self.rows[s * ACTION_COUNT + a]
    }

    /// Expected one-step reward `R(s, a)`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * ACTION_COUNT + a]
    }

    /// Overrides one transition row; the reward is left unchanged.
    pub fn set_transition(&mut self, s: usize, a: usize, row: TransitionRow) {
        self.rows[s * ACTION_COUNT + a] = row;
    }

    pub fn set_reward(&mut self, s: usize, a: usize, reward: f64) {
        self.rewards[s * ACTION_COUNT + a] = reward;
    }

    /// Adds `c` to every expected reward, terminals included.
    pub fn shift_rewards(&mut self, c: f64) {
        for r in &mut self.rewards {
            *r += c;
        }
    }

    /// `R(s, a) + γ Σ T(s, a; s') v(s')`.
    pub fn q_value(&self, values: &[f64], s: usize, a: usize) -> f64 {
        self.expected_reward(s, a) + self.gamma() * self.transition(s, a).expectation(values)
    }
}

/// Per-state values, indexed by state id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Action index per state id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn uniform(n: usize, action: usize) -> Self {
        Self(vec![action; n])
    }

    /// Each state takes the compass action pointing most directly at the goal.
    pub fn goal_aimed(states: &StateSpace) -> Self {
        let goal = states.center(states.goal());
        Self(
            (0..states.len())
                .map(|s| {
                    if s == states.goal() {
                        return 0;
                    }
                    let c = states.center(s);
                    let bearing = (goal.y - c.y).atan2(goal.x - c.x);
                    argmax_first(Compass::ALL.map(|d| (d.heading() - bearing).cos()).iter().copied())
                })
                .collect(),
        )
    }

    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of states whose action differs.
    pub fn changes_from(&self, other: &Policy) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// First index whose score is within tolerance of the maximum.
pub(crate) fn argmax_first(scores: impl Iterator<Item = f64> + Clone) -> usize {
    let best = scores.clone().fold(f64::NEG_INFINITY, f64::max);
    scores.into_iter().position(|q| q >= best - TIE_TOL).unwrap_or(0)
}

/// `(I − γ P^π, r^π)`.
pub fn policy_system(model: &MdpModel, pi: &Policy) -> (CsrMatrix, Vec<f64>) {
    let n = model.states().len();
    let gamma = model.gamma();
    let mut trip = Vec::with_capacity(n * 10);
    let mut rhs = Vec::with_capacity(n);
    for s in 0..n {
        let a = pi.action(s);
        trip.push((s, s, 1.0));
        for &(t, p) in model.transition(s, a).entries() {
            trip.push((s, t, -gamma * p));
        }
        rhs.push(model.expected_reward(s, a));
    }
    (CsrMatrix::from_triplets(n, &trip), rhs)
}

/// Solves `(I − γ P^π) v = r^π` directly.
pub fn policy_evaluation_exact(model: &MdpModel, pi: &Policy) -> Result<ValueTable> {
    if pi.len() != model.states().len() || pi.0.iter().any(|&a| a >= ACTION_COUNT) {
        return Err(Error::Construction("policy does not match the state space".into()));
    }
    let (a, r) = policy_system(model, pi);
    let (mut v, res) = solve_direct(&a, &r, 1e-9)?;
    if res >= 1e-9 {
        return Err(Error::numerical("policy evaluation residual too large", res));
    }
    // self-loops have the closed form r / (1 − γ); keeps terminals exactly 0
    for (s, vs) in v.iter_mut().enumerate() {
        if model.transition(s, pi.action(s)).entries() == [(s, 1.0)] {
            *vs = r[s] / (1.0 - model.gamma());
        }
    }
    Ok(ValueTable(v))
}

/// Greedy policy with respect to `v`; ties go to the lowest action index.
pub fn policy_improvement_discrete(model: &MdpModel, v: &ValueTable) -> Policy {
    let n = model.states().len();
    Policy(
        (0..n)
            .into_par_iter()
            .map(|s| argmax_first((0..ACTION_COUNT).map(|a| model.q_value(v.as_slice(), s, a))))
            .collect(),
    )
}

/// Outcome of exact policy iteration.
#[derive(Debug, Clone)]
pub struct ClassicPiResult {
    pub policy: Policy,
    pub values: ValueTable,
    /// Number of improvement steps performed.
    pub iterations: usize,
    /// Value of each evaluated policy, in order.
    pub value_history: Vec<ValueTable>,
    /// Policy changes produced by each improvement step.
    pub changes: Vec<usize>,
}

pub const DEFAULT_PI_MAX_ITERATIONS: usize = 500;

/// Exact policy iteration from the all-`N` policy.
pub fn classic_policy_iteration(model: &MdpModel) -> Result<ClassicPiResult> {
    classic_policy_iteration_from(
        model,
        Policy::uniform(model.states().len(), 0),
        DEFAULT_PI_MAX_ITERATIONS,
    )
}

pub fn classic_policy_iteration_from(
    model: &MdpModel,
    initial: Policy,
    max_iterations: usize,
) -> Result<ClassicPiResult> {
    let mut policy = initial;
    let mut value_history = Vec::new();
    let mut changes = Vec::new();
    for iteration in 1..=max_iterations {
        let values = policy_evaluation_exact(model, &policy)?;
        let improved = policy_improvement_discrete(model, &values);
        let changed = improved.changes_from(&policy);
        changes.push(changed);
        value_history.push(values.clone());
        if changed == 0 {
            return Ok(ClassicPiResult {
                policy,
                values,
                iterations: iteration,
                value_history,
                changes,
            });
        }
        policy = improved;
    }
    Err(Error::IterationLimit {
        limit: max_iterations,
    })
}

/// Bellman-optimality sweeps until the fixed-point error bound drops below `tol`.
pub fn value_iteration(model: &MdpModel, tol: f64, max_sweeps: usize) -> Result<ValueTable> {
    let n = model.states().len();
    let gamma = model.gamma();
    let mut v = vec![0.0; n];
    // ‖v_k − v*‖ ≤ γ/(1−γ) ‖v_k − v_{k−1}‖
    let stop = tol * (1.0 - gamma) / gamma.max(f64::MIN_POSITIVE);
    for _ in 0..max_sweeps {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..ACTION_COUNT)
                    .map(|a| model.q_value(&v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if delta <= stop {
            return Ok(ValueTable(v));
        }
    }
    Err(Error::IterationLimit { limit: max_sweeps })
}

/// Iterative evaluation of a fixed policy (Jacobi sweeps), used as an oracle.
pub fn policy_evaluation_iterative(
    model: &MdpModel,
    pi: &Policy,
    tol: f64,
    max_sweeps: usize,
) -> Result<ValueTable> {
    let n = model.states().len();
    let gamma = model.gamma();
    let mut v = vec![0.0; n];
    let stop = tol * (1.0 - gamma) / gamma.max(f64::MIN_POSITIVE);
    for _ in 0..max_sweeps {
        let next: Vec<f64> = (0..n).map(|s| model.q_value(&v, s, pi.action(s))).collect();
        let delta = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if delta <= stop {
            return Ok(ValueTable(v));
        }
    }
    Err(Error::IterationLimit { limit: max_sweeps })
}

/// CSV `state_id,i,j,x_km,y_km,value`.
pub fn write_value_table<W: Write>(out: W, states: &StateSpace, values: &ValueTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state_id", "i", "j", "x_km", "y_km", "value"])?;
    for (s, v) in values.0.iter().enumerate() {
        let (i, j) = states.coords(s);
        let c = states.center(s);
        w.write_record([
            s.to_string(),
            i.to_string(),
            j.to_string(),
            c.x.to_string(),
            c.y.to_string(),
            v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `state_id,action`, actions by compass name.
pub fn write_policy<W: Write>(out: W, policy: &Policy) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state_id", "action"])?;
    for (s, &a) in policy.0.iter().enumerate() {
        w.write_record([s.to_string(), format!("{:?}", Compass::ALL[a])])?;
    }
    w.flush()?;
    Ok(())
}
