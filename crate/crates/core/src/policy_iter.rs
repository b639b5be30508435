//! Approximate policy iteration: finite-element policy evaluation of the
//! drift–diffusion PDE alternated with pointwise greedy improvement against
//! the continuous value function.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, build_mesh, constrain_goal, max_peclet, solve, ContinuousValue, Mesh};
use crate::flowfield::Point2;
use crate::mdp::{argmax_first, MdpModel, Policy, StateSpace, ValueTable, ACTION_COUNT};
use crate::taylor_pde::{assemble_coefficients, DiffusionForm, MomentConvention, MomentTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPolicy {
    /// Heading most directly toward the goal.
    #[default]
    GoalAimed,
    /// Every state starts with action `N`.
    UniformN,
}

impl InitialPolicy {
    pub fn build(self, states: &StateSpace) -> Policy {
        match self {
            InitialPolicy::GoalAimed => Policy::goal_aimed(states),
            InitialPolicy::UniformN => Policy::uniform(states.len(), 0),
        }
    }
}

/// Where the improvement step is carried out. The grid states are always
/// improved; extra points only receive reported actions.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ImprovementSet {
    #[default]
    GridStates,
    GridStatesAndPoints(Vec<Point2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiConfig {
    /// Mesh subsample factor (1 or 2).
    pub k: usize,
    pub max_iterations: usize,
    pub improvement_set: ImprovementSet,
    pub moment_convention: MomentConvention,
    pub diffusion_form: DiffusionForm,
    pub initial_policy: InitialPolicy,
    /// Iterations that use the plain greedy step before `switch_margin`
    /// applies.
    pub greedy_iterations: usize,
    /// Afterwards a state keeps its current action unless another one scores
    /// higher by more than this (reward units). Without it a handful of
    /// near-tied states can flip back and forth indefinitely.
    pub switch_margin: f64,
    /// Also after the greedy phase, a state never returns to an action it
    /// already held since then. Breaks longer cycles the margin misses.
    pub no_revisit: bool,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            k: 1,
            max_iterations: 50,
            improvement_set: ImprovementSet::GridStates,
            moment_convention: MomentConvention::Displacement,
            diffusion_form: DiffusionForm::NonDivergence,
            initial_policy: InitialPolicy::GoalAimed,
            greedy_iterations: 3,
            switch_margin: 1e-2,
            no_revisit: true,
        }
    }
}

/// One record of the per-iteration diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub policy_changes: usize,
    pub residual: f64,
    pub value_min: f64,
    pub value_max: f64,
    pub goal_value: f64,
    pub max_peclet: f64,
}

#[derive(Debug, Clone)]
pub struct ApiResult {
    pub policy: Policy,
    pub value: ContinuousValue,
    pub iterations: usize,
    /// Policy changes produced by each improvement step.
    pub changes: Vec<usize>,
    pub converged: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Actions at the extra improvement points, if any were requested.
    pub point_actions: Vec<usize>,
    pub moments: Arc<MomentTable>,
}

/// Output of one finite-element policy evaluation.
#[derive(Debug, Clone)]
pub struct FemEvaluation {
    pub value: ContinuousValue,
    pub residual: f64,
    pub max_peclet: f64,
    pub unknowns: usize,
}

/// Solves the weak form under `policy` on `mesh`.
pub fn evaluate_policy_fem(
    model: &MdpModel,
    mesh: &Arc<Mesh>,
    moments: &MomentTable,
    policy: &Policy,
    form: DiffusionForm,
) -> Result<FemEvaluation> {
    let coeffs =
        assemble_coefficients(model, moments, policy, mesh.node_to_state())?.with_form(form);
    let system = assemble(mesh, &coeffs)?;
    let system = constrain_goal(&system, mesh.goal_node());
    let (coefficients, residual) = solve(&system)?;
    Ok(FemEvaluation {
        value: ContinuousValue::new(mesh.clone(), coefficients)?,
        residual,
        max_peclet: max_peclet(mesh, &coeffs),
        unknowns: mesh.node_count(),
    })
}

fn check_in_grid(states: &StateSpace, p: Point2) -> Result<()> {
    let (lo, hi) = states.center_bounds();
    let tol = 1e-9;
    if p.x < lo.x - tol || p.y < lo.y - tol || p.x > hi.x + tol || p.y > hi.y + tol {
        return Err(Error::Domain(format!(
            "improvement point ({:.6}, {:.6}) lies outside the state grid",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Improvement objective for each action at point `p`, using the moments
/// and rewards of state `s`:
/// `R(s,a) + γ(μ·∇v + ½ Σ σᵢⱼ Hᵢⱼ) − (1−γ) v(p)`.
///
/// Points in the state grid outside the mesh cover (the two odd corners of a
/// checkerboard mesh) use the linear extension of the nearest element.
pub fn action_scores(
    model: &MdpModel,
    moments: &MomentTable,
    v: &ContinuousValue,
    s: usize,
    p: Point2,
    include_value_term: bool,
) -> [f64; ACTION_COUNT] {
    let gamma = model.gamma();
    let grad = v.gradient_extended(p);
    let hess = v.hessian_extended(p).hessian;
    let level = if include_value_term {
        (1.0 - gamma) * v.evaluate_extended(p)
    } else {
        0.0
    };
    std::array::from_fn(|a| {
        model.expected_reward(s, a) + gamma * moments.get(s, a).generator(grad, hess) - level
    })
}

/// Greedy action at an arbitrary point (moments taken from its cell's state).
pub fn continuous_action(
    model: &MdpModel,
    moments: &MomentTable,
    v: &ContinuousValue,
    p: Point2,
) -> usize {
    let s = model.states().nearest_state(p);
    argmax_first(action_scores(model, moments, v, s, p, true).into_iter())
}

/// Greedy policy on every grid state against the continuous value `v`.
pub fn improve_policy_continuous(
    model: &MdpModel,
    moments: &MomentTable,
    v: &ContinuousValue,
) -> Result<Policy> {
    improve_policy_with(model, moments, v, true)
}

/// Variant that can omit the action-independent `−(1−γ)v` term.
pub fn improve_policy_with(
    model: &MdpModel,
    moments: &MomentTable,
    v: &ContinuousValue,
    include_value_term: bool,
) -> Result<Policy> {
    let states = model.states();
    let actions = (0..states.len())
        .into_par_iter()
        .map(|s| {
            let p = states.center(s);
            check_in_grid(states, p)?;
            let scores = action_scores(model, moments, v, s, p, include_value_term);
            Ok(argmax_first(scores.into_iter()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Policy(actions))
}

/// Greedy step that only moves a state off its `current` action when the
/// best score beats the current one by more than `margin`.
pub fn improve_policy_from(
    model: &MdpModel,
    moments: &MomentTable,
    v: &ContinuousValue,
    current: &Policy,
    margin: f64,
) -> Result<Policy> {
    let states = model.states();
    let actions = (0..states.len())
        .into_par_iter()
        .map(|s| {
            let p = states.center(s);
            check_in_grid(states, p)?;
            let scores = action_scores(model, moments, v, s, p, true);
            let best = argmax_first(scores.into_iter());
            let keep = current.action(s);
            Ok(if scores[best] - scores[keep] > margin { best } else { keep })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Policy(actions))
}

/// Alternates FEM evaluation and continuous improvement until the policy on
/// the grid stops changing or `max_iterations` is reached (then
/// `converged = false`).
pub fn approximate_policy_iteration(model: &MdpModel, cfg: &ApiConfig) -> Result<ApiResult> {
    if cfg.max_iterations == 0 {
        return Err(Error::config("api.max_iterations", "must be at least 1"));
    }
    if !(cfg.switch_margin >= 0.0 && cfg.switch_margin.is_finite()) {
        return Err(Error::config("api.switch_margin", "must be finite and non-negative"));
    }
    let states = model.states();
    let mesh = Arc::new(build_mesh(states, cfg.k)?);
    let moments = Arc::new(MomentTable::build(model, cfg.moment_convention));
    let mut policy = cfg.initial_policy.build(states);
    let mut changes = Vec::new();
    let mut diagnostics = Vec::new();
    let mut held = vec![0u8; states.len()];

    let mut iteration = 0;
    let (value, converged) = loop {
        iteration += 1;
        let eval = evaluate_policy_fem(model, &mesh, &moments, &policy, cfg.diffusion_form)?;
        let margin = if iteration <= cfg.greedy_iterations {
            0.0
        } else {
            cfg.switch_margin
        };
        let mut improved = improve_policy_from(model, &moments, &eval.value, &policy, margin)?;
        if iteration > cfg.greedy_iterations && cfg.no_revisit {
            for (s, a) in improved.0.iter_mut().enumerate() {
                held[s] |= 1 << policy.0[s];
                if held[s] & (1 << *a) != 0 {
                    *a = policy.0[s];
                }
            }
        }
        let changed = improved.changes_from(&policy);
        let (lo, hi) = eval.value.value_range();
        changes.push(changed);
        diagnostics.push(IterationDiagnostics {
            iteration,
            policy_changes: changed,
            residual: eval.residual,
            value_min: lo,
            value_max: hi,
            goal_value: eval.value.goal_value(),
            max_peclet: eval.max_peclet,
        });
        policy = improved;
        if changed == 0 {
            break (eval.value, true);
        }
        if iteration >= cfg.max_iterations {
            break (eval.value, false);
        }
    };

    let point_actions = match &cfg.improvement_set {
        ImprovementSet::GridStates => Vec::new(),
        ImprovementSet::GridStatesAndPoints(points) => points
            .iter()
            .map(|&p| {
                check_in_grid(states, p)?;
                Ok(continuous_action(model, &moments, &value, p))
            })
            .collect::<Result<_>>()?,
    };

    Ok(ApiResult {
        policy,
        value,
        iterations: iteration,
        changes,
        converged,
        diagnostics,
        point_actions,
        moments,
    })
}

/// Mean over non-obstacle states of `(v(center) − oracle)²`.
pub fn value_mse(v: &ContinuousValue, oracle: &ValueTable, states: &StateSpace) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in 0..states.len() {
        if states.is_obstacle(s) {
            continue;
        }
        let d = v.evaluate_extended(states.center(s)) - oracle.0[s];
        total += d * d;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Writes diagnostics as one JSON object per line.
pub fn write_diagnostics<W: Write>(mut out: W, records: &[IterationDiagnostics]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
