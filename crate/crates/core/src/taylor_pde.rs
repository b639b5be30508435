//! First and second transition moments and the drift–diffusion PDE
//! coefficients they induce under a fixed policy.
//!
//! Expanding `E[v(s')] − v(s)` to second order around `s` gives
//! `μ·∇v + ½ ∇·(σ∇v)` with `μ` the mean one-step displacement and `σ` the
//! (non-central) second moment of the displacement.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::Point2;
use crate::mdp::{MdpModel, Policy, ACTION_COUNT};

/// Sign convention for the drift moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentConvention {
    /// `μ = E[s' − s]`.
    #[default]
    Displacement,
    /// `μ = E[s − s']`. Flips the drift, so the planner heads away from the goal.
    Reversed,
}

/// How the second-order term enters the weak form.
///
/// The expansion produces `½ σ:∇²v`. Written as `½ ∇·(σ∇v)` it picks up an
/// extra drift `½ ∇·σ` wherever `σ` changes between states (policy switches,
/// walls), which shows up as spurious ridges in the solved value. The
/// non-divergence form subtracts that drift again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionForm {
    /// `½ σ:∇²v`, assembled as `½ ∇·(σ∇v) − ½ (∇·σ)·∇v`.
    #[default]
    NonDivergence,
    /// `½ ∇·(σ∇v)` with element-constant `σ`.
    Divergence,
}

/// Drift (km) and non-central second moment (km²) of one transition row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftDiffusion {
    pub mu: [f64; 2],
    pub sigma: [[f64; 2]; 2],
}

impl DriftDiffusion {
    /// `σ − μμᵀ`, the covariance of the displacement.
    pub fn central_second_moment(&self) -> [[f64; 2]; 2] {
        let [mx, my] = self.mu;
        [
            [self.sigma[0][0] - mx * mx, self.sigma[0][1] - mx * my],
            [self.sigma[1][0] - my * mx, self.sigma[1][1] - my * my],
        ]
    }

    /// `μ·g + ½ Σᵢⱼ σᵢⱼ Hᵢⱼ`.
    pub fn generator(&self, grad: [f64; 2], hess: [[f64; 2]; 2]) -> f64 {
        let drift = self.mu[0] * grad[0] + self.mu[1] * grad[1];
        let diffusion: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| self.sigma[i][j] * hess[i][j])
            .sum();
        drift + 0.5 * diffusion
    }
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(m: [[f64; 2]; 2]) -> f64 {
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    half_trace - half_diff.hypot(m[0][1])
}

pub fn drift_and_diffusion(
    model: &MdpModel,
    s: usize,
    a: usize,
    convention: MomentConvention,
) -> DriftDiffusion {
    let states = model.states();
    let here = states.center(s);
    let mut out = DriftDiffusion::default();
    for &(next, p) in model.transition(s, a).entries() {
        let c = states.center(next);
        let d = [c.x - here.x, c.y - here.y];
        out.mu[0] += p * d[0];
        out.mu[1] += p * d[1];
        out.sigma[0][0] += p * d[0] * d[0];
        out.sigma[0][1] += p * d[0] * d[1];
        out.sigma[1][1] += p * d[1] * d[1];
    }
    out.sigma[1][0] = out.sigma[0][1];
    if convention == MomentConvention::Reversed {
        out.mu = [-out.mu[0], -out.mu[1]];
    }
    out
}

/// Moments for every `(state, action)` pair, indexed `s * ACTION_COUNT + a`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    convention: MomentConvention,
    moments: Vec<DriftDiffusion>,
}

impl MomentTable {
    pub fn build(model: &MdpModel, convention: MomentConvention) -> Self {
        let n = model.states().len();
        let moments = (0..n)
            .flat_map(|s| (0..ACTION_COUNT).map(move |a| (s, a)))
            .map(|(s, a)| drift_and_diffusion(model, s, a, convention))
            .collect();
        Self {
            convention,
            moments,
        }
    }

    pub fn convention(&self) -> MomentConvention {
        self.convention
    }

    pub fn get(&self, s: usize, a: usize) -> &DriftDiffusion {
        &self.moments[s * ACTION_COUNT + a]
    }
}

/// PDE data at one mesh node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficients {
    pub state: usize,
    pub mu: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    /// Left-hand side `−R(s, π(s))`.
    pub source: f64,
}

/// Nodal coefficients of `−R = γ(μ·∇v + ½∇·σ∇v) − (1−γ)v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeCoefficients {
    pub nodes: Vec<NodeCoefficients>,
    pub gamma: f64,
    /// Node pinned to zero (the goal).
    pub goal_node: usize,
    pub form: DiffusionForm,
}

impl PdeCoefficients {
    pub fn reaction(&self) -> f64 {
        1.0 - self.gamma
    }

    /// Coefficients given directly per node, e.g. for manufactured problems.
    pub fn from_nodes(nodes: Vec<NodeCoefficients>, gamma: f64, goal_node: usize) -> Result<Self> {
        if goal_node >= nodes.len() {
            return Err(Error::Construction(format!(
                "goal node {goal_node} out of range for {} nodes",
                nodes.len()
            )));
        }
        let finite = nodes.iter().all(|c| {
            c.source.is_finite()
                && c.mu.iter().all(|v| v.is_finite())
                && c.sigma.iter().flatten().all(|v| v.is_finite())
        });
        if !finite || !(0.0..1.0).contains(&gamma) {
            return Err(Error::Construction("non-finite PDE coefficients".into()));
        }
        Ok(Self {
            nodes,
            gamma,
            goal_node,
            form: DiffusionForm::default(),
        })
    }

    pub fn with_form(mut self, form: DiffusionForm) -> Self {
        self.form = form;
        self
    }
}

/// Samples drift, diffusion and source at each mesh node under `pi`.
///
/// `node_states[k]` is the state carried by node `k`.
pub fn assemble_coefficients(
    model: &MdpModel,
    moments: &MomentTable,
    pi: &Policy,
    node_states: &[usize],
) -> Result<PdeCoefficients> {
    let states = model.states();
    let mut goal_node = None;
    let mut nodes = Vec::with_capacity(node_states.len());
    for (k, &s) in node_states.iter().enumerate() {
        if s >= states.len() {
            return Err(Error::Construction(format!(
                "mesh node {k} maps to unknown state {s}"
            )));
        }
        if s == states.goal() {
            goal_node = Some(k);
        }
        let a = pi.action(s);
        let m = moments.get(s, a);
        nodes.push(NodeCoefficients {
            state: s,
            mu: m.mu,
            sigma: m.sigma,
            source: -model.expected_reward(s, a),
        });
    }
    let goal_node = goal_node
        .ok_or_else(|| Error::Construction("goal state is not a mesh node".into()))?;
    PdeCoefficients::from_nodes(nodes, model.gamma(), goal_node)
}

/// CSV `node_id,x_km,y_km,mu_x,mu_y,sxx,sxy,syy,source`.
pub fn write_coefficients<W: Write>(
    out: W,
    coeffs: &PdeCoefficients,
    positions: &[Point2],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "node_id", "x_km", "y_km", "mu_x", "mu_y", "sxx", "sxy", "syy", "source",
    ])?;
    for (k, (c, p)) in coeffs.nodes.iter().zip(positions).enumerate() {
        w.write_record([
            k.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            c.mu[0].to_string(),
            c.mu[1].to_string(),
            c.sigma[0][0].to_string(),
            c.sigma[0][1].to_string(),
            c.sigma[1][1].to_string(),
            c.source.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
