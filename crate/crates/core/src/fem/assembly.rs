use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flowfield::Point2;
use crate::sparse::{solve_direct, CsrMatrix};
use crate::taylor_pde::{DiffusionForm, PdeCoefficients};

use super::mesh::{signed_area, Mesh};

/// Relative residual target for the Galerkin solve.
pub const SOLVE_TOL: f64 = 1e-8;

/// The Galerkin system `K a = F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
}

/// Gradients of the three P1 basis functions (constant on the triangle).
pub fn basis_gradients(a: Point2, b: Point2, c: Point2) -> [[f64; 2]; 3] {
    let twice = 2.0 * signed_area(a, b, c);
    [
        [(b.y - c.y) / twice, (c.x - b.x) / twice],
        [(c.y - a.y) / twice, (a.x - c.x) / twice],
        [(a.y - b.y) / twice, (b.x - a.x) / twice],
    ]
}

/// `∫ (σ ∇φⱼ)·∇φᵢ` for constant `σ`.
pub fn element_stiffness(verts: [Point2; 3], sigma: [[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let area = signed_area(verts[0], verts[1], verts[2]);
    let g = basis_gradients(verts[0], verts[1], verts[2]);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let sg = [
                sigma[0][0] * g[j][0] + sigma[0][1] * g[j][1],
                sigma[1][0] * g[j][0] + sigma[1][1] * g[j][1],
            ];
            k[i][j] = area * (sg[0] * g[i][0] + sg[1] * g[i][1]);
        }
    }
    k
}

/// Exact P1 mass matrix `∫ φⱼ φᵢ`.
pub fn element_mass(verts: [Point2; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(verts[0], verts[1], verts[2]);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// `∫ (μ·∇φⱼ) φᵢ` for constant `μ`.
pub fn element_advection(verts: [Point2; 3], mu: [f64; 2]) -> [[f64; 3]; 3] {
    let area = signed_area(verts[0], verts[1], verts[2]);
    let g = basis_gradients(verts[0], verts[1], verts[2]);
    let mut c = [[0.0; 3]; 3];
    for row in c.iter_mut() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (mu[0] * g[j][0] + mu[1] * g[j][1]) * area / 3.0;
        }
    }
    c
}

/// Element-constant coefficients: vertex averages.
struct ElementCoefficients {
    mu: [f64; 2],
    sigma: [[f64; 2]; 2],
    source: f64,
}

fn element_coefficients(coeffs: &PdeCoefficients, tri: &[usize; 3]) -> ElementCoefficients {
    let mut out = ElementCoefficients {
        mu: [0.0; 2],
        sigma: [[0.0; 2]; 2],
        source: 0.0,
    };
    for &v in tri {
        let c = &coeffs.nodes[v];
        for i in 0..2 {
            out.mu[i] += c.mu[i] / 3.0;
            for j in 0..2 {
                out.sigma[i][j] += c.sigma[i][j] / 3.0;
            }
        }
        out.source += c.source / 3.0;
    }
    out
}

/// `∇·σ` of the linear interpolant of the nodal `σ` on one element.
fn sigma_divergence(coeffs: &PdeCoefficients, tri: &[usize; 3], verts: [Point2; 3]) -> [f64; 2] {
    let g = basis_gradients(verts[0], verts[1], verts[2]);
    let mut div = [0.0; 2];
    for (l, &v) in tri.iter().enumerate() {
        let s = coeffs.nodes[v].sigma;
        div[0] += s[0][0] * g[l][0] + s[0][1] * g[l][1];
        div[1] += s[1][0] * g[l][0] + s[1][1] * g[l][1];
    }
    div
}

/// Largest element Péclet number `|μ| h / (μ̂ᵀσμ̂)` over the mesh.
pub fn max_peclet(mesh: &Mesh, coeffs: &PdeCoefficients) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let e = element_coefficients(coeffs, tri);
            let speed = e.mu[0].hypot(e.mu[1]);
            if speed == 0.0 {
                return 0.0;
            }
            let u = [e.mu[0] / speed, e.mu[1] / speed];
            let along = u[0] * (e.sigma[0][0] * u[0] + e.sigma[0][1] * u[1])
                + u[1] * (e.sigma[1][0] * u[0] + e.sigma[1][1] * u[1]);
            if along <= 0.0 {
                f64::INFINITY
            } else {
                speed * mesh.diameter(t) / along
            }
        })
        .fold(0.0, f64::max)
}

/// Assembles `K a = F` for
/// `−∫R w = γ∫(μ·∇v) w − (γ/2)∫σ∇v·∇w − (1−γ)∫v w`.
///
/// In the non-divergence form `μ` is replaced by `μ − ½∇·σ` element by
/// element. The zero-flux boundary condition is natural and adds no
/// boundary term.
pub fn assemble(mesh: &Mesh, coeffs: &PdeCoefficients) -> Result<SparseSystem> {
    let n = mesh.node_count();
    if coeffs.nodes.len() != n {
        return Err(Error::Construction(format!(
            "{} coefficient entries for {n} mesh nodes",
            coeffs.nodes.len()
        )));
    }
    let gamma = coeffs.gamma;
    let reaction = coeffs.reaction();

    let locals: Vec<([usize; 3], [[f64; 3]; 3], [f64; 3])> = mesh
        .triangles()
        .par_iter()
        .enumerate()
        .map(|(t, tri)| {
            let verts = mesh.vertices(t);
            if signed_area(verts[0], verts[1], verts[2]) <= 1e-12 {
                return Err(Error::Mesh(format!("degenerate element {t} during assembly")));
            }
            let e = element_coefficients(coeffs, tri);
            let mu = match coeffs.form {
                DiffusionForm::Divergence => e.mu,
                DiffusionForm::NonDivergence => {
                    let div = sigma_divergence(coeffs, tri, verts);
                    [e.mu[0] - 0.5 * div[0], e.mu[1] - 0.5 * div[1]]
                }
            };
            let adv = element_advection(verts, mu);
            let stiff = element_stiffness(verts, e.sigma);
            let mass = element_mass(verts);
            let mut local = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] =
                        gamma * adv[i][j] - 0.5 * gamma * stiff[i][j] - reaction * mass[i][j];
                }
            }
            let area = mesh.area(t);
            Ok((*tri, local, [e.source * area / 3.0; 3]))
        })
        .collect::<Result<_>>()?;

    let mut triplets = Vec::with_capacity(9 * locals.len());
    let mut f = vec![0.0; n];
    for (tri, local, load) in locals {
        for i in 0..3 {
            f[tri[i]] += load[i];
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    Ok(SparseSystem {
        k: CsrMatrix::from_triplets(n, &triplets),
        f,
    })
}

/// Pins `a[node] = value` by symmetric elimination.
pub fn constrain_node(system: &SparseSystem, node: usize, value: f64) -> SparseSystem {
    let n = system.k.dim();
    assert!(node < n, "constrained node {node} out of range");
    let mut f = system.f.clone();
    let mut triplets = Vec::with_capacity(system.k.nnz());
    for r in 0..n {
        if r == node {
            continue;
        }
        for (c, v) in system.k.row(r) {
            if c == node {
                f[r] -= v * value;
            } else {
                triplets.push((r, c, v));
            }
        }
    }
    triplets.push((node, node, 1.0));
    f[node] = value;
    SparseSystem {
        k: CsrMatrix::from_triplets(n, &triplets),
        f,
    }
}

/// Enforces the zero value at the goal node.
pub fn constrain_goal(system: &SparseSystem, goal_node: usize) -> SparseSystem {
    constrain_node(system, goal_node, 0.0)
}

/// Direct solve; returns nodal coefficients and the relative residual.
pub fn solve(system: &SparseSystem) -> Result<(Vec<f64>, f64)> {
    solve_direct(&system.k, &system.f, SOLVE_TOL)
}
