//! P1 Lagrange finite elements on structured triangulations of the state grid.

mod assembly;
mod mesh;
mod quadrature;
mod value;

pub use assembly::{
    assemble, basis_gradients, constrain_goal, constrain_node, element_advection, element_mass,
    element_stiffness, max_peclet, solve, SparseSystem, SOLVE_TOL,
};
pub use mesh::{barycentric, build_mesh, Mesh};
pub use quadrature::integrate_triangle;
pub use value::{ContinuousValue, RecoveredHessian};
