//! Path planning for a vehicle in an uncertain flow field.
//!
//! A grid MDP built from a (gyre or sampled) current field is solved exactly
//! by policy iteration, and approximately by replacing the Bellman backup
//! with a drift-diffusion PDE discretized by P1 finite elements. The
//! approximate value function lives on the whole domain, so the policy can
//! be queried at any point. [`simulator`] drives vehicles through the noisy
//! field with either kind of policy, and [`commands`] wraps it all into the
//! `solve` / `simulate` / `mse` batch runs.
//!
//! ```
//! use diffplan::flowfield::{FlowField, NoiseParams, Rect};
//! use diffplan::mdp::{build_model, classic_policy_iteration, MdpParams, StateSpace};
//! use diffplan::policy_iter::{approximate_policy_iteration, ApiConfig};
//!
//! let field = FlowField::default_gyre(0.5, NoiseParams::isotropic(1.0).unwrap()).unwrap();
//! let states = StateSpace::tiling(Rect::default_ocean(), 8, 8, (7, 7)).unwrap();
//! let model = build_model(&field, &states, MdpParams::default()).unwrap();
//! let exact = classic_policy_iteration(&model).unwrap();
//! let approx = approximate_policy_iteration(&model, &ApiConfig::default()).unwrap();
//! let v = approx.value.evaluate(states.center(0)).unwrap();
//! assert!((v - exact.values.0[0]).abs() < 0.1);
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod fem;
pub mod flowfield;
pub mod mdp;
pub mod policy_iter;
pub mod simulator;
pub mod sparse;
pub mod taylor_pde;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
