//! Finite-element simulation of narrow inextensible elastic ribbons.
//!
//! A ribbon is modeled by an arclength centerline y and an in-plane director
//! b forming an orthonormal frame with d = y' x b. Stationary low-energy
//! configurations are computed by a decoupled, constraint-linearized
//! discrete gradient flow on a regularized, penalized form of the corrected
//! Sadowsky energy, discretized with C^1 cubic Hermite elements for y and
//! continuous piecewise linear elements for b. All integrals are evaluated
//! exactly, the nodal unit-length constraints are linearized per step and
//! enforced through Lagrange multipliers, and the energy is monitored with
//! a full component breakdown at every iteration.

pub mod band;
pub mod config;
pub mod driver;
pub mod energy;
pub mod error;
pub mod fe;
pub mod flow;
pub mod frames;
pub mod mesh;
pub mod output;
pub mod quadrature;
pub mod saddle;
pub mod vec3;
pub mod verify;

pub use config::{Preset, RunConfig};
pub use energy::{bend_twist, energy_quad, EnergyBreakdown, RegParams};
pub use error::{Error, Result};
pub use fe::{
    assemble_matrices, interpolate_hermite, interpolate_nodal, FEMatrices, HermiteField, NodalField,
};
pub use flow::{
    b_step, dt_norms, run_flow, y_step, FlowDriver, FlowParams, FlowSummary, MonotonicityGuard,
    StepBudget, StepReport,
};
pub use frames::{
    discretize_initial, helix_initial, moebius_initial, rotated_director, BoundaryConditions,
    FrameState,
};
pub use mesh::Mesh;
pub use saddle::{eliminate_fixed_dofs, solve_saddle, SaddleSolution, SaddleSystem};
