//! Optimal boundary finite-difference stencils for the 1D wave equation,
//! identified by variational data assimilation.
//!
//! The forward model ([`wave`]) integrates `u_t = p_x`, `p_t = u_x` on a
//! staggered grid whose derivative stencils at the rows next to each
//! boundary are free coefficients. [`adjoint`] differentiates the discrete
//! model with respect to those coefficients, [`objective`] turns the misfit
//! to exact solutions ([`exact`]) into a cost and gradient, and
//! [`minimize`] fits the coefficients with L-BFGS. [`analysis`] holds the
//! closed-form dispersion theory the fitted coefficients are checked
//! against.

pub mod adjoint;
pub mod analysis;
pub mod error;
pub mod exact;
pub mod grid;
pub mod minimize;
pub mod objective;
pub mod scheme;
pub mod wave;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use scheme::{BoundaryScheme, CoefficientGroup, ControlLayout, ControlVector, InteriorStencil};
pub use wave::{State, Trajectory};
