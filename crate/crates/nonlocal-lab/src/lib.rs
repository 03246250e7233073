//! Numerical laboratory for non-local functionals on grid Sobolev spaces.
//!
//! The crate discretizes energies of the form
//!
//! ```text
//! F(u) = ∬ f(u(x), u(y)) dμ(x,y)      (non-local, μ a finite measure on Ω×Ω)
//! G(u) = ∫ g(x, ∇u(x)) dx             (local, p-growth integrand)
//! ```
//!
//! on uniform grids over Ω = (0,1)^d (d ∈ {1,2}) with zero boundary values, and provides
//!
//! - the discrete `W^{1,p}_0` machinery: gradients, norms, truncation, dual norms, capacity
//!   ([`grid`], [`duality`]);
//! - finite pair measures on Ω×Ω in cell-density / atom-list / product-of-marginals form,
//!   their weighted marginals, and double-integral quadrature ([`measures`]);
//! - the Sobolev cut norm of a pair measure, computed three ways with mutual certification,
//!   plus the classical graphon cut norm ([`cut_norm`]);
//! - integrand families with structural-condition checkers, energy gradients, and a
//!   multi-start descent solver ([`integrands`], [`energy`]);
//! - scripted measure/energy sequences and convergence experiments for continuity,
//!   semicontinuity, Γ-convergence and Mosco diagnostics ([`families`], [`experiments`]);
//! - a JSON-config driven runner emitting machine-readable reports ([`config`], [`runner`]).
//!
//! Every operation is a pure function of its inputs; randomized routines take explicit seeds
//! and are deterministic given them. See the `examples/` directory for one runnable example
//! per capability.

pub mod config;
pub mod cut_norm;
pub mod duality;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod families;
pub mod grid;
pub mod integrands;
pub mod measures;
pub mod runner;
pub mod sampling;
pub mod spectral;

pub use error::LabError;
pub use grid::{gradient, make_grid, sobolev_norm, truncate, EdgeField, Grid, GridFunction};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, LabError>;
