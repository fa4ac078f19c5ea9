//! Discontinuous Galerkin time stepping for ODE-constrained optimal control.
//!
//! States, adjoints and controls are piecewise polynomials of degree `r` on a
//! partition of `[0, T]` (modal Legendre basis per interval). The reduced cost
//! `j_h(u)` is differentiated through the discrete adjoint, and the resulting
//! gradient drives a box-constrained optimizer.
//!
//! ```
//! use dgocp::{builtin::LinearLq, ivp::Discretization, optimize::{minimize, OptimizeOptions}};
//! use dgocp::control::ControlFunction;
//!
//! let disc = Discretization::uniform(1.0, 10, 1).unwrap();
//! let u0 = ControlFunction::closed(1, |_| vec![0.0]);
//! let rep = minimize(&LinearLq, &u0, &disc, 1, &OptimizeOptions::default()).unwrap();
//! assert!(rep.converged);
//! ```

pub mod basis;
pub mod builtin;
pub mod cli;
pub mod control;
pub mod convergence;
pub mod error;
pub mod ivp;
pub mod mesh;
pub mod optimize;
pub mod problem;
pub mod reduced;
pub mod verify;

pub use error::{Error, Result};
