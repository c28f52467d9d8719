//! Non-intrusive model order reduction toolkit.
//!
//! The crate bundles the building blocks of a data-driven design pipeline:
//! free-form deformation of triangulated geometry, active-subspace parameter
//! reduction, dynamic mode decomposition for temporal prediction, proper
//! orthogonal decomposition with interpolation for parametric surrogates, and
//! a derivative-free optimization loop driven by those surrogates over a
//! persisted snapshot database. Built-in desk-scale PDE testbeds make the
//! whole pipeline runnable without an external solver.

pub mod activesubspace;
pub mod dmd;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod pipeline;
pub mod podi;
pub mod testbeds;

pub use error::{Error, Result};
