//! Hybrid high-order discretisation of 2D diffusion problems on meshes whose
//! faces are exact curves (segments, circular and elliptic arcs).

// `!(x > y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod hho;
pub mod meshgen;
pub mod quadrature;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
