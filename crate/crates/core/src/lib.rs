//! Hybridizable discontinuous Galerkin (HDG) discretization of the heat
//! equation on simplicial meshes of the unit square and cube, together with
//! the HDG-POD reduced order model built from three weighted proper
//! orthogonal decompositions (flux, scalar, numerical trace).
//!
//! The pipeline is
//! [`mesh`] → [`space`] → [`assembly`] → [`fom`] (snapshots) → [`pod`] →
//! [`rom`], with [`analysis`] providing the error norms and the
//! verification battery, and [`cli`] tying it together.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod fom;
pub mod linalg;
pub mod mesh;
pub mod pod;
pub mod rom;
pub mod space;

pub use error::{Error, Result};
