//! Reduced-order models for `du/dt = R(u)`: Galerkin, adjoint Petrov-Galerkin (APG)
//! and least-squares Petrov-Galerkin (LSPG), with gappy-POD hyper-reduction and
//! verification tools for linear systems.

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hyper;
pub mod io;
pub mod linalg;
pub mod rom;
pub mod timeint;

pub use error::{Result, RomError};
