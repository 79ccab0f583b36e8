//! Heat-diffusion simulation and boundary-data reconstruction of inclusion
//! geometry.
//!
//! The crate simulates the Neumann problem for ∂_t u = ∇·γ∇u on a 2D body
//! with unknown inclusions, and recovers the convex hull of the inclusions
//! from boundary measurements alone: exponentially growing probe solutions
//! of ∇·γ₀∇v = τv are paired with the data in a boundary functional whose
//! log-magnitude grows like twice the support function of the inclusion set,
//! so a slope fit over a τ-schedule yields one support value per direction
//! and a half-plane intersection yields the hull.
//!
//! Modules:
//! - [`grid`] / [`conductivity`]: domain, mesh and coefficient models;
//! - [`solver`] / [`forward`]: implicit finite-volume heat solver;
//! - [`probes`]: explicit exponential probe families and time profiles;
//! - [`cgo`]: probe construction for non-constant backgrounds via the
//!   Faddeev Green function and a Neumann-series fixed point;
//! - [`indicator`]: the boundary indicator functional and slope extraction;
//! - [`reconstruct`]: direction sweeps and convex-hull assembly;
//! - [`config`] / [`dataset_io`] / [`report`]: CLI-facing I/O.

pub mod config;
pub mod conductivity;
pub mod dataset_io;
pub mod error;
pub mod forward;
pub mod geom;
pub mod grid;
pub mod indicator;
pub mod noise;
pub mod probes;
pub mod reconstruct;
pub mod report;
pub mod solver;
pub mod svg;

pub mod cgo;

pub use error::{Error, Result};
