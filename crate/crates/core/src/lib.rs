//! Numerical laboratory for the one-phase p-Laplacian phase-transition
//! energy: discrete energies and residuals, the trivial, minimizing and
//! mountain-pass steady states, the parabolic gradient flow, and sweeps of
//! the boundary datum that locate the bifurcation threshold.

pub mod bifurcation;
pub mod cli;
pub mod config;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod stationary;
pub mod verify;


pub use grid::{Field, Grid, GridError};
pub use model::{EnergyBreakdown, PhaseProfile, ProblemSpec};
