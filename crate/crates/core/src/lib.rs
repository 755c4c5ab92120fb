//! Optimal markups for a two-currency price-aware automated market maker.
//!
//! The crate is organised around the pipeline
//! model parameters → Hamiltonian coefficients → value-function solvers →
//! quotes → Monte Carlo verification.

pub mod config;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod pide;
pub mod quoting;
pub mod riccati;
pub mod simulator;
pub mod surface;

pub use error::{Error, Result, ValidationError};
pub use model::*;
pub use grid::StateGrid1D;
pub use surface::{SurfaceKind, ValueSurface};
pub use pide::ThetaGrid;
pub use quoting::QuotePolicy;
