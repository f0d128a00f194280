//! Numerics for piecewise-continuous functions whose discontinuities sit on
//! the integers: lattice representation, extensions of sequences, recurrence
//! and continuity diagnostics, convolution operators, and solvers for linear
//! differential equations with piecewise constant argument.

pub mod demo;
pub mod depca;
pub mod diagnostics;
pub mod error;
pub mod extension;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod quadrature;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{AaSequence, ClosedPieces, GridFunction, NormReport, Polynomial, Window};
