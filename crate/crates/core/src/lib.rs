//! Horizontal p-Poisson problems for Hormander frames of vector fields, their
//! p -> infinity limits, Carnot-Caratheodory distance fields, and numerical
//! checks of the limit statements on uniform grids.

pub mod cli;
pub mod differential;
pub mod eikonal;
pub mod error;
pub mod expr;
pub mod frames;
pub mod grid;
pub mod limits;
pub mod ppoisson;
pub mod sparse;
pub mod stencil;
pub mod verify;
pub mod viscosity;

pub use error::{Error, Result};
pub use frames::{BoxDomain, Frame};
pub use grid::{Grid, HorizontalField, ScalarField};
