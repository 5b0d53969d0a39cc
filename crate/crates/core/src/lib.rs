//! Numerical machinery for maps that are monotone with respect to transport
//! costs `c(x, y) = h(x - y)`, where `h` is positively homogeneous of degree
//! `p >= 2` with a positive definite Hessian on the unit sphere.
//!
//! The crate is organised by subsystem:
//!
//! - [`cost`]: homogeneous cost functions, their derivatives and certified
//!   ellipticity constants.
//! - [`form`]: the averaged-Hessian matrix `A(x, y; xi, zeta)` and weight
//!   `Phi` computed by tensor Gauss-Legendre quadrature.
//! - [`map`]: finite multivalued maps with monotonicity, cyclic
//!   monotonicity, inversion, maximality and continuity diagnostics.
//! - [`angles`]: the scalar angle functions used to show that monotone maps
//!   are single valued almost everywhere, plus cone/ball geometry.
//! - [`rectify`]: local Lipschitz charts of c-monotone sets via a
//!   Cayley-type linear change of variables.
//! - [`transport`]: exact discrete assignment solvers and c-transform
//!   potentials used to generate cyclically monotone data.
//! - [`measure`]: push-forward measures on grids, additivity defects and
//!   density ratios.

pub mod angles;
pub mod cost;
mod error;
pub mod form;
pub mod linalg;
pub mod map;
pub mod measure;
pub mod quadrature;
pub mod rectify;
pub mod sampling;
pub mod transport;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
