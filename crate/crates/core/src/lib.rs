//! Boundary values of complex-geometric spherical functions on de Sitter
//! space.
//!
//! The crate covers Lorentzian geometry on the de Sitter quadric and its
//! crown, a complex Gauss hypergeometric engine with boundary values on the
//! cut, one-dimensional model distributions, boundary-value kernels paired
//! with test functions, and wavefront-set predictions with numerical probes.

pub mod dist1d;
pub mod error;
pub mod fixtures;
pub mod hyp2f1;
pub mod kernels;
pub mod lorentz;
pub mod oracle;
pub mod quad;
pub mod special;
pub mod verify;
pub mod wavefront;

pub use error::{CrownError, Result};
pub use num_complex::Complex64;

/// `f64` instances of the generic geometry types.
pub type RealPoint = lorentz::RealPoint<f64>;
pub type ComplexPoint = lorentz::ComplexPoint<f64>;
pub type DeSitterPoint = lorentz::DeSitterPoint<f64>;
pub type TangentVector = lorentz::TangentVector<f64>;
pub type CrownPoint = lorentz::CrownPoint<f64>;
pub type Isometry = lorentz::Isometry<f64>;
pub type Chart = lorentz::Chart<f64>;
