//! Energy and volume of unit vector fields on spherical caps of S³.
//!
//! Hopf fields (left translations by unit imaginary quaternions) minimize both
//! functionals among unit fields that agree with them on the boundary of a
//! cap. This crate evaluates the functionals by quadrature, with exact
//! derivatives from dual numbers, and checks each identity and inequality of
//! that statement numerically.

pub mod calculus;
pub mod dual;
pub mod error;
pub mod fields;
pub mod functionals;
pub mod geom;
pub mod phimap;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
