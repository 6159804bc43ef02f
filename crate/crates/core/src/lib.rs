//! First- and second-order Melnikov analysis for planar piecewise-linear
//! differential systems with two zones separated by the cubic `y = x^3`,
//! together with the exact polynomial machinery (Sturm sequences, Wronskians,
//! Chebyshev-system classification) and an event-detecting ODE verifier that
//! confirms the predicted limit cycles by direct integration.
//!
//! Layout:
//! - [`model`]: the 24-parameter perturbation family and its polar Fourier form
//! - [`geometry`]: the switching angle `theta1(r)` of the cubic and the
//!   `x <-> r` identities
//! - [`melnikov`]: the generic `Delta1`/`Delta2` quadrature engine for periodic
//!   nonsmooth systems (including the jump-geometry term `f2*`) and the
//!   closed-form coefficient maps gamma/delta/mu/eta/lambda
//! - [`chebyshev`]: exact rational polynomials, root counting and isolation,
//!   Wronskians, ECT classification
//! - [`flow`]: Cartesian integration with event detection on `y = x^3`,
//!   Poincare return map, cycle location and convergence studies
//!
//! Coefficient convention: the `a`/`b` blocks are the x- and y-components of
//! the perturbation in the zone `y >= x^3`, the `alpha`/`beta` blocks the same
//! in `y <= x^3`. This is the convention under which all closed-form tables
//! are exact; see `gamma_coeffs` for the first-order map.

pub mod chebyshev;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod melnikov;
pub mod model;
pub mod quadrature;

pub use error::{Error, Result};
