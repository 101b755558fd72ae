//! Frenet geometry, tube metric, and Hermitian quantum operators for a
//! spin-zero particle confined to a parametric space curve.
//!
//! The pipeline is: parse component expressions ([`expr`]), reparametrize by
//! arc length and build the Frenet frame ([`curve`]), evaluate the tube
//! coordinates around the curve ([`tube`]), and discretize the on-curve
//! Hamiltonian, geometric momentum and force operators ([`operators`]).
//! [`helix`] carries closed-form results for the cylindrical helix.

pub mod app;
pub mod convergence;
pub mod curve;
pub mod expr;
pub mod helix;
pub mod operators;
pub mod quadrature;
pub mod tube;

pub use curve::{arclength_map, frenet_at, ArcLengthMap, CurveDefinition, CurveError, CurveKernel, FrenetSample};
pub use expr::{eval_jet, parse_expression, Expr, Jet4};
