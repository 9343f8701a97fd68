//! Graphs satisfying a Weingarten relation `κ₂ = f(κ₁)`: relations, the
//! fully nonlinear jet operator, rotational ends, a finite-difference
//! Dirichlet solver and asymptotic fitting of computed ends.

pub mod asymfit;
pub mod fdsolver;
pub mod jetop;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod relation;
pub mod verify;
