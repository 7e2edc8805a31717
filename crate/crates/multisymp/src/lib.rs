//! Numerics for first-order variational problems in the covariant
//! Hamiltonian picture: the Legendre correspondence between velocities and
//! momenta on `Λ^n T*N`, Hamilton n-curve residuals on discrete field
//! configurations, pseudofiber geometry, and regularity/invariance tests,
//! with the classical closed-form examples built in as exact oracles.

pub mod dual;
pub mod exterior;
pub mod grassmann;
pub mod lagrangian;
pub mod hamilton;
pub mod legendre;
pub mod linalg;
pub mod observables;
