//! Exact positivity analysis of explicit Runge-Kutta methods applied to
//! method-of-lines semi-discretizations `u_k' = q_k(u, t) * sum_j c_j u_{k-j}`.
//!
//! The crate is organised bottom-up:
//!
//! * [`tableau`]: exact Butcher tableaux and the standard parametric families.
//! * [`multilinear`]: sparse multilinear polynomials and hypercube vertex
//!   restrictions.
//! * [`polygen`]: propagation polynomials `P_i` for a tableau and a stencil.
//! * [`roots`]: exact univariate root isolation used to locate sign changes.
//! * [`gamma`]: the positivity step-size coefficient with certificates.
//! * [`bounds`]: stability polynomial, threshold factor and SSP coefficient.
//! * [`molsim`]: a direct method-of-lines simulator with limiter-based `q`.
//! * [`adversary`]: executable counterexample constructions.

pub mod adversary;
pub mod bounds;
pub mod error;
pub mod gamma;
pub mod molsim;
pub mod multilinear;
pub mod polygen;
pub mod rational;
pub mod roots;
pub mod tableau;

pub use error::{Error, Result};
pub use rational::Q;
