//! Certified L2 convergence envelopes for weakly confined kinetic Langevin
//! dynamics, plus a d = 1 verification solver.
//!
//! The crate is organized bottom-up:
//! - [`num`], [`quad`]: scalar numerics and adaptive quadrature;
//! - [`model`]: potentials, equilibrium measures, functional-inequality
//!   constants with their provenance;
//! - [`constants`]: the explicit space-time averaging constants;
//! - [`weakpi`]: weak-inequality rate functions, Legendre transforms, and
//!   the decay-envelope calculus;
//! - [`rates`]: certificate assembly and exponent classification;
//! - [`solver`]: finite-volume kinetic solver and particle simulation used
//!   to verify the certificates.

pub mod constants;
pub mod model;
pub mod num;
pub mod quad;
pub mod rates;
pub mod solver;
pub mod weakpi;
