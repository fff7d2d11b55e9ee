//! Numerics for double-polygon multi-bump solutions of `-Δu + V(|y|)u = u^p`.
//!
//! The pieces, bottom up: the radial ground state [`ground_state`], its
//! linearized spectrum [`spectral`], the scalar integrals built from it
//! [`quadrature`], bump configurations [`configuration`], the reduced energy
//! and its critical points [`reduced_energy`], and direct quadrature of the
//! full energy functional [`field_energy`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod configuration;
pub mod error;
pub mod field_energy;
pub mod ground_state;
pub mod integrate;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod reduced_energy;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use ground_state::{
    decay_constant, eval_du, eval_u, solve_ground_state, solve_ground_state_cached, GroundStateProfile,
};
