//! Truncated Fock-space simulator for a cavity mode quadratically coupled to a
//! mechanical oscillator.
//!
//! After displacing the cavity field by its mean value and squeezing the
//! mechanics, the driven quadratic model behaves like ordinary linear
//! optomechanics with the optical and mechanical roles exchanged. This crate
//! propagates the Hamiltonians involved in a truncated two-mode Fock space
//! and measures how closely the exact displaced-squeezed dynamics follow the
//! effective "mechano-optical" Hamiltonian.
//!
//! Units: `ħ = 1`, so every Hamiltonian is an angular-frequency matrix.
//! Joint states are indexed mode-a-major: `|j⟩_a ⊗ |k⟩_b ↦ j·n_b + k`.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; all IO lives in the companion `mech-sim` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytic;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod quad;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, ModeSpace, Operator, PureState, SpaceTag};
pub use num_complex::Complex64;
