//! Discrete spectral geometry toolkit.
//!
//! The crate discretizes weighted Laplace, Schrödinger and Steklov eigenvalue
//! problems on small closed manifolds and on the unit disk, computes
//! sphere-valued harmonic maps (directly and through a Ginzburg–Landau
//! relaxation) together with their Morse and spectral indices, and maximizes
//! `λ₁(β)∫β` over densities. The optimal densities are energy densities of
//! harmonic maps, which the [`optimize`] module checks numerically.
//!
//! Module map:
//! - [`domain`]: meshes, quadratic forms, Dirichlet energy and energy density.
//! - [`spectral`]: eigenproblems, negative-eigenvalue counts, `P_m` membership.
//! - [`harmonic`]: harmonic maps, Ginzburg–Landau descent, indices.
//! - [`optimize`]: density optimization, Möbius balancing, certified bounds.
//! - [`io`]: OFF meshes, spectra and trace CSVs, map and density checkpoints.
//! - [`verify`]: the acceptance checks shared by the test suite and the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod spectral;
pub mod verify;

pub use domain::{DiscreteManifold, ScalarField, VectorField};
pub use error::{Error, Result};
