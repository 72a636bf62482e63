//! Sparse storage, envelope Cholesky and the symmetric-pencil eigensolvers.

pub mod cholesky;
pub mod eigen;
pub mod sparse;

pub use cholesky::EnvelopeCholesky;
pub use eigen::{eigenpairs_through, lowest_eigenpairs, Backend, EigenOptions, EigenPairs, DENSE_CUTOFF};
pub use sparse::{CsrMatrix, TripletBuilder};
