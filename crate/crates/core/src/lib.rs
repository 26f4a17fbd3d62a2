//! Random symmetric spin matrices with exchangeable entries.
//!
//! The crate samples Curie-Weiss and generalized de Finetti ensembles,
//! computes their spectra, and provides exact combinatorial and quadrature
//! references for the moment method.

pub mod circuits;
pub mod correlations;
pub mod definetti;
pub mod ensembles;
pub mod quadrature;
pub mod spectral;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
