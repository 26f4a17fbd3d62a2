//! De Finetti mixing measures on (-1, 1): potentials, normalization,
//! moments, sampling, and Laplace asymptotics of the moments.

mod laplace;
mod measure;
mod potential;

pub use laplace::{
    find_minimum, laplace_abs_moment_asymptotic, laplace_integral, laplace_moment_asymptotic,
    magnetization, LaplaceExpansion, CURVATURE_THRESHOLD,
};
pub use measure::{DeFinettiMeasure, MixingDensity, CDF_TABLE_NODES};
pub use potential::{check_potential, curie_weiss_potential, CurieWeiss, FnPotential, Potential};
