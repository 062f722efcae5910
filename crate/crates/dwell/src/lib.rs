//! Numerical toolkit for the two-mode bound-state problem of a 1-D
//! double-well Schrödinger operator and the quintic focusing NLS built on
//! top of it: linear spectral pairs, interaction integrals, nonlinear
//! ground-state branches through the symmetry-breaking point, linearization
//! spectra, the reduced two-mode dynamics, and full split-step evolution.

pub mod branch;
pub mod error;
pub mod fdsim;
pub mod grid;
pub mod hypotheses;
pub mod linstab;
pub mod nlssim;
pub mod operator;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{build_grid, GradedGrid, Grid, Mesh};
pub use hypotheses::{h4_report, inner_product, H4Report};
pub use potential::{make_potential, Potential, PotentialKind};
pub use spectral::{discretize, lowest_eigenpairs, spectral_pair, SpectralPair};
