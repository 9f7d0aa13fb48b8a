//! Discrete de Rham complexes on voxel domains, generalized Helmholtz decompositions,
//! Schur-complement block algebra and homogenisation experiments for electrostatics.

pub mod error;
pub mod linalg;
pub mod operator;
pub mod derham;
pub mod block_schur;
pub mod coeff;
pub mod electro;
pub mod schur_grid;
pub mod lab;

pub use error::{Error, Result};
