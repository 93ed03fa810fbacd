pub mod atom;
pub mod cli;
pub mod coulomb;
pub mod error;
pub mod fourier;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod planewave;
pub mod quad;
pub mod scf;
pub mod dissociation;
pub mod special;
pub mod tightbinding;

pub use error::{Error, Result};
