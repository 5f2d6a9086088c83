//! Dense linear algebra on small and medium matrices stored in panel-major
//! format, with register-blocked kernels and the factorizations used by
//! embedded optimization solvers.

pub mod apps;
pub mod error;
pub mod kernels;
pub mod level12;
pub mod level3;
pub mod matstore;
pub mod pack;
mod raw;
pub mod ref_impl;

pub use error::{Error, Result};
pub use matstore::{ColMatrix, DenseVector, PanelMatrix, SubMut, SubRef, ALIGN, PS};
