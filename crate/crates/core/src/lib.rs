//! A finite-precision laboratory for (phi, Gamma)-modules over the cyclotomic
//! Laurent series ring, their Herr cohomology, the `psi` operator and its
//! Iwasawa-theoretic companions, and the Witt-vector side of the tilt.

pub mod cyclo;
pub mod error;
pub mod herr;
pub mod iwasawa;
pub mod laurent;
pub mod module;
pub mod padic;
pub mod par;
pub mod perf;
pub mod snf;
pub mod witt;

pub use error::{Error, Result};
