//! Numerical core for `backflow-lab`.
//!
//! All quantities inside this crate are expressed in an internal unit system
//! (micrometre, microsecond, particle mass), see [`corenum::UnitSystem`].
pub mod backflow;
pub mod corenum;
pub mod error;
pub mod optimizer;
pub mod phasespace;
pub mod states;
pub mod transport;

pub use error::{Error, Result};
