pub mod circular;
pub mod error;
pub mod fem2d;
pub mod mapping;
pub mod rect;
pub mod specfun;
pub mod spectral1d;

pub use error::{Error, Result};
