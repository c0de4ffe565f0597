pub mod drl;
pub mod error;
pub mod grape;
pub mod io;
pub mod numerics;
pub mod qubit;
pub mod sta;

pub use error::{Error, Result};
