pub mod analytic;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod fock;
pub mod linalg;

pub use error::{Error, Result};
