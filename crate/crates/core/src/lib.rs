pub mod cli;
pub mod debias;
pub mod design;
pub mod error;
pub mod inference;
pub mod simbench;
pub mod solver;
pub mod tree;

pub use error::{Error, Result};
