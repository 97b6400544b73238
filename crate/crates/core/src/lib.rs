pub mod carving;
pub mod catalog;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod mask;
pub mod num;
pub mod overlay;
pub mod propagation;
pub mod proposals;
pub mod shapes;
pub mod sim;

pub use error::{Error, ErrorCategory, Result};
