pub mod config;
pub mod debias;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gipe;
pub mod kbc;
pub mod linalg;
pub mod neighbours;

pub use error::{Error, Result};
