pub mod dsl;
pub mod error;
pub mod gdsm;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod maps;
pub mod rng;
pub mod singular;

pub use error::{Error, Result};
