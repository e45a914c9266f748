pub mod circuit;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod models;
pub mod open_systems;
pub mod spectra;

pub use error::{Error, Result};
