pub mod cli;
pub mod config;
pub mod conflict;
pub mod control;
pub mod error;
pub mod expectations;
pub mod optimizers;
pub mod utility;

pub use error::{Error, Result};
