pub mod error;
pub mod geometry;
pub mod chain;
pub mod induced;
pub mod observables;
pub mod martingale;
pub mod seed;
pub mod stats;
pub mod constants;

pub use error::{Error, Result};
pub mod config;
pub mod experiment;
pub mod acceptance;
