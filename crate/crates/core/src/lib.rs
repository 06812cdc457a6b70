pub mod config;
pub mod control;
pub mod error;
pub mod io;
pub mod plant;
pub mod scenarios;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
