//! File formats and command-line front end for `lintra-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod model_store;
pub mod report;
pub mod sidecar;

pub use error::{Error, Result};
