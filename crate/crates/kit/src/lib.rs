//! File formats, external-service clients and the command-line front end
//! for `bright-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod hicodet;
pub mod http_ports;
pub mod io;

pub use error::{KitError, KitResult};
