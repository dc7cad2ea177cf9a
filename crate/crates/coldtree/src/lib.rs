//! Files, configuration and commands around `coldtree-core`.

pub mod commands;
pub mod config;
pub mod io;

pub use config::Config;
pub use io::Dataset;
