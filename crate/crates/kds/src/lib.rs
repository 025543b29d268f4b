//! File formats, configuration, reference oracles, verification suites and
//! the command-line driver built on `kds-core`.

pub mod config;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod suites;
pub mod bench;
pub mod cli;
pub mod plot;
