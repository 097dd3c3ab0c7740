//! File formats, the refinement HTTP service and the command line around
//! `evontology-core`.

pub mod cli;
pub mod io;
pub mod server;
