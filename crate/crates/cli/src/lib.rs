//! HTTP service and command line over `dashsnap-core`.

pub mod api;
pub mod commands;
