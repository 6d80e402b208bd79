//! Dashboard snapshots: a spec language for components and snapshots, evaluation over
//! CSV-backed tables, template rendering, the update lifecycle and a simulated
//! threaded collaboration platform that hosts them.

pub mod data;
pub mod lifecycle;
pub mod model;
pub mod platform;
pub mod scenario;
pub mod spec_io;
pub mod store;
pub mod template;
pub mod workspace;
