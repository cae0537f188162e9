//! Session runtime: JSONL event logs, live and synthetic control sources,
//! the websocket server, replay and reporting.

pub mod analysis;
pub mod config;
pub mod error;
pub mod log;
pub mod replay;
pub mod report;
pub mod server;
pub mod session;
pub mod source;

pub use error::{Result, ServiceError};
