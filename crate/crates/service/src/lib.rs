//! Persistent store, HTTP feedback sessions and the `elixir` command line on
//! top of `elixir-core`.

pub mod api;
pub mod cli;
pub mod error;
pub mod state;
pub mod store;

pub use error::{ServiceError, ServiceResult};
