//! Review service: event-sourced store plus its HTTP routes.

pub mod http;
pub mod store;

pub use http::{router, serve};
pub use store::{Action, LogEvent, ReviewState, ReviewStore, ServiceError, StoredArgument};
