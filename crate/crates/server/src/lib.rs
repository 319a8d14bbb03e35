//! Local service driving proofpad sessions for a browser UI.
//!
//! Clients connect over WebSocket, send JSON requests and receive replies and
//! events. Plain HTTP requests on the same port get static assets.

pub mod assets;
pub mod controller;
pub mod protocol;
pub mod service;

pub use controller::{BackendChoice, Controller, Registry};
pub use protocol::{Event, Request, ServerMessage, Snapshot};
pub use service::{ServeConfig, ServeError, Server};
