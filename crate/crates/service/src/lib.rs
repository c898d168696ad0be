//! Networked session host: one append-only event log per group, an HTTP
//! request API, and a server-sent event push channel.

pub mod api;
pub mod app;
pub mod clock;
pub mod drive;
pub mod host;
pub mod push;

pub use api::{router, spawn_ticker, ApiError};
pub use app::App;
pub use clock::{Clock, ManualClock, SystemClock};
pub use host::{HostError, HostView, SessionHost};
