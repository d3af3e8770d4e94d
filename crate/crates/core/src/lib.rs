//! Age of information and maximal leakage of slotted status-update servers.
//!
//! A source emits Bernoulli(λ) updates to a server, which forwards them to a
//! monitor under one of three policies:
//!
//! - **MBT**: FCFS queue, Bernoulli(α) admission, head-of-line sent w.p. μ.
//! - **DAD**: keeps the freshest update and dumps it every τ slots.
//! - **RAD**: keeps the freshest update and sends it each slot w.p. μ.
//!
//! The departure sequence leaks timing information about arrivals. This
//! crate computes that leakage exactly (by enumeration) and in closed form,
//! computes the average age at the monitor in closed form and by
//! simulation, and produces age/leakage trade-off datasets.

pub mod age;
pub mod cli;
mod error;
pub mod leakage;
pub mod model;
pub mod policies;
pub mod record;
pub mod sim;
pub mod tradeoff;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BitSeq, PolicyKind, PolicyParams, PolicySpec, RngStream, ServerPolicy, StreamRole};
