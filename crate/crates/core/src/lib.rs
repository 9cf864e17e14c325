//! Trigger-action bot components for forge automation, and a reference bot covering the
//! pull-request lifecycle: CI mirroring and reporting, comment commands, policy-checked
//! merging, stale-PR closure and backport tracking.
//!
//! Workflows are built from three kinds of components:
//! - event triggers ([`components::triggers`]) select the webhook or scheduler events a
//!   workflow reacts to,
//! - state triggers ([`components::state`] and the [`gateway::ForgeGateway`] queries) gather
//!   the data needed to decide,
//! - actions ([`action::ActionKind`]) are the state-changing requests the bot sends.

pub mod action;
pub mod api;
pub mod components;
pub mod config;
pub mod conformance;
pub mod engine;
pub mod error;
pub mod gateway;
pub mod model;
pub mod workflows;

pub use action::{Action, ActionKind, ActionOutcome, MirrorTarget};
pub use config::{BotConfig, ConfigError, RepoConfig};
pub use engine::{DispatchReport, Engine, Plan, Registry, Workflow};
pub use error::{GatewayError, ModelError};
pub use gateway::{ForgeGateway, GatewayExt};
