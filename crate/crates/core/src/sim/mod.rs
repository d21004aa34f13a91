//! Deterministic discrete-time simulation of requesters, providers and
//! recommenders exchanging requests, offers and recommendations.
//!
//! Time advances in integer ticks. Within a tick, episodes run in requester
//! id order and every request/offer round completes before the next episode
//! starts. Each entity draws from its own seeded random stream.

mod behavior;
mod config;
mod engine;
mod metrics;

pub use behavior::BehaviorModel;
pub use config::{
    AttributeSpec, CapabilityConfig, ContextUpdate, EntityConfig, EpisodeConfig, Role,
    ScenarioConfig, SeedInteraction, ServiceTypeConfig, OVERRIDE_KEYS,
};
pub use engine::{run, Agent, ContactTrace, World};
pub use metrics::{MetricsLog, MetricsRow, Outcome, CSV_HEADER};
