//! Context-based trust management for pervasive service selection.
//!
//! The crate has two halves. The engine ([`trust`], [`fuzzy`], [`store`],
//! [`provider`], [`requester`]) implements how requesters pick providers:
//! fuzzy multi-attribute scoring blended with a trust value. That trust
//! value mixes time-decayed direct experience with recommender-weighted
//! indirect trust. Providers gate requests through a privacy agent.
//! The [`sim`] module runs seeded multi-entity scenarios over the engine
//! and logs trust trajectories.

pub mod error;
pub mod fuzzy;
pub mod provider;
pub mod requester;
pub mod sim;
pub mod store;
pub mod trust;
pub mod types;

pub use error::{Result, TrustError};
pub use types::{ContextDescriptor, EntityId, ServiceTypeId, Tick, TrustValue};
