//! Identifiers, the trust scalar and context descriptors shared by every module.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};

/// Simulation time. Non-negative and integral.
pub type Tick = u64;

/// Identifier of an entity (requester, provider, recommender) in the environment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Identifier of a service type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceTypeId(pub String);

impl ServiceTypeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ServiceTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ServiceTypeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A trust value in `[-1, +1]`.
///
/// Zero means "no information", positive values mean trustworthy and
/// negative values untrustworthy. The range is enforced at construction and
/// on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TrustValue(f64);

impl TrustValue {
    pub const ZERO: TrustValue = TrustValue(0.0);
    pub const MAX: TrustValue = TrustValue(1.0);
    pub const MIN: TrustValue = TrustValue(-1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(TrustError::OutOfRange(value))
        }
    }

    /// Saturates `value` into `[-1, +1]`. NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self::ZERO
        } else {
            Self(value.clamp(-1.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_trustworthy(self) -> bool {
        self.0 > 0.0
    }
}

impl TryFrom<f64> for TrustValue {
    type Error = TrustError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TrustValue> for f64 {
    fn from(t: TrustValue) -> f64 {
        t.0
    }
}

impl fmt::Display for TrustValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Named context measurements of an entity, e.g. `distance` in km or `delay` in ms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextDescriptor(pub BTreeMap<String, f64>);

impl ContextDescriptor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}
