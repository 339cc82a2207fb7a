use thiserror::Error;

use crate::protocol::ElectionStatus;

/// Errors raised by the per-vehicle state machine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("received nil request")]
    NilRequest,
    #[error("not enough vehicles to start a voting cycle")]
    NotEnoughVehicles,
    #[error("operation requires {expected:?} but vehicle is {actual:?}")]
    IllegalState {
        expected: ElectionStatus,
        actual: ElectionStatus,
    },
}

/// Errors from the intersection geometry and quorum arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("unsupported lane count {0} (expected 2, 4, 6 or 8)")]
    InvalidLanes(u32),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Errors from the simulated transport and the wire codec.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("source and destination are the same vehicle")]
    SelfSend,
    #[error("frame error: {0}")]
    Frame(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Errors from the agent layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("duplicate plate {0}")]
    DuplicatePlate(String),
    #[error("empty plate list")]
    NoPlates,
    #[error("event addressed to {addressed} delivered to {agent}")]
    Misrouted { addressed: u32, agent: u32 },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A scenario configuration value was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid value for `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}
