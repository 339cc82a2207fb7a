//! Voting-based right-of-way for vehicles entering an unsignalized
//! intersection at the same time, with a deterministic simulator around it.

pub mod agents;
pub mod codec;
pub mod engine;
pub mod error;
pub mod explore;
pub mod geometry;
pub mod net;
pub mod protocol;
pub mod quorum;
pub mod report;
pub mod scenario;
pub mod suites;

/// Simulated time and durations, in microseconds.
pub type Micros = u64;

pub use error::{AgentError, ConfigError, GeometryError, NetError, ProtocolError};
pub use geometry::{Approach, IntersectionGeometry, Movement, PathDirection};
pub use protocol::{Address, ElectionStatus, ProtocolMessage, VehicleInfo};
pub use quorum::{quorum, Quorum, QuorumRule};
pub use scenario::{run_batch, run_replicates, run_scenario, CycleMetrics, DecisionMode, ScenarioConfig, ScenarioResult};
