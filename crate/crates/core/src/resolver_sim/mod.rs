//! Executable model of three ways a device's query can be resolved: classic
//! geo DNS by resolver address, a resolver that adds the client's subnet, and a
//! device that puts its user-defined region into the client subnet itself.

mod authoritative;
mod cache;
mod resolver;
mod scenario;
mod transport;

use thiserror::Error;

use crate::dns_wire::WireError;
use crate::geo_zone::{RegionError, ZoneError};

pub use authoritative::AuthoritativeServer;
pub use cache::{Cache, CacheEntry};
pub use resolver::{Resolution, ResolverPolicy, ResolverState, DEFAULT_REWRITE_PREFIX_LEN};
pub use scenario::{
    run_scenario, stub_query, Architecture, DeviceConfig, Hop, Role, Scenario, ScenarioOptions,
    ScenarioTranscript, TRANSCRIPT_HEADER,
};
pub use transport::{InProcess, UdpAuthoritative, UdpUpstream, Upstream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("{0}")]
    Io(String),
}
