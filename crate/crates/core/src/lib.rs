//! Geo-aware DNS with EDNS Client Subnet carrying a device's user-defined
//! location, plus the traffic and MUD tooling used to evaluate it.

pub mod cli;
pub mod dns_wire;
pub mod fixtures;
pub mod geo_zone;
pub mod mud_kit;
pub mod prefix;
pub mod resolver_sim;
pub mod traffic_analysis;
