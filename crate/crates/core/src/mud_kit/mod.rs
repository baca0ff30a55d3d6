//! MUD allowlists: generation from observed domains, unification across
//! locations, and folding of regional domain variants into one canonical
//! name once the network can tell regions apart by client subnet.

mod ace;
mod groups;
mod json;
mod ops;

use thiserror::Error;

pub use ace::{Ace, AceTuple, Action, Direction, Endpoint, MacAddr, MudFile, Port, Protocol};
pub use groups::{groups_to_toml, load_groups, parse_groups, RegionDomainGroup};
pub use json::{parse_mud, serialize_mud};
pub use ops::{
    compare_sweep, default_mud_url, domain_count, ecs_collapse, excess_ratio, generate_mud,
    reduction_ratio, suggest_groups, sweep_csv, unify, AceTemplate, CollapseReport, SweepRow,
    DEFAULT_REGION_ALIASES,
};

#[derive(Debug, Error)]
pub enum MudError {
    #[error("invalid ACE: {0}")]
    InvalidAce(String),
    #[error("invalid region group: {0}")]
    InvalidGroup(String),
    #[error("cannot build a MUD file from an empty domain set")]
    EmptyDomainSet,
    #[error("no MUD files given")]
    NoInput,
    #[error("MUD files belong to different devices: {0:?} and {1:?}")]
    MixedDevices(String, String),
    #[error("ratio undefined: unified has {unified} domains, ECS has {ecs}")]
    DivisionGuard { unified: u64, ecs: u64 },
    #[error("ECS file has more domains ({ecs}) than the unified file ({unified})")]
    NotAReduction { unified: u64, ecs: u64 },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Io(String),
}
