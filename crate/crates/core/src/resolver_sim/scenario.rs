//! The three resolution architectures, run end to end with a transcript.

use std::fmt;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::dns_wire::{DnsMessage, EcsOption, Name, QType};
use crate::geo_zone::{load_zone, GeoZone, LocationPrefixMap, RegionCode};

use super::{AuthoritativeServer, InProcess, ResolverPolicy, ResolverState, SimError};

/// A device as the resolver sees it: where its IP places it, and where its
/// owner registered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceConfig {
    pub device_id: String,
    pub ip_based_location: RegionCode,
    pub user_defined_location: RegionCode,
    pub client_address: IpAddr,
}

/// Host offset used for device addresses when none is given.
const DEFAULT_DEVICE_HOST: u8 = 20;
const RESOLVER_HOST: u8 = 53;

fn host_in(map: &LocationPrefixMap, region: &RegionCode, host: u8) -> Result<IpAddr, SimError> {
    let prefix = map.region_to_prefix(region)?;
    Ok(match prefix.addr() {
        IpAddr::V4(a) => IpAddr::V4((u32::from(a) | u32::from(host)).into()),
        IpAddr::V6(a) => IpAddr::V6((u128::from(a) | u128::from(host)).into()),
    })
}

impl DeviceConfig {
    pub fn new(
        device_id: impl Into<String>,
        ip_based_location: RegionCode,
        user_defined_location: RegionCode,
        client_address: IpAddr,
        map: &LocationPrefixMap,
    ) -> Result<DeviceConfig, SimError> {
        let cfg = DeviceConfig {
            device_id: device_id.into(),
            ip_based_location,
            user_defined_location,
            client_address,
        };
        cfg.validate(map)?;
        Ok(cfg)
    }

    /// Device with a synthetic address inside its IP-based region's prefix.
    pub fn in_region(
        device_id: impl Into<String>,
        ip_based_location: RegionCode,
        user_defined_location: RegionCode,
        map: &LocationPrefixMap,
    ) -> Result<DeviceConfig, SimError> {
        let addr = host_in(map, &ip_based_location, DEFAULT_DEVICE_HOST)?;
        DeviceConfig::new(device_id, ip_based_location, user_defined_location, addr, map)
    }

    pub fn validate(&self, map: &LocationPrefixMap) -> Result<(), SimError> {
        let prefix = map.region_to_prefix(&self.ip_based_location)?;
        if !prefix.contains(&self.client_address) {
            return Err(SimError::InvalidConfig(format!(
                "device {} address {} is outside {} ({prefix})",
                self.device_id, self.client_address, self.ip_based_location
            )));
        }
        Ok(())
    }
}

/// Query id derived from the device and name so transcripts are reproducible.
fn stable_id(device: &str, qname: &Name) -> u16 {
    let mut h: u32 = 0x811c_9dc5;
    for b in device.bytes().chain([0]).chain(qname.as_str().bytes()) {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    (h ^ (h >> 16)) as u16
}

/// The device's own stub query: the client subnet names the user-defined
/// region's prefix, not the device address, with scope 0.
pub fn stub_query(cfg: &DeviceConfig, qname: &Name, map: &LocationPrefixMap) -> Result<DnsMessage, SimError> {
    let prefix = map.region_to_prefix(&cfg.user_defined_location)?;
    Ok(DnsMessage::query(
        stable_id(&cfg.device_id, qname),
        qname.clone(),
        QType::A,
        Some(EcsOption::from_prefix(&prefix)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// No client subnet; the authoritative places clients by resolver address.
    Standard,
    /// The resolver adds the client's own /24.
    EcsBasic,
    /// The device adds its user-defined region; the resolver forwards it.
    EcsUserDefined,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Standard,
        Architecture::EcsBasic,
        Architecture::EcsUserDefined,
    ];

    pub fn default_policy(self) -> ResolverPolicy {
        match self {
            Architecture::Standard => ResolverPolicy::Strip,
            Architecture::EcsBasic => ResolverPolicy::RewriteClientSubnet(24),
            Architecture::EcsUserDefined => ResolverPolicy::Forward,
        }
    }

    pub fn default_legacy_geo(self) -> bool {
        self == Architecture::Standard
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Standard => "standard",
            Architecture::EcsBasic => "ecs_basic",
            Architecture::EcsUserDefined => "ecs_user_defined",
        })
    }
}

impl FromStr for Architecture {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Architecture::Standard),
            "ecs_basic" => Ok(Architecture::EcsBasic),
            "ecs_user_defined" => Ok(Architecture::EcsUserDefined),
            other => Err(SimError::InvalidConfig(format!("unknown architecture {other:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Device,
    Resolver,
    Authoritative,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Device => "device",
            Role::Resolver => "resolver",
            Role::Authoritative => "authoritative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub index: usize,
    pub sender: Role,
    pub receiver: Role,
    pub qname: Name,
    pub ecs: Option<EcsOption>,
    pub answers: Vec<IpAddr>,
    /// Scope of the client subnet on responses that carry one.
    pub scope: Option<u8>,
}

impl Hop {
    fn from_message(index: usize, sender: Role, receiver: Role, msg: &DnsMessage) -> Hop {
        let ecs = msg.ecs().cloned();
        Hop {
            index,
            sender,
            receiver,
            qname: msg.question.qname.clone(),
            scope: if msg.is_response {
                ecs.as_ref().map(|e| e.scope_prefix_len())
            } else {
                None
            },
            ecs,
            answers: msg.answer_addrs(),
        }
    }

    pub fn csv_row(&self) -> String {
        let (family, prefix, addr) = match &self.ecs {
            Some(e) => (
                e.family().code().to_string(),
                e.source_prefix_len().to_string(),
                e.ip().to_string(),
            ),
            None => Default::default(),
        };
        let answers: Vec<String> = self.answers.iter().map(|a| a.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.index,
            self.sender,
            self.receiver,
            self.qname,
            family,
            prefix,
            addr,
            answers.join(";"),
            self.scope.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

pub const TRANSCRIPT_HEADER: &str =
    "hop_index,sender,receiver,qname,ecs_family,ecs_prefix,ecs_address,answer_ips,scope";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScenarioTranscript {
    pub hops: Vec<Hop>,
}

impl ScenarioTranscript {
    /// Addresses delivered to the device on the final hop.
    pub fn final_answers(&self) -> &[IpAddr] {
        self.hops.last().map(|h| h.answers.as_slice()).unwrap_or(&[])
    }

    /// Subnet the authoritative received, if the query got that far.
    pub fn ecs_at_authoritative(&self) -> Option<&EcsOption> {
        self.hops
            .iter()
            .find(|h| h.receiver == Role::Authoritative)
            .and_then(|h| h.ecs.as_ref())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRANSCRIPT_HEADER);
        out.push('\n');
        for h in &self.hops {
            out.push_str(&h.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Knobs a scenario may override; defaults follow the architecture.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOptions {
    /// Defaults to the device's IP-based location.
    pub resolver_location: Option<RegionCode>,
    pub policy: Option<ResolverPolicy>,
    pub legacy_geo: Option<bool>,
    pub qtype: Option<QType>,
}

/// Run one query through device, resolver and authoritative.
pub fn run_scenario(
    arch: Architecture,
    cfg: &DeviceConfig,
    qname: &Name,
    zone: Arc<GeoZone>,
    opts: &ScenarioOptions,
) -> Result<ScenarioTranscript, SimError> {
    let map = zone.regions().cloned().unwrap_or_default();
    cfg.validate(&map)?;
    let resolver_location = opts.resolver_location.unwrap_or(cfg.ip_based_location);
    let resolver_addr = host_in(&map, &resolver_location, RESOLVER_HOST)?;
    let policy = opts.policy.unwrap_or_else(|| arch.default_policy());
    let server = if opts.legacy_geo.unwrap_or_else(|| arch.default_legacy_geo()) {
        AuthoritativeServer::legacy_geo(zone)
    } else {
        AuthoritativeServer::new(zone)
    };
    let mut resolver = ResolverState::new(policy, resolver_location, resolver_addr);

    let mut query = match arch {
        Architecture::EcsUserDefined => stub_query(cfg, qname, &map)?,
        _ => DnsMessage::query(stable_id(&cfg.device_id, qname), qname.clone(), QType::A, None),
    };
    if let Some(t) = opts.qtype {
        query.question.qtype = t;
    }

    let mut upstream = InProcess::new(&server);
    let res = resolver.resolve(&query, cfg.client_address, &mut upstream)?;

    let mut hops = vec![Hop::from_message(0, Role::Device, Role::Resolver, &query)];
    if let (Some(uq), Some(ur)) = (&res.upstream_query, &res.upstream_response) {
        hops.push(Hop::from_message(hops.len(), Role::Resolver, Role::Authoritative, uq));
        hops.push(Hop::from_message(hops.len(), Role::Authoritative, Role::Resolver, ur));
    }
    hops.push(Hop::from_message(hops.len(), Role::Resolver, Role::Device, &res.response));
    Ok(ScenarioTranscript { hops })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    architecture: Architecture,
    zone: PathBuf,
    qname: String,
    qtype: Option<String>,
    device: DeviceSection,
    resolver: Option<ResolverSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceSection {
    id: String,
    ip_location: RegionCode,
    user_location: RegionCode,
    address: Option<IpAddr>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolverSection {
    location: Option<RegionCode>,
    policy: Option<ResolverPolicy>,
    legacy_geo: Option<bool>,
}

/// A scenario file resolved against its zone.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub architecture: Architecture,
    pub zone_path: PathBuf,
    pub zone: Arc<GeoZone>,
    pub device: DeviceConfig,
    pub qname: Name,
    pub options: ScenarioOptions,
}

impl Scenario {
    /// Read a scenario file; a relative zone path is taken from the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, SimError> {
        Scenario::load_with_zone(path, None)
    }

    /// Like [`Scenario::load`], with `zone` replacing the file's zone path.
    pub fn load_with_zone(
        path: impl AsRef<Path>,
        zone: Option<&Path>,
    ) -> Result<Scenario, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let raw: ScenarioFile =
            toml::from_str(&text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let zone_path = if let Some(z) = zone {
            z.to_path_buf()
        } else if raw.zone.is_relative() {
            path.parent().unwrap_or(Path::new(".")).join(&raw.zone)
        } else {
            raw.zone.clone()
        };
        let zone = Arc::new(load_zone(&zone_path)?);
        let map = zone.regions().cloned().unwrap_or_default();
        let device = match raw.device.address {
            Some(addr) => DeviceConfig::new(
                raw.device.id,
                raw.device.ip_location,
                raw.device.user_location,
                addr,
                &map,
            )?,
            None => DeviceConfig::in_region(
                raw.device.id,
                raw.device.ip_location,
                raw.device.user_location,
                &map,
            )?,
        };
        let qtype = match raw.qtype.as_deref() {
            None | Some("A") => QType::A,
            Some("AAAA") => QType::Aaaa,
            Some(other) => {
                return Err(SimError::InvalidConfig(format!("unsupported qtype {other:?}")))
            }
        };
        let r = raw.resolver.unwrap_or_default();
        Ok(Scenario {
            architecture: raw.architecture,
            zone_path,
            zone,
            device,
            qname: Name::new(&raw.qname)?,
            options: ScenarioOptions {
                resolver_location: r.location,
                policy: r.policy,
                legacy_geo: r.legacy_geo,
                qtype: Some(qtype),
            },
        })
    }

    pub fn run(&self) -> Result<ScenarioTranscript, SimError> {
        run_scenario(
            self.architecture,
            &self.device,
            &self.qname,
            self.zone.clone(),
            &self.options,
        )
    }
}
