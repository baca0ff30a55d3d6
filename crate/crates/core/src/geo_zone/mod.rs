//! Authoritative data with per-prefix answers.
//!
//! Each name carries a list of [`RegionalAnswer`]s keyed by client prefix and a
//! default set equal to the union of all regional addresses. A query carrying a
//! client subnet receives the longest matching entry; a query without one (or
//! with a zero-length source prefix, or matching nothing) receives the default
//! set with scope 0.

mod file;
mod region;

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;
use std::path::Path;

use thiserror::Error;

use crate::dns_wire::{EcsOption, Name};
use crate::prefix::{Family, IpPrefix};

pub use file::{load_zone, parse_zone};
pub use region::{region_to_prefix, LocationPrefixMap, RegionCode, RegionError, DEFAULT_REGIONS};

/// TTL used when the zone file leaves it out.
pub const DEFAULT_TTL: u32 = 300;

#[derive(Debug, Error)]
pub enum ZoneError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error{}: {field}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        field: String,
        message: String,
    },
    #[error("{qname}: prefix {prefix} listed more than once")]
    Overlap { qname: Name, prefix: IpPrefix },
    #[error("{qname}: default set does not equal the union of regional answers")]
    DefaultMismatch { qname: Name },
    #[error("name not found: {0}")]
    NameNotFound(Name),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionalAnswer {
    pub prefix: IpPrefix,
    /// Region the prefix came from, when it was given by region code.
    pub region: Option<RegionCode>,
    pub addresses: Vec<IpAddr>,
    pub ttl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneName {
    answers: Vec<RegionalAnswer>,
    default: Vec<IpAddr>,
    ttl: u32,
}

impl ZoneName {
    pub fn answers(&self) -> &[RegionalAnswer] {
        &self.answers
    }

    pub fn default_set(&self) -> &[IpAddr] {
        &self.default
    }

    pub fn ttl(&self) -> u32 {
        self.ttl
    }
}

/// Result of [`GeoZone::lookup`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub addresses: Vec<IpAddr>,
    pub scope: u8,
    pub ttl: u32,
    /// The entry that produced the answer; `None` for the default set.
    pub matched: Option<IpPrefix>,
}

/// One name's worth of zone input before validation.
#[derive(Debug, Clone)]
pub struct NameSpec {
    pub qname: Name,
    pub ttl: Option<u32>,
    pub answers: Vec<RegionalAnswer>,
    /// Explicit default set; checked against the union when present.
    pub default: Option<Vec<IpAddr>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GeoZone {
    origin: Option<Name>,
    regions: Option<LocationPrefixMap>,
    records: BTreeMap<Name, ZoneName>,
}

impl GeoZone {
    pub fn new(
        origin: Option<Name>,
        regions: Option<LocationPrefixMap>,
        names: Vec<NameSpec>,
    ) -> Result<GeoZone, ZoneError> {
        let mut records = BTreeMap::new();
        for input in names {
            if records.contains_key(&input.qname) {
                return Err(ZoneError::Parse {
                    line: None,
                    field: format!("name {}", input.qname),
                    message: "qname defined twice".into(),
                });
            }
            let qname = input.qname.clone();
            let entry = validate_name(input)?;
            records.insert(qname, entry);
        }
        Ok(GeoZone {
            origin,
            regions,
            records,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GeoZone, ZoneError> {
        load_zone(path)
    }

    pub fn origin(&self) -> Option<&Name> {
        self.origin.as_ref()
    }

    /// Region table the zone was written against, if it declared one.
    pub fn regions(&self) -> Option<&LocationPrefixMap> {
        self.regions.as_ref()
    }

    pub fn names(&self) -> impl Iterator<Item = (&Name, &ZoneName)> {
        self.records.iter()
    }

    pub fn get(&self, qname: &Name) -> Option<&ZoneName> {
        self.records.get(qname)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lookup(&self, qname: &Name, ecs: Option<&EcsOption>) -> Result<Answer, ZoneError> {
        let entry = self
            .records
            .get(qname)
            .ok_or_else(|| ZoneError::NameNotFound(qname.clone()))?;
        let default = Answer {
            addresses: entry.default.clone(),
            scope: 0,
            ttl: entry.ttl,
            matched: None,
        };
        let Some(ecs) = ecs.filter(|e| e.source_prefix_len() > 0) else {
            return Ok(default);
        };
        let client = ecs.ip();
        let best = entry
            .answers
            .iter()
            .filter(|a| a.prefix.len() <= ecs.source_prefix_len() && a.prefix.contains(&client))
            .max_by_key(|a| a.prefix.len());
        Ok(match best {
            Some(a) => Answer {
                addresses: a.addresses.clone(),
                scope: a.prefix.len(),
                ttl: a.ttl,
                matched: Some(a.prefix),
            },
            None => default,
        })
    }

    /// Answer for a query without client subnet when the server places clients
    /// by the query's source address (classic geo DNS).
    pub fn lookup_by_source(&self, qname: &Name, source: IpAddr) -> Result<Answer, ZoneError> {
        let full = Family::of(&source).max_len();
        let ecs = EcsOption::from_addr(source, full).expect("full-length prefix");
        self.lookup(qname, Some(&ecs))
    }

    /// Shortest prefix length `L` such that the `L`-bit block around the client
    /// subnet overlaps no entry of `qname`, so a default-set answer given to this
    /// client is valid for every client in that block. `Some(0)` when the name has
    /// no regional entries; `None` when no block length isolates the client.
    pub fn isolating_scope(&self, qname: &Name, ecs: &EcsOption) -> Option<u8> {
        let entry = self.records.get(qname)?;
        if entry.answers.is_empty() {
            return Some(0);
        }
        let family = ecs.family();
        let client = ecs.ip();
        (1..=family.max_len()).find(|&len| {
            let block = IpPrefix::truncating(client, len).expect("length within family");
            entry.answers.iter().all(|a| !a.prefix.overlaps(&block))
        })
    }
}

fn validate_name(input: NameSpec) -> Result<ZoneName, ZoneError> {
    let ttl = input.ttl.unwrap_or(DEFAULT_TTL);
    let mut seen = BTreeSet::new();
    for a in &input.answers {
        if !seen.insert(a.prefix) {
            return Err(ZoneError::Overlap {
                qname: input.qname.clone(),
                prefix: a.prefix,
            });
        }
        if a.addresses.is_empty() {
            return Err(ZoneError::Parse {
                line: None,
                field: format!("name {} prefix {}", input.qname, a.prefix),
                message: "empty address list".into(),
            });
        }
        if let Some(bad) = a
            .addresses
            .iter()
            .find(|ip| Family::of(ip) != a.prefix.family())
        {
            return Err(ZoneError::Parse {
                line: None,
                field: format!("name {} prefix {}", input.qname, a.prefix),
                message: format!("address {bad} does not match the prefix family"),
            });
        }
    }
    let union: BTreeSet<IpAddr> = input
        .answers
        .iter()
        .flat_map(|a| a.addresses.iter().copied())
        .collect();
    if let Some(explicit) = &input.default {
        let explicit: BTreeSet<IpAddr> = explicit.iter().copied().collect();
        if !input.answers.is_empty() && explicit != union {
            return Err(ZoneError::DefaultMismatch { qname: input.qname });
        }
    }
    // A name with no regional entries is served entirely from its explicit default.
    let default: Vec<IpAddr> = if input.answers.is_empty() {
        let set: BTreeSet<IpAddr> = input.default.iter().flatten().copied().collect();
        set.into_iter().collect()
    } else {
        union.into_iter().collect()
    };
    if default.is_empty() {
        return Err(ZoneError::Parse {
            line: None,
            field: format!("name {}", input.qname),
            message: "no addresses".into(),
        });
    }
    let answers = input
        .answers
        .into_iter()
        .map(|mut a| {
            a.ttl = ttl;
            a
        })
        .collect();
    Ok(ZoneName {
        answers,
        default,
        ttl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(s: &str) -> Name {
        Name::new(s).unwrap()
    }

    fn ans(prefix: &str, addrs: &[&str]) -> RegionalAnswer {
        RegionalAnswer {
            prefix: prefix.parse().unwrap(),
            region: None,
            addresses: addrs.iter().map(|a| a.parse().unwrap()).collect(),
            ttl: 0,
        }
    }

    fn two_region_zone() -> GeoZone {
        GeoZone::new(
            Some(name("example.iot")),
            None,
            vec![NameSpec {
                qname: name("api.example.iot"),
                ttl: None,
                answers: vec![
                    ans("198.18.14.0/24", &["10.1.0.1"]),
                    ans("198.18.8.0/24", &["10.2.0.1"]),
                ],
                default: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn lookup_matches_and_falls_back() {
        let z = two_region_zone();
        let q = name("api.example.iot");
        let uk = EcsOption::from_addr("198.18.14.0".parse().unwrap(), 24).unwrap();
        let a = z.lookup(&q, Some(&uk)).unwrap();
        assert_eq!(a.addresses, vec!["10.1.0.1".parse::<IpAddr>().unwrap()]);
        assert_eq!(a.scope, 24);
        assert_eq!(a.ttl, DEFAULT_TTL);

        let all = z.lookup(&q, None).unwrap();
        assert_eq!(all.addresses.len(), 2);
        assert_eq!(all.scope, 0);

        let elsewhere = EcsOption::from_addr("8.8.8.0".parse().unwrap(), 24).unwrap();
        assert_eq!(z.lookup(&q, Some(&elsewhere)).unwrap(), all);

        let zero = EcsOption::from_addr("198.18.14.0".parse().unwrap(), 0).unwrap();
        assert_eq!(z.lookup(&q, Some(&zero)).unwrap(), all);

        assert!(matches!(
            z.lookup(&name("nope.example.iot"), None),
            Err(ZoneError::NameNotFound(_))
        ));
    }

    #[test]
    fn entries_longer_than_source_are_not_used() {
        let z = two_region_zone();
        let coarse = EcsOption::from_addr("198.18.14.0".parse().unwrap(), 16).unwrap();
        let a = z.lookup(&name("api.example.iot"), Some(&coarse)).unwrap();
        assert_eq!(a.scope, 0);
        assert_eq!(a.addresses.len(), 2);
    }

    #[test]
    fn duplicate_prefix_rejected() {
        let r = GeoZone::new(
            None,
            None,
            vec![NameSpec {
                qname: name("a.example"),
                ttl: None,
                answers: vec![ans("10.0.0.0/8", &["1.1.1.1"]), ans("10.0.0.0/8", &["2.2.2.2"])],
                default: None,
            }],
        );
        assert!(matches!(r, Err(ZoneError::Overlap { .. })));
    }

    #[test]
    fn explicit_default_must_match_union() {
        let r = GeoZone::new(
            None,
            None,
            vec![NameSpec {
                qname: name("a.example"),
                ttl: None,
                answers: vec![ans("10.0.0.0/8", &["1.1.1.1"])],
                default: Some(vec!["9.9.9.9".parse().unwrap()]),
            }],
        );
        assert!(matches!(r, Err(ZoneError::DefaultMismatch { .. })));
    }

    #[test]
    fn isolating_scope_examples() {
        let z = two_region_zone();
        let q = name("api.example.iot");
        // 8.0.0.0/5 already excludes 198.18.0.0/15, 0.0.0.0/1 does too
        let far = EcsOption::from_addr("8.8.8.0".parse().unwrap(), 24).unwrap();
        assert_eq!(z.isolating_scope(&q, &far), Some(1));
        // 198.18.15.0 shares 198.18.14.0/23 with the UK entry
        let near = EcsOption::from_addr("198.18.15.0".parse().unwrap(), 24).unwrap();
        assert_eq!(z.isolating_scope(&q, &near), Some(24));
    }
}
