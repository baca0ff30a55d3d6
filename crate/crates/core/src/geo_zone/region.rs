use std::collections::BTreeMap;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::prefix::IpPrefix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("malformed region code {0:?} (expected two ASCII letters)")]
    Malformed(String),
    #[error("unknown region {0}")]
    UnknownRegion(RegionCode),
    #[error("regions {a} ({pa}) and {b} ({pb}) have overlapping prefixes")]
    Overlap {
        a: RegionCode,
        pa: IpPrefix,
        b: RegionCode,
        pb: IpPrefix,
    },
    #[error("cannot assign more than {0} default prefixes")]
    Exhausted(usize),
}

/// Two-letter region code, stored uppercase ("UK", "US", "HK").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionCode([u8; 2]);

impl RegionCode {
    pub fn new(s: &str) -> Result<RegionCode, RegionError> {
        let b = s.as_bytes();
        if b.len() != 2 || !b.iter().all(u8::is_ascii_alphabetic) {
            return Err(RegionError::Malformed(s.to_string()));
        }
        Ok(RegionCode([b[0].to_ascii_uppercase(), b[1].to_ascii_uppercase()]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ASCII")
    }
}

impl fmt::Display for RegionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionCode {
    type Err = RegionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegionCode::new(s)
    }
}

impl Serialize for RegionCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RegionCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RegionCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Regions of the built-in map.
pub const DEFAULT_REGIONS: [&str; 16] = [
    "AQ", "AR", "AU", "BR", "CN", "DE", "ES", "FR", "HK", "IL", "IN", "MX", "RU", "SG", "UK", "US",
];

/// Base of the benchmark block (198.18.0.0/15) that default prefixes are carved from.
const BENCHMARK_BASE: u32 = 0xc612_0000;
const BENCHMARK_SLOTS: usize = 512;

/// Maps each user-selectable region to the network prefix that stands in for it
/// on the wire. Prefixes never overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationPrefixMap {
    entries: BTreeMap<RegionCode, IpPrefix>,
}

impl LocationPrefixMap {
    pub fn new(entries: BTreeMap<RegionCode, IpPrefix>) -> Result<LocationPrefixMap, RegionError> {
        let list: Vec<_> = entries.iter().collect();
        for (i, (a, pa)) in list.iter().enumerate() {
            for (b, pb) in &list[i + 1..] {
                if pa.overlaps(pb) {
                    return Err(RegionError::Overlap {
                        a: **a,
                        pa: **pa,
                        b: **b,
                        pb: **pb,
                    });
                }
            }
        }
        Ok(LocationPrefixMap { entries })
    }

    /// Deterministic map: regions in lexicographic order receive consecutive
    /// /24s from 198.18.0.0/15 (the first region gets 198.18.0.0/24).
    pub fn assign<I, R>(regions: I) -> Result<LocationPrefixMap, RegionError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<str>,
    {
        let mut codes = regions
            .into_iter()
            .map(|r| RegionCode::new(r.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        codes.sort();
        codes.dedup();
        if codes.len() > BENCHMARK_SLOTS {
            return Err(RegionError::Exhausted(BENCHMARK_SLOTS));
        }
        let entries = codes
            .into_iter()
            .enumerate()
            .map(|(i, code)| {
                let addr = IpAddr::V4(Ipv4Addr::from(BENCHMARK_BASE + ((i as u32) << 8)));
                (code, IpPrefix::new(addr, 24).expect("aligned /24"))
            })
            .collect();
        LocationPrefixMap::new(entries)
    }

    pub fn regions(&self) -> impl Iterator<Item = (&RegionCode, &IpPrefix)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn region_to_prefix(&self, region: &RegionCode) -> Result<IpPrefix, RegionError> {
        self.entries
            .get(region)
            .copied()
            .ok_or(RegionError::UnknownRegion(*region))
    }

    /// The region whose prefix contains `addr`, if any.
    pub fn region_of(&self, addr: &IpAddr) -> Option<RegionCode> {
        self.entries
            .iter()
            .find(|(_, p)| p.contains(addr))
            .map(|(r, _)| *r)
    }
}

impl Default for LocationPrefixMap {
    fn default() -> Self {
        LocationPrefixMap::assign(DEFAULT_REGIONS).expect("built-in regions are valid")
    }
}

/// Free-function form of [`LocationPrefixMap::region_to_prefix`].
pub fn region_to_prefix(map: &LocationPrefixMap, region: &RegionCode) -> Result<IpPrefix, RegionError> {
    map.region_to_prefix(region)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc(s: &str) -> RegionCode {
        RegionCode::new(s).unwrap()
    }

    #[test]
    fn default_map_is_fixed() {
        let map = LocationPrefixMap::default();
        assert_eq!(map.len(), 16);
        assert_eq!(
            map.region_to_prefix(&rc("AQ")).unwrap().to_string(),
            "198.18.0.0/24"
        );
        assert_eq!(
            map.region_to_prefix(&rc("HK")).unwrap().to_string(),
            "198.18.8.0/24"
        );
        assert_eq!(
            map.region_to_prefix(&rc("UK")).unwrap().to_string(),
            "198.18.14.0/24"
        );
        assert_eq!(
            map.region_to_prefix(&rc("uk")).unwrap(),
            map.region_to_prefix(&rc("UK")).unwrap()
        );
    }

    #[test]
    fn unknown_region() {
        let map = LocationPrefixMap::default();
        assert_eq!(
            map.region_to_prefix(&rc("ZZ")),
            Err(RegionError::UnknownRegion(rc("ZZ")))
        );
    }

    #[test]
    fn malformed_codes() {
        for bad in ["", "U", "USA", "U1", "é"] {
            assert!(RegionCode::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn overlap_rejected() {
        let mut m = BTreeMap::new();
        m.insert(rc("UK"), "10.0.0.0/8".parse().unwrap());
        m.insert(rc("US"), "10.1.0.0/16".parse().unwrap());
        assert!(matches!(
            LocationPrefixMap::new(m),
            Err(RegionError::Overlap { .. })
        ));
    }

    #[test]
    fn reverse_lookup() {
        let map = LocationPrefixMap::default();
        assert_eq!(map.region_of(&"198.18.14.200".parse().unwrap()), Some(rc("UK")));
        assert_eq!(map.region_of(&"8.8.8.8".parse().unwrap()), None);
    }
}
