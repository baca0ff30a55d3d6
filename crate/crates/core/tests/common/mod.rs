//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;
use std::path::PathBuf;
use std::sync::Arc;

use geoecs::dns_wire::Name;
use geoecs::geo_zone::{parse_zone, GeoZone, LocationPrefixMap, RegionCode};
use geoecs::traffic_analysis::CaptureLog;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn rc(s: &str) -> RegionCode {
    RegionCode::new(s).unwrap()
}

pub fn name(s: &str) -> Name {
    Name::new(s).unwrap()
}

/// Client-subnet option data built bit by bit from the address as an integer:
/// FAMILY(2) SOURCE(1) SCOPE(1) then ceil(source / 8) address octets with
/// every bit past `source` cleared.
pub fn reference_ecs_data(addr: IpAddr, source: u8, scope: u8) -> Vec<u8> {
    let (family, width, value): (u16, u32, u128) = match addr {
        IpAddr::V4(a) => (1, 32, u32::from(a) as u128),
        IpAddr::V6(a) => (2, 128, u128::from(a)),
    };
    let keep = u32::from(source).min(width);
    let masked = if keep == 0 {
        0
    } else {
        value & (u128::MAX << (width - keep)) & (u128::MAX >> (128 - width))
    };
    let mut out = vec![(family >> 8) as u8, family as u8, source, scope];
    let octets = keep.div_ceil(8);
    for i in 0..octets {
        let shift = width - 8 * (i + 1);
        out.push((masked >> shift) as u8);
    }
    out
}

/// Same option with its code and length, as it sits inside OPT RDATA.
pub fn reference_ecs_option(addr: IpAddr, source: u8, scope: u8) -> Vec<u8> {
    let data = reference_ecs_data(addr, source, scope);
    let mut out = vec![0, 8, (data.len() >> 8) as u8, data.len() as u8];
    out.extend(data);
    out
}

/// |a & b| / |a | b| as (numerator, denominator) in lowest terms; (1, 1) for
/// two empty sets.
pub fn jaccard_bits(a: u32, b: u32) -> (u64, u64) {
    let i = u64::from((a & b).count_ones());
    let u = u64::from((a | b).count_ones());
    if u == 0 {
        return (1, 1);
    }
    let g = gcd(i, u);
    (i / g, u / g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Earliest observed timestamp t such that every prefix of the selection
/// ending at or after t already contains the full name set.
pub fn stabilization_oracle(
    log: &CaptureLog,
    device: &str,
    ipl: RegionCode,
    udl: RegionCode,
) -> Option<u64> {
    let sel: Vec<_> = log
        .records()
        .iter()
        .filter(|r| r.device_id == device && r.ip_based_location == ipl && r.user_defined_location == udl)
        .collect();
    let full: BTreeSet<&Name> = sel.iter().map(|r| &r.qname).collect();
    let times: BTreeSet<u64> = sel.iter().map(|r| r.timestamp).collect();
    times.into_iter().find(|&t| {
        let upto: BTreeSet<&Name> = sel
            .iter()
            .filter(|r| r.timestamp <= t)
            .map(|r| &r.qname)
            .collect();
        upto == full
    })
}

/// Names seen for a selection, straight from the records.
pub fn raw_names(log: &CaptureLog, device: &str, ipl: RegionCode, udl: RegionCode) -> BTreeSet<String> {
    log.records()
        .iter()
        .filter(|r| r.device_id == device && r.ip_based_location == ipl && r.user_defined_location == udl)
        .map(|r| r.qname.as_str().to_string())
        .collect()
}

/// One server address per region, 10.<i>.0.1, and a zone that maps every
/// region's prefix in the built-in map to it.
pub fn region_zone(regions: &[&str]) -> (Arc<GeoZone>, BTreeMap<RegionCode, IpAddr>) {
    let mut text = String::from("origin = \"example.iot\"\n\n[[name]]\nqname = \"api.example.iot\"\n\n[name.answers]\n");
    let mut servers = BTreeMap::new();
    for (i, r) in regions.iter().enumerate() {
        let addr: IpAddr = format!("10.{}.0.1", i + 1).parse().unwrap();
        text.push_str(&format!("{r} = [\"{addr}\"]\n"));
        servers.insert(rc(r), addr);
    }
    (Arc::new(parse_zone(&text).unwrap()), servers)
}

pub fn default_map() -> LocationPrefixMap {
    LocationPrefixMap::default()
}
