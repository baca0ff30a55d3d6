//! Seeded synthetic inputs shaped like the devices the toolkit was built for.
//! Same seed, same output.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dns_wire::Name;
use crate::geo_zone::RegionCode;
use crate::mud_kit::{generate_mud, AceTemplate, MudFile, RegionDomainGroup};
use crate::traffic_analysis::{CaptureLog, CaptureRecord, DomainSet};

pub const DAY: u64 = 86_400;
/// Midnight UTC, 2022-04-15.
pub const BASE_TIME: u64 = 1_649_980_800;

pub const YI_DEVICE: &str = "yi-camera";
pub const YI_HK_DOMAIN: &str = "api.xiaoyi.com.tw";
pub const YI_UK_DOMAIN: &str = "api.eu.xiaoyi.com";

pub const NEST_DEVICE: &str = "nest-cam";
pub const NEST_DOMAIN: &str = "frontdoor.nest.com";

pub const MI_DEVICE: &str = "mi-hub";
pub const MI_CANONICAL: &str = "ot.io.mi.com";
pub const MI_REGIONS: [&str; 10] = ["CN", "DE", "SG", "US", "RU", "IN", "UK", "HK", "FR", "ES"];
const MI_SHARED: [&str; 3] = ["account.xiaomi.com", "api.io.mi.com", "data.mistat.xiaomi.com"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rc(s: &str) -> RegionCode {
    RegionCode::new(s).expect("fixture region")
}

fn name(s: &str) -> Name {
    Name::new(s).expect("fixture name")
}

fn v4(n: u32) -> IpAddr {
    IpAddr::V4(Ipv4Addr::from(n))
}

/// A camera whose cloud endpoint follows the user-defined location: HK users
/// talk to the .tw name, UK users to the .eu one. The IP-based location does
/// not change the name.
pub fn yi_camera_log(seed: u64) -> CaptureLog {
    let mut rng = rng(seed);
    let mut records = Vec::new();
    for ipl in ["UK", "HK"] {
        for udl in ["HK", "UK"] {
            let (domain, net) = match udl {
                "HK" => (YI_HK_DOMAIN, 0xcb00_7100u32),
                _ => (YI_UK_DOMAIN, 0xc633_6400u32),
            };
            for _ in 0..rng.gen_range(3..8) {
                records.push(CaptureRecord {
                    timestamp: BASE_TIME + rng.gen_range(0..DAY),
                    device_id: YI_DEVICE.into(),
                    ip_based_location: rc(ipl),
                    user_defined_location: rc(udl),
                    qname: name(domain),
                    resolved_ips: vec![v4(net + rng.gen_range(1..16))],
                });
            }
        }
    }
    CaptureLog::new(records)
}

/// One domain that resolves to a new address every day, plus repeats of
/// addresses already seen. The first record sits exactly at `BASE_TIME`, so
/// day d falls in bucket d of a daily series.
pub fn growing_ip_log(days: u32, seed: u64) -> CaptureLog {
    let mut rng = rng(seed);
    let base = 0x6440_0000u32;
    let mut records = Vec::new();
    for d in 0..days {
        let day_start = BASE_TIME + u64::from(d) * DAY;
        let first = if d == 0 { 0 } else { rng.gen_range(0..DAY / 2) };
        let mk = |ts, ip| CaptureRecord {
            timestamp: ts,
            device_id: NEST_DEVICE.into(),
            ip_based_location: rc("UK"),
            user_defined_location: rc("UK"),
            qname: name(NEST_DOMAIN),
            resolved_ips: vec![ip],
        };
        records.push(mk(day_start + first, v4(base + d + 1)));
        for _ in 0..rng.gen_range(0..3) {
            let ts = day_start + rng.gen_range(first..DAY);
            records.push(mk(ts, v4(base + rng.gen_range(0..=d) + 1)));
        }
    }
    CaptureLog::new(records)
}

/// Per-region MUD files for a hub with one region-specific service name
/// (`<region>.ot.io.mi.com`) and `shared` names every region uses, together
/// with the group that folds the regional names. Regions follow
/// [`MI_REGIONS`], truncated to `regions`.
pub fn mi_mud_fixture(regions: usize, shared: usize) -> (Vec<MudFile>, Vec<RegionDomainGroup>) {
    assert!(regions <= MI_REGIONS.len(), "at most {} regions", MI_REGIONS.len());
    let shared_names: Vec<Name> = (0..shared)
        .map(|i| match MI_SHARED.get(i) {
            Some(s) => name(s),
            None => name(&format!("s{i}.xiaomi.com")),
        })
        .collect();
    let mut variants = BTreeMap::new();
    let muds = MI_REGIONS[..regions]
        .iter()
        .map(|r| {
            let variant = name(&format!("{}.{MI_CANONICAL}", r.to_ascii_lowercase()));
            variants.insert(rc(r), variant.clone());
            let ds = DomainSet::literal(shared_names.iter().cloned().chain([variant]));
            generate_mud(&ds, MI_DEVICE, &AceTemplate::default()).expect("non-empty")
        })
        .collect();
    let groups = if variants.is_empty() {
        Vec::new()
    } else {
        vec![RegionDomainGroup::new(name(MI_CANONICAL), variants).expect("distinct variants")]
    };
    (muds, groups)
}

/// Random log over a small universe for oracle tests: `n` records, one device,
/// two locations, names drawn from `universe`.
pub fn random_log(seed: u64, n: usize, universe: &[&str]) -> CaptureLog {
    let mut rng = rng(seed);
    let regions = [rc("UK"), rc("HK")];
    let records = (0..n)
        .map(|_| CaptureRecord {
            timestamp: rng.gen_range(0..10_000),
            device_id: "dev".into(),
            ip_based_location: *regions.choose(&mut rng).unwrap(),
            user_defined_location: *regions.choose(&mut rng).unwrap(),
            qname: name(universe.choose(&mut rng).expect("non-empty universe")),
            resolved_ips: vec![v4(0x0a00_0000 + rng.gen_range(0..64))],
        })
        .collect();
    CaptureLog::new(records)
}
