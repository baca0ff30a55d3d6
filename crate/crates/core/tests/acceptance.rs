//! One line per acceptance criterion, then a single assertion over all of
//! them so every criterion is reported even when an earlier one fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use geoecs::dns_wire::{decode_message, encode_message, DnsMessage, EcsOption, Name, QType, ResourceRecord, Rcode};
use geoecs::fixtures::{self, growing_ip_log, mi_mud_fixture, random_log};
use geoecs::geo_zone::{parse_zone, GeoZone};
use geoecs::mud_kit::{
    domain_count, ecs_collapse, excess_ratio, parse_mud, reduction_ratio, serialize_mud, unify,
    Ace, Action, Direction, Endpoint, MacAddr, MudFile, Port, Protocol,
};
use geoecs::resolver_sim::{
    run_scenario, Architecture, AuthoritativeServer, DeviceConfig, InProcess, ResolverPolicy,
    ResolverState, ScenarioOptions,
};
use geoecs::traffic_analysis::{
    cumulative_counts, ipbs, jaccard, ratio_to_decimal, stabilization_time, uds, CaptureLog,
    CaptureRecord, DomainSet,
};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    default_map, fixture, jaccard_bits, name, rc, reference_ecs_data, reference_ecs_option,
    region_zone, stabilization_oracle,
};

type Outcome = Result<String, String>;

fn cases(n: u32) -> Config {
    Config { cases: n, failure_persistence: None, ..Config::default() }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cases = [
        ("standard.toml", "standard", "203.0.113.10"),
        ("ecs_basic.toml", "ecs_basic", "198.51.100.10"),
        ("ecs_user_defined.toml", "ecs_user_defined", "192.0.2.10"),
    ];
    for (file, arch, want) in cases {
        let path = fixture(&format!("scenarios/{file}"));
        let out = Command::new(env!("CARGO_BIN_EXE_geoecs"))
            .args(["scenario", "run"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || format!("{file}: exit {:?}", out.status.code()))?;
        let text = String::from_utf8_lossy(&out.stdout);
        let last = text.lines().last().unwrap_or_default();
        let got = last.split(',').nth(7).unwrap_or_default();
        check(got == want, || format!("{arch}: final answer {got:?}, expected {want:?}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(format!("standard, ecs_basic and ecs_user_defined final hops match in {elapsed:?}"))
}

fn arb_addr() -> impl Strategy<Value = IpAddr> {
    prop_oneof![
        any::<u32>().prop_map(|v| IpAddr::V4(Ipv4Addr::from(v))),
        any::<u128>().prop_map(|v| IpAddr::V6(Ipv6Addr::from(v))),
    ]
}

fn arb_message() -> impl Strategy<Value = DnsMessage> {
    (
        any::<u16>(),
        prop::collection::vec("[a-z0-9]{1,12}", 1..5),
        arb_addr(),
        0u8..=128,
        any::<bool>(),
        prop::collection::vec((arb_addr(), any::<u32>()), 0..5),
    )
        .prop_map(|(id, labels, addr, len, resp, answers)| {
            let max = if addr.is_ipv4() { 32 } else { 128 };
            let ecs = EcsOption::from_addr(addr, len.min(max)).unwrap();
            let qname = Name::new(&labels.join(".")).unwrap();
            let q = DnsMessage::query(id, qname.clone(), QType::A, Some(ecs.clone()));
            if !resp {
                return q;
            }
            let rrs = answers
                .into_iter()
                .map(|(addr, ttl)| ResourceRecord { name: qname.clone(), ttl, addr })
                .collect();
            let mut r = DnsMessage::response_to(&q, Rcode::NOERROR, rrs);
            r.set_ecs(Some(ecs.with_scope(ecs.source_prefix_len()).unwrap()));
            r
        })
}

fn criterion_2() -> Outcome {
    let addr: IpAddr = "111.111.111.0".parse().unwrap();
    let expected = [0x00, 0x01, 0x18, 0x00, 0x6f, 0x6f, 0x6f];
    let reference = reference_ecs_data(addr, 24, 0);
    check(reference == expected, || format!("reference encoder gave {reference:02x?}"))?;
    let ecs = EcsOption::from_addr(addr, 24).map_err(|e| e.to_string())?;
    check(ecs.encode_data() == expected, || format!("codec gave {:02x?}", ecs.encode_data()))?;
    let wire = encode_message(&DnsMessage::query(1, name("a.example.iot"), QType::A, Some(ecs)))
        .map_err(|e| e.to_string())?;
    check(wire.ends_with(&reference_ecs_option(addr, 24, 0)), || "OPT tail differs".into())?;

    let mut runner = TestRunner::new(cases(1000));
    runner
        .run(&arb_message(), |m| {
            let wire = encode_message(&m).unwrap();
            let back = decode_message(&wire).unwrap();
            prop_assert_eq!(&back, &m);
            let e = m.ecs().unwrap();
            let data = e.encode_data();
            prop_assert_eq!(&data, &reference_ecs_data(e.ip(), e.source_prefix_len(), e.scope_prefix_len()));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("00 01 18 00 6F 6F 6F matches the reference; 1000 random roundtrips pass".into())
}

const FIVE: [&str; 5] = ["UK", "HK", "US", "DE", "SG"];

fn criterion_3() -> Outcome {
    let (zone, servers) = region_zone(&FIVE);
    let map = default_map();
    let qname = name("api.example.iot");
    let mut seen: BTreeMap<&str, BTreeSet<Vec<IpAddr>>> = BTreeMap::new();
    let mut ok = 0;
    for ip in FIVE {
        for res in FIVE {
            for user in FIVE {
                let cfg = DeviceConfig::in_region("cam", rc(ip), rc(user), &map).map_err(|e| e.to_string())?;
                let opts = ScenarioOptions { resolver_location: Some(rc(res)), ..Default::default() };
                let t = run_scenario(Architecture::EcsUserDefined, &cfg, &qname, zone.clone(), &opts)
                    .map_err(|e| e.to_string())?;
                if t.final_answers() == [servers[&rc(user)]] {
                    ok += 1;
                }
                seen.entry(user).or_default().insert(t.final_answers().to_vec());
            }
        }
    }
    let functional = seen.values().all(|s| s.len() == 1);
    check(ok == 125 && functional, || format!("{ok}/125 cases delivered the user's region"))?;
    Ok("125/125 answers depend on the user-defined location alone".into())
}

fn criterion_4() -> Outcome {
    let (zone, _) = region_zone(&FIVE);
    let server = AuthoritativeServer::new(zone);
    let mut resolver = ResolverState::new(ResolverPolicy::Forward, rc("US"), "198.18.15.53".parse().unwrap())
        .without_cache();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000u16 {
        let ecs = if rng.gen_bool(0.5) {
            EcsOption::from_addr(IpAddr::V4(Ipv4Addr::from(rng.gen::<u32>())), rng.gen_range(0..=32))
        } else {
            EcsOption::from_addr(IpAddr::V6(Ipv6Addr::from(rng.gen::<u128>())), rng.gen_range(0..=128))
        }
        .unwrap();
        let stub = DnsMessage::query(i, name("api.example.iot"), QType::A, Some(ecs.clone()));
        let sent = encode_message(&stub).unwrap();
        let n = 4 + ecs.encode_data().len();
        let mut up = InProcess::new(&server);
        resolver
            .resolve(&stub, "198.18.8.20".parse().unwrap(), &mut up)
            .map_err(|e| e.to_string())?;
        let got = &up.received()[0];
        check(got[got.len() - n..] == sent[sent.len() - n..], || format!("case {i}: {ecs} altered"))?;
    }
    Ok("1000/1000 forwarded subnets arrive byte-identical".into())
}

fn criterion_5() -> Outcome {
    let universe = ["a.x", "b.x", "c.x", "d.x", "e.x", "f.x"];
    let set = |bits: u32| {
        DomainSet::literal((0..6).filter(|i| bits & (1 << i) != 0).map(|i| name(universe[i])))
    };
    let (uk, hk, us) = (rc("UK"), rc("HK"), rc("US"));
    let mut pairs = 0;
    for a in 0u32..64 {
        for b in 0u32..64 {
            let (n, d) = jaccard_bits(a, b);
            let want = Ratio::new(n, d);
            check(jaccard(&set(a), &set(b)) == want, || format!("jaccard {a:06b} {b:06b}"))?;
            if a != 0 && b != 0 {
                let mut recs = Vec::new();
                let mut push = |ts, ipl, udl, bits: u32| {
                    for i in (0..6).filter(|i| bits & (1 << i) != 0) {
                        recs.push(CaptureRecord {
                            timestamp: ts,
                            device_id: "dev".into(),
                            ip_based_location: ipl,
                            user_defined_location: udl,
                            qname: name(universe[i]),
                            resolved_ips: vec![],
                        });
                    }
                };
                push(1, uk, hk, a);
                push(2, uk, us, b);
                push(3, hk, uk, a);
                push(4, us, uk, b);
                let log = CaptureLog::new(recs);
                check(uds(&log, "dev", uk, hk, us).map_err(|e| e.to_string())? == want, || format!("uds {a:06b} {b:06b}"))?;
                check(ipbs(&log, "dev", uk, hk, us).map_err(|e| e.to_string())? == want, || format!("ipbs {a:06b} {b:06b}"))?;
            }
            pairs += 1;
        }
    }
    for seed in 0..100 {
        let log = random_log(seed, 1 + seed as usize % 50, &universe);
        let got = stabilization_time(&log, "dev", uk, hk).map_err(|e| e.to_string())?;
        let want = stabilization_oracle(&log, "dev", uk, hk);
        check(got == want, || format!("seed {seed}: {got:?} vs {want:?}"))?;
    }
    Ok(format!("{pairs} set pairs and 100 random logs agree with the oracles"))
}

fn criterion_6() -> Outcome {
    let log = growing_ip_log(10, 11);
    let pts = cumulative_counts(&log, fixtures::NEST_DEVICE, rc("UK"), rc("UK"), fixtures::DAY)
        .map_err(|e| e.to_string())?;
    let domains: Vec<usize> = pts.iter().map(|p| p.unique_domains).collect();
    let ips: Vec<usize> = pts.iter().map(|p| p.unique_ips).collect();
    check(domains == vec![1; 10], || format!("domains {domains:?}"))?;
    check(ips == (1..=10).collect::<Vec<_>>(), || format!("ips {ips:?}"))?;
    Ok(format!("domains {domains:?}, ips {ips:?}"))
}

fn criterion_7() -> Outcome {
    const SHARED: usize = 2;
    let (muds, groups) = mi_mud_fixture(10, SHARED);
    let bound = Ratio::new(66u64, 100);
    let mut below = Vec::new();
    let mut rows = Vec::new();
    for k in 1..=10usize {
        let u = unify(&muds[..k]).map_err(|e| e.to_string())?;
        let (c, _) = ecs_collapse(&u, &groups).map_err(|e| e.to_string())?;
        let r = reduction_ratio(&u, &c).map_err(|e| e.to_string())?;
        let closed = Ratio::new((k - 1) as u64, (k + SHARED) as u64);
        check(r == closed, || format!("k={k}: ratio {r} differs from closed form {closed}"))?;
        if k >= 3 && r < bound {
            below.push(k);
        }
        let excess = excess_ratio(&u, &c).map_err(|e| e.to_string())?;
        rows.push(format!(
            "k={k} {}/{} reduction {} excess {}",
            domain_count(&u),
            domain_count(&c),
            ratio_to_decimal(&r, 3),
            ratio_to_decimal(&excess, 3)
        ));
    }
    for r in &rows {
        println!("    {r}");
    }
    check(below.is_empty(), || {
        format!(
            "closed form holds, but the ratio is below 0.66 at k = {below:?} with {SHARED} shared domains"
        )
    })?;
    Ok("ratio >= 0.66 for every k >= 3 and equals (k-1)/(k+s)".into())
}

fn cache_zone() -> Arc<GeoZone> {
    Arc::new(
        parse_zone(
            r#"
origin = "example.iot"

[[name]]
qname = "api.example.iot"
[name.answers]
UK = ["10.1.0.1"]
HK = ["10.2.0.1"]
US = ["10.3.0.1"]

[[name]]
qname = "static.example.iot"
default = ["10.9.0.1"]
"#,
        )
        .unwrap(),
    )
}

fn criterion_8() -> Outcome {
    let server = AuthoritativeServer::new(cache_zone());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut wildcard = 0;
    let mut cross_miss = 0;
    let addr: IpAddr = "198.18.14.53".parse().unwrap();
    for policy in [ResolverPolicy::Forward, ResolverPolicy::RewriteClientSubnet(24)] {
        let mut cached = ResolverState::new(policy, rc("UK"), addr);
        let mut oracle = ResolverState::new(policy, rc("UK"), addr).without_cache();
        let mut served: BTreeSet<(Name, Vec<u8>)> = BTreeSet::new();
        for i in 0..500u16 {
            let qname = name(["api.example.iot", "static.example.iot"][rng.gen_range(0..2)]);
            let client = IpAddr::V4(Ipv4Addr::from(0xc612_0000u32 | rng.gen_range(0..0x1000u32)));
            let ecs = match rng.gen_range(0..6) {
                0 => None,
                _ => Some(EcsOption::from_addr(client, [16, 20, 24, 32][rng.gen_range(0..4)]).unwrap()),
            };
            let q = DnsMessage::query(i, qname.clone(), QType::A, ecs);
            let a = cached.resolve_with(&q, client, &server).map_err(|e| e.to_string())?;
            let b = oracle.resolve_with(&q, client, &server).map_err(|e| e.to_string())?;
            check(a.response.answer_addrs() == b.response.answer_addrs() && a.response.rcode == b.response.rcode, || {
                format!("{policy} query {i} differs from the cacheless run")
            })?;
            let key = a.effective_ecs.as_ref().map(|e| e.address().to_vec()).unwrap_or_default();
            if a.cache_hit && a.response.ecs().is_some_and(|e| e.scope_prefix_len() == 0) {
                wildcard += 1;
            }
            if !a.cache_hit && served.iter().any(|(n, k)| n == &qname && k != &key) {
                cross_miss += 1;
            }
            served.insert((qname, key));
            let dt = rng.gen_range(0..20);
            cached.advance(dt);
            oracle.advance(dt);
        }
    }
    check(wildcard > 0 && cross_miss > 0, || format!("wildcard hits {wildcard}, cross-prefix misses {cross_miss}"))?;
    Ok(format!("2 x 500 queries agree; {wildcard} scope-0 hits, {cross_miss} cross-prefix misses"))
}

fn arb_mud() -> impl Strategy<Value = MudFile> {
    let ace = (
        prop_oneof![
            "[a-z]{1,6}\\.(com|io|net)".prop_map(|d| Endpoint::Domain(Name::new(&d).unwrap())),
            arb_addr().prop_map(Endpoint::Ip),
            any::<[u8; 6]>().prop_map(|m| Endpoint::Mac(MacAddr(m))),
        ],
        prop::sample::select(vec![Protocol::Tcp, Protocol::Udp, Protocol::Icmp, Protocol::Any]),
        prop_oneof![Just(Port::Any), any::<u16>().prop_map(Port::Num)],
        prop_oneof![Just(Port::Any), any::<u16>().prop_map(Port::Num)],
        prop::sample::select(vec![Direction::ToDevice, Direction::FromDevice]),
        prop::sample::select(vec![Action::Accept, Action::Drop]),
    )
        .prop_map(|(e, p, s, d, dir, a)| {
            let (s, d) = if p == Protocol::Icmp { (Port::Any, Port::Any) } else { (s, d) };
            Ace::new(e, p, s, d, dir, a).unwrap()
        });
    ("[a-z]{1,4}", prop::collection::vec(ace, 0..10))
        .prop_map(|(u, aces)| MudFile::new("dev", format!("https://{u}.example/mud.json"), aces))
}

fn criterion_9() -> Outcome {
    let mut runner = TestRunner::new(cases(500));
    runner
        .run(&arb_mud(), |m| {
            let bytes = serialize_mud(&m);
            prop_assert_eq!(parse_mud(&bytes).unwrap(), m);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let mut runner = TestRunner::new(cases(200));
    runner
        .run(&(arb_mud(), arb_mud(), arb_mud()), |(a, b, c)| {
            let u = |xs: &[MudFile]| unify(xs).unwrap();
            prop_assert_eq!(u(&[u(&[a.clone(), b.clone()]), c.clone()]), u(&[a.clone(), u(&[b.clone(), c.clone()])]));
            prop_assert_eq!(u(&[a.clone(), b.clone()]), u(&[b.clone(), a.clone()]));
            prop_assert_eq!(u(&[a.clone(), a.clone()]), a);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 roundtrips; unify associative, commutative, idempotent on 200 triples".into())
}

#[test]
fn acceptance() {
    let criteria: [(u8, &str, fn() -> Outcome); 9] = [
        (1, "scenario reproduction", criterion_1),
        (2, "ECS wire conformance", criterion_2),
        (3, "user-defined dominance", criterion_3),
        (4, "forward fidelity", criterion_4),
        (5, "similarity oracles", criterion_5),
        (6, "cumulative series shape", criterion_6),
        (7, "MUD reduction bound", criterion_7),
        (8, "cache semantics", criterion_8),
        (9, "MUD roundtrip and algebra", criterion_9),
    ];
    let mut failed = Vec::new();
    for (n, label, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n} ({label}): PASS: {detail}"),
            Err(why) => {
                println!("criterion {n} ({label}): FAIL: {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
