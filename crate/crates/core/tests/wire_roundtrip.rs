mod common;

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use geoecs::dns_wire::{
    decode_message, encode_message, DnsMessage, EcsOption, QType, Rcode, ResourceRecord,
};
use proptest::prelude::*;

use common::{reference_ecs_data, reference_ecs_option};

#[test]
fn ecs_111_111_111_0_slash_24() {
    let addr: IpAddr = "111.111.111.0".parse().unwrap();
    let expected = [0x00, 0x01, 0x18, 0x00, 0x6f, 0x6f, 0x6f];
    assert_eq!(reference_ecs_data(addr, 24, 0), expected);
    let ecs = EcsOption::from_addr(addr, 24).unwrap();
    assert_eq!(ecs.encode_data(), expected);

    let q = DnsMessage::query(7, common::name("api.example.iot"), QType::A, Some(ecs));
    let wire = encode_message(&q).unwrap();
    assert!(wire.ends_with(&reference_ecs_option(addr, 24, 0)));
}

fn arb_addr() -> impl Strategy<Value = IpAddr> {
    prop_oneof![
        any::<u32>().prop_map(|v| IpAddr::V4(Ipv4Addr::from(v))),
        any::<u128>().prop_map(|v| IpAddr::V6(Ipv6Addr::from(v))),
    ]
}

fn arb_ecs() -> impl Strategy<Value = EcsOption> {
    arb_addr().prop_flat_map(|a| {
        let max = if a.is_ipv4() { 32u8 } else { 128 };
        (Just(a), 0..=max).prop_map(|(a, len)| EcsOption::from_addr(a, len).unwrap())
    })
}

fn arb_name() -> impl Strategy<Value = geoecs::dns_wire::Name> {
    prop::collection::vec("[a-z0-9]([a-z0-9-]{0,10}[a-z0-9])?", 1..5)
        .prop_map(|labels| geoecs::dns_wire::Name::new(&labels.join(".")).unwrap())
}

fn arb_message() -> impl Strategy<Value = DnsMessage> {
    (
        any::<u16>(),
        arb_name(),
        prop::bool::ANY,
        prop::option::of(arb_ecs()),
        any::<bool>(),
        prop::collection::vec((arb_addr(), any::<u32>()), 0..6),
        0u8..6,
    )
        .prop_map(|(id, qname, aaaa, ecs, is_resp, answers, rcode)| {
            let qtype = if aaaa { QType::Aaaa } else { QType::A };
            let query = DnsMessage::query(id, qname.clone(), qtype, ecs.clone());
            if !is_resp {
                return query;
            }
            let answers = answers
                .into_iter()
                .map(|(addr, ttl)| ResourceRecord {
                    name: qname.clone(),
                    ttl,
                    addr,
                })
                .collect();
            let mut r = DnsMessage::response_to(&query, Rcode::new(rcode).unwrap(), answers);
            r.recursion_available = true;
            if let Some(e) = ecs {
                let scope = e.source_prefix_len() / 2;
                r.set_ecs(Some(e.with_scope(scope).unwrap()));
            }
            r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn message_roundtrip(msg in arb_message()) {
        let wire = encode_message(&msg).unwrap();
        let back = decode_message(&wire).unwrap();
        prop_assert_eq!(&back, &msg);
        prop_assert_eq!(encode_message(&back).unwrap(), wire);
    }

    #[test]
    fn ecs_matches_reference(addr in arb_addr(), len in 0u8..=128) {
        let max = if addr.is_ipv4() { 32 } else { 128 };
        let len = len.min(max);
        let ecs = EcsOption::from_addr(addr, len).unwrap();
        prop_assert_eq!(ecs.encode_data(), reference_ecs_data(addr, len, 0));
        prop_assert_eq!(EcsOption::decode_data(&ecs.encode_data()).unwrap(), ecs);
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
        let _ = decode_message(&bytes);
    }
}
